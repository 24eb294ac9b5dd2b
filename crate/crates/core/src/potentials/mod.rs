//! Potential models `V: R^n -> R` and hypothesis checkers.

mod expr;
mod hypotheses;

pub use expr::{parse_expr, BinOp, Dual, ExprAst, Func};
pub use hypotheses::{check_hypotheses, Hypothesis, HypothesisReport, SamplerConfig, Verdict, Witness};

use crate::error::{Error, Result};
use crate::loopspace::{dot, norm};

/// Built-in or parsed potential.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    /// `V(q) = a |q|^mu1 + mu2 / mu1`.
    PowerLaw {
        a: f64,
        mu1: f64,
        mu2: f64,
    },
    Expression {
        source: String,
        ast: ExprAst,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialModel {
    kind: PotentialKind,
    dim: usize,
}

impl PotentialModel {
    pub fn power_law(a: f64, mu1: f64, mu2: f64, dim: usize) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidProblem(format!("power law needs a > 0, got {a}")));
        }
        if !(mu1 >= 2.0 && mu1.is_finite()) {
            return Err(Error::InvalidProblem(format!("power law needs mu1 >= 2, got {mu1}")));
        }
        if !(mu2 >= 0.0 && mu2.is_finite()) {
            return Err(Error::InvalidProblem(format!("power law needs mu2 >= 0, got {mu2}")));
        }
        check_dim(dim)?;
        Ok(Self { kind: PotentialKind::PowerLaw { a, mu1, mu2 }, dim })
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Human-readable description, re-parseable for expressions.
    pub fn describe(&self) -> String {
        match &self.kind {
            PotentialKind::PowerLaw { a, mu1, mu2 } => {
                format!("power_law(a = {a:?}, mu1 = {mu1:?}, mu2 = {mu2:?})")
            }
            PotentialKind::Expression { source, .. } => source.clone(),
        }
    }

    fn check_point(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: q.len() });
        }
        if q.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("non-finite point {q:?}")));
        }
        Ok(())
    }

    pub fn value(&self, q: &[f64]) -> Result<f64> {
        self.check_point(q)?;
        match &self.kind {
            PotentialKind::PowerLaw { a, mu1, mu2 } => {
                let s = dot(q, q);
                Ok(a * radial_power(s, *mu1) * s + mu2 / mu1)
            }
            PotentialKind::Expression { ast, .. } => ast.eval(q),
        }
    }

    /// `grad V(q)`, by one forward-mode dual pass per component for
    /// expressions and in closed form for the power law.
    pub fn eval_grad(&self, q: &[f64]) -> Result<Vec<f64>> {
        self.check_point(q)?;
        match &self.kind {
            PotentialKind::PowerLaw { a, mu1, .. } => {
                let s = dot(q, q);
                let c = a * mu1 * radial_power(s, *mu1);
                Ok(q.iter().map(|x| c * x).collect())
            }
            PotentialKind::Expression { ast, .. } => {
                let mut seed = vec![0.0; self.dim];
                let mut g = Vec::with_capacity(self.dim);
                for i in 0..self.dim {
                    seed[i] = 1.0;
                    g.push(ast.eval_dual(q, &seed)?.du);
                    seed[i] = 0.0;
                }
                Ok(g)
            }
        }
    }

    /// `V(q)` together with `grad V(q)`.
    pub fn value_and_grad(&self, q: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((self.value(q)?, self.eval_grad(q)?))
    }

    /// `V''(q) q . q` from a central difference of `s -> grad V(q + s q^) . q^`
    /// with displacement `1e-4 (1 + |q|)`, rescaled by `|q|^2`.
    pub fn second_radial(&self, q: &[f64]) -> Result<f64> {
        self.check_point(q)?;
        let r = norm(q);
        if r == 0.0 {
            return Err(Error::Domain("second_radial is undefined at q = 0".into()));
        }
        let eps = 1e-4 * (1.0 + r);
        let unit: Vec<f64> = q.iter().map(|x| x / r).collect();
        let plus: Vec<f64> = q.iter().zip(&unit).map(|(x, e)| x + eps * e).collect();
        let minus: Vec<f64> = q.iter().zip(&unit).map(|(x, e)| x - eps * e).collect();
        let gp = dot(&self.eval_grad(&plus)?, &unit);
        let gm = dot(&self.eval_grad(&minus)?, &unit);
        Ok(r * r * (gp - gm) / (2.0 * eps))
    }

    /// `V''(q) q`, by the same central difference as [`Self::second_radial`].
    pub fn hessian_radial(&self, q: &[f64]) -> Result<Vec<f64>> {
        self.check_point(q)?;
        let r = norm(q);
        if r == 0.0 {
            return Ok(vec![0.0; self.dim]);
        }
        let eps = 1e-4 * (1.0 + r);
        let plus: Vec<f64> = q.iter().map(|x| x + eps * x / r).collect();
        let minus: Vec<f64> = q.iter().map(|x| x - eps * x / r).collect();
        let gp = self.eval_grad(&plus)?;
        let gm = self.eval_grad(&minus)?;
        Ok(gp.iter().zip(&gm).map(|(a, b)| r * (a - b) / (2.0 * eps)).collect())
    }
}

/// `s^(mu/2 - 1)` for `s = |q|^2`, with the `mu = 2` case exact.
fn radial_power(s: f64, mu: f64) -> f64 {
    if mu == 2.0 {
        1.0
    } else if s == 0.0 {
        0.0
    } else {
        s.powf(0.5 * mu - 1.0)
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidProblem("dimension must be at least 1".into()));
    }
    Ok(())
}

/// Parses an expression potential over `q1..qn`.
pub fn parse_potential(src: &str, dim: usize) -> Result<PotentialModel> {
    check_dim(dim)?;
    if src.trim().is_empty() {
        return Err(Error::Parse { position: 1, expected: vec!["expression".into()], found: "empty input".into() });
    }
    let ast = parse_expr(src, dim)?;
    Ok(PotentialModel { kind: PotentialKind::Expression { source: src.to_string(), ast }, dim })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Central differences with relative step, used as the gradient oracle.
    fn fd_grad(p: &PotentialModel, q: &[f64]) -> Vec<f64> {
        (0..q.len())
            .map(|i| {
                let h = 1e-5 * (1.0 + q[i].abs());
                let mut a = q.to_vec();
                let mut b = q.to_vec();
                a[i] += h;
                b[i] -= h;
                (p.value(&a).unwrap() - p.value(&b).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    fn max_rel_dev(a: &[f64], b: &[f64]) -> f64 {
        let scale = 1.0 + b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        a.iter().zip(b).map(|(x, y)| (x - y).abs() / scale).fold(0.0, f64::max)
    }

    #[test]
    fn parse_examples() {
        let p = parse_potential("0.5*|q|^2", 2).unwrap();
        assert_eq!(p.value(&[3.0, 4.0]).unwrap(), 12.5);
        assert_eq!(p.eval_grad(&[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
        let p = parse_potential("q1^2 - q2", 2).unwrap();
        assert_eq!(p.value(&[2.0, 7.0]).unwrap(), -3.0);
        assert!(matches!(parse_potential("0.5*(|q|^2", 2), Err(Error::Parse { .. })));
        assert!(matches!(parse_potential("   ", 2), Err(Error::Parse { .. })));
    }

    #[test]
    fn power_law_validation() {
        assert!(PotentialModel::power_law(0.0, 2.0, 0.0, 2).is_err());
        assert!(PotentialModel::power_law(1.0, 1.5, 0.0, 2).is_err());
        assert!(PotentialModel::power_law(1.0, 2.0, -1.0, 2).is_err());
        assert!(PotentialModel::power_law(1.0, 2.0, 0.0, 0).is_err());
    }

    #[test]
    fn power_law_gradient() {
        let p = PotentialModel::power_law(0.25, 4.0, 0.0, 2).unwrap();
        assert_eq!(p.eval_grad(&[1.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(p.eval_grad(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let p = PotentialModel::power_law(1.0, 3.0, 1.0, 3).unwrap();
        let q = [0.3, -0.7, 1.1];
        assert!(max_rel_dev(&p.eval_grad(&q).unwrap(), &fd_grad(&p, &q)) < 1e-6);
    }

    #[test]
    fn second_radial_examples() {
        let p = PotentialModel::power_law(1.0, 2.0, 0.0, 2).unwrap();
        assert_relative_eq!(p.second_radial(&[1.0, 1.0]).unwrap(), 4.0, epsilon = 1e-6);
        let p = PotentialModel::power_law(0.25, 4.0, 0.0, 2).unwrap();
        assert_relative_eq!(p.second_radial(&[1.0, 0.0]).unwrap(), 3.0, epsilon = 1e-5);
        assert!(matches!(p.second_radial(&[0.0, 0.0]), Err(Error::Domain(_))));
        let h = p.hessian_radial(&[1.0, 0.0]).unwrap();
        assert_relative_eq!(h[0], 3.0, epsilon = 1e-5);
    }

    #[test]
    fn domain_error_propagates_from_gradient() {
        let p = parse_potential("log(q1)", 1).unwrap();
        assert!(matches!(p.eval_grad(&[0.0]), Err(Error::Domain(_))));
        assert!(matches!(p.value(&[0.0, 1.0]), Err(Error::DimensionMismatch { .. })));
    }

    const EXPRESSIONS: [&str; 6] = [
        "0.5*|q|^2",
        "q1^4 + q2^2*q1 - 3*q2",
        "exp(-q1^2) * cos(q2) + sin(q1*q2)",
        "sqrt(1 + |q|^2) + abs(q1 - 5)",
        "log(2 + q1^2) / (1 + q2^2)",
        "|q|^2.5 + 2^q1",
    ];

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn expression_gradients_match_finite_differences(
            which in 0usize..EXPRESSIONS.len(),
            x in -2.0f64..2.0,
            y in -2.0f64..2.0,
        ) {
            let p = parse_potential(EXPRESSIONS[which], 2).unwrap();
            let q = [x, y];
            let g = p.eval_grad(&q).unwrap();
            prop_assert!(max_rel_dev(&g, &fd_grad(&p, &q)) <= 1e-6);
        }

        #[test]
        fn power_law_growth_identity(
            a in 0.1f64..3.0, mu1 in 2.0f64..6.0, mu2 in 0.0f64..2.0,
            x in -3.0f64..3.0, y in -3.0f64..3.0,
        ) {
            let p = PotentialModel::power_law(a, mu1, mu2, 2).unwrap();
            let q = [x, y];
            let lhs = dot(&p.eval_grad(&q).unwrap(), &q);
            let rhs = mu1 * (p.value(&q).unwrap() - mu2 / mu1);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }

        #[test]
        fn pretty_print_round_trip(
            which in 0usize..EXPRESSIONS.len(),
            x in -2.0f64..2.0,
            y in -2.0f64..2.0,
        ) {
            let p = parse_potential(EXPRESSIONS[which], 2).unwrap();
            let PotentialKind::Expression { ast, .. } = p.kind() else { unreachable!() };
            let again = parse_potential(&ast.to_string(), 2).unwrap();
            let (v1, v2) = (p.value(&[x, y]).unwrap(), again.value(&[x, y]).unwrap());
            prop_assert!((v1 - v2).abs() <= 1e-12 * (1.0 + v1.abs()));
        }
    }
}
