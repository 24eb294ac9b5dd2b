//! The fixed-energy functional `f(u) = A(u) B(u)` with
//! `A = 1/2 int |u'|^2` and `B = int (h - V(u))`, the constraint functional
//! `g(u) = int (V(u) + 1/2 V'(u).u)` and Cerami–Palais–Smale diagnostics.
//!
//! Everything here is the exact derivative of the discretised quantity, so
//! finite differences of [`f_value`] reproduce [`f_gradient`].

use serde::Serialize;

use crate::error::{Error, Result};
use crate::loopspace::{self, dot, kinetic_half, LoopPath, SymmetryClass};
use crate::potentials::PotentialModel;

/// Bracketing range for the scaling root.
pub const ROOT_BRACKET: (f64, f64) = (1e-8, 1e8);
const ROOT_MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub potential: PotentialModel,
    pub h: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub symmetry: SymmetryClass,
}

impl ProblemSpec {
    /// Validates the admissibility condition `h > mu2 / mu1` (strict).
    pub fn new(potential: PotentialModel, h: f64, mu1: f64, mu2: f64, symmetry: SymmetryClass) -> Result<Self> {
        if !(mu1 > 0.0 && mu1.is_finite()) {
            return Err(Error::InvalidProblem(format!("mu1 must be positive, got {mu1}")));
        }
        if !(mu2 >= 0.0 && mu2.is_finite()) {
            return Err(Error::InvalidProblem(format!("mu2 must be non-negative, got {mu2}")));
        }
        if !h.is_finite() || h <= mu2 / mu1 {
            return Err(Error::InvalidProblem(format!("h must exceed mu2/mu1 (h = {h}, mu2/mu1 = {})", mu2 / mu1)));
        }
        Ok(Self { potential, h, mu1, mu2, symmetry })
    }

    pub fn dim(&self) -> usize {
        self.potential.dim()
    }

    pub fn with_symmetry(&self, symmetry: SymmetryClass) -> Self {
        Self { symmetry, ..self.clone() }
    }

    fn check(&self, u: &LoopPath) -> Result<()> {
        if u.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: u.dim() });
        }
        Ok(())
    }
}

/// `B(u) = int (h - V(u))`.
pub fn potential_gap(u: &LoopPath, spec: &ProblemSpec) -> Result<f64> {
    spec.check(u)?;
    let mut acc = Vec::with_capacity(u.len());
    for node in u.nodes() {
        acc.push(spec.h - spec.potential.value(node)?);
    }
    Ok(loopspace::integrate(&acc))
}

pub fn f_value(u: &LoopPath, spec: &ProblemSpec) -> Result<f64> {
    Ok(kinetic_half(u) * potential_gap(u, spec)?)
}

/// Nodewise gradient of the discretised `f`:
/// `B N (2u_k - u_{k+1} - u_{k-1}) - (A / N) grad V(u_k)`.
pub fn f_gradient(u: &LoopPath, spec: &ProblemSpec) -> Result<LoopPath> {
    let a = kinetic_half(u);
    let b = potential_gap(u, spec)?;
    let n = u.len();
    let nf = n as f64;
    let mut data = Vec::with_capacity(n * u.dim());
    for k in 0..n {
        let (prev, here, next) = (u.node(k + n - 1), u.node(k), u.node(k + 1));
        let gv = spec.potential.eval_grad(here)?;
        for c in 0..u.dim() {
            data.push(b * nf * (2.0 * here[c] - next[c] - prev[c]) - a / nf * gv[c]);
        }
    }
    LoopPath::from_flat(u.dim(), data)
}

/// `f` and its gradient in one pass.
pub fn f_value_and_gradient(u: &LoopPath, spec: &ProblemSpec) -> Result<(f64, LoopPath)> {
    let a = kinetic_half(u);
    let b = potential_gap(u, spec)?;
    Ok((a * b, f_gradient(u, spec)?))
}

pub fn g_value(u: &LoopPath, spec: &ProblemSpec) -> Result<f64> {
    spec.check(u)?;
    let mut acc = Vec::with_capacity(u.len());
    for node in u.nodes() {
        let (v, g) = spec.potential.value_and_grad(node)?;
        acc.push(v + 0.5 * dot(&g, node));
    }
    Ok(loopspace::integrate(&acc))
}

/// Nodewise gradient of `g`: `(1/N) (3/2 grad V(u_k) + 1/2 V''(u_k) u_k)`,
/// the Hessian term by central differences along the ray.
pub fn g_gradient(u: &LoopPath, spec: &ProblemSpec) -> Result<LoopPath> {
    spec.check(u)?;
    let nf = u.len() as f64;
    let mut data = Vec::with_capacity(u.as_slice().len());
    for node in u.nodes() {
        let gv = spec.potential.eval_grad(node)?;
        let hq = spec.potential.hessian_radial(node)?;
        data.extend(gv.iter().zip(&hq).map(|(g, h)| (1.5 * g + 0.5 * h) / nf));
    }
    LoopPath::from_flat(u.dim(), data)
}

/// Scale `a > 0` with `g(a u) = h`.
///
/// Exponential bracketing from `a = 1` inside [`ROOT_BRACKET`], then
/// bisection. Relies on `a -> g(a u)` crossing `h` once, which (B4) provides.
pub fn scaling_root(u: &LoopPath, spec: &ProblemSpec) -> Result<f64> {
    spec.check(u)?;
    if u.max_abs() == 0.0 {
        return Err(Error::ZeroLoop);
    }
    let tol = 1e-12 * (1.0 + spec.h.abs());
    let phi = |a: f64| g_value(&u.scaled(a), spec).map(|g| g - spec.h);
    let mut samples = Vec::new();

    let f1 = phi(1.0)?;
    samples.push((1.0, f1 + spec.h));
    if f1.abs() <= tol {
        return Ok(1.0);
    }
    // Walk away from a = 1 in the direction that changes the sign.
    let factor = if f1 < 0.0 { 2.0 } else { 0.5 };
    let (mut prev, mut f_prev) = (1.0, f1);
    let (lo, f_lo, hi, f_hi) = loop {
        let a = prev * factor;
        if !(ROOT_BRACKET.0..=ROOT_BRACKET.1).contains(&a) {
            return Err(Error::NoBracket { samples });
        }
        let fa = phi(a)?;
        samples.push((a, fa + spec.h));
        if fa.abs() <= tol {
            return Ok(a);
        }
        if (fa > 0.0) != (f1 > 0.0) {
            break if factor > 1.0 { (prev, f_prev, a, fa) } else { (a, fa, prev, f_prev) };
        }
        (prev, f_prev) = (a, fa);
    };
    let (mut lo, mut hi) = (lo, hi);
    let increasing = f_hi > f_lo;
    let mut best = (f64::INFINITY, lo);
    for _ in 0..ROOT_MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let fm = phi(mid)?;
        if fm.abs() < best.0 {
            best = (fm.abs(), mid);
        }
        if fm.abs() <= tol || mid == lo || mid == hi {
            return Ok(mid);
        }
        if (fm < 0.0) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best.1)
}

/// Closed set the constrained and minimax routes work with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintSet {
    /// `F = { int (V(u) + 1/2 V'(u).u) = h }`.
    Nehari,
    /// `F = { ||u'||_{L^2} = radius }`.
    GradientSphere { radius: f64 },
}

/// Computable proxy for the distance from `u` to `set`.
///
/// For the Nehari set this is the distance along the ray to `a(u) u`, an
/// upper bound on the true distance; for the gradient sphere it is the
/// radial gap, which is exact.
pub fn distance_to_constraint(u: &LoopPath, set: &ConstraintSet, spec: &ProblemSpec) -> Result<f64> {
    match set {
        ConstraintSet::Nehari => {
            let a = scaling_root(u, spec)?;
            Ok((1.0 - a).abs() * loopspace::h1_norm(u))
        }
        ConstraintSet::GradientSphere { radius } => Ok((loopspace::velocity_l2(u) - radius).abs()),
    }
}

/// Dual-norm proxy of a nodewise gradient: the discrete `L^2` norm of
/// `N * grad`, which is consistent across node counts.
pub fn gradient_norm(grad: &LoopPath) -> f64 {
    let nf = grad.len() as f64;
    (nf * grad.dot(grad)).sqrt()
}

/// `(1 + ||u||) ||grad f(u)||`.
pub fn weighted_gradient(u: &LoopPath, grad: &LoopPath) -> f64 {
    (1.0 + loopspace::h1_norm(u)) * gradient_norm(grad)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CpsRecord {
    pub iteration: usize,
    pub f: f64,
    pub h1_norm: f64,
    pub weighted_gradient: f64,
    /// `None` where the proxy is undefined (the zero loop for the Nehari set).
    pub distance: Option<f64>,
    pub constraint_residual: f64,
}

/// Trace of Cerami–Palais–Smale quantities along a solve.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct CpsTrace {
    records: Vec<CpsRecord>,
}

impl CpsTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[CpsRecord] {
        &self.records
    }

    pub fn last(&self) -> Option<&CpsRecord> {
        self.records.last()
    }

    pub fn first(&self) -> Option<&CpsRecord> {
        self.records.first()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Appends a record for `u`, computing every entry.
    pub fn append(&mut self, u: &LoopPath, spec: &ProblemSpec, set: &ConstraintSet) -> Result<&CpsRecord> {
        let (f, grad) = f_value_and_gradient(u, spec)?;
        self.append_with_gradient(u, f, &grad, spec, set)
    }

    /// Appends a record reusing an already computed `f` and gradient.
    pub fn append_with_gradient(
        &mut self,
        u: &LoopPath,
        f: f64,
        grad: &LoopPath,
        spec: &ProblemSpec,
        set: &ConstraintSet,
    ) -> Result<&CpsRecord> {
        let distance = match distance_to_constraint(u, set, spec) {
            Ok(d) => Some(d),
            Err(Error::ZeroLoop) => None,
            Err(Error::NoBracket { .. }) => None,
            Err(e) => return Err(e),
        };
        let record = CpsRecord {
            iteration: self.records.last().map_or(0, |r| r.iteration + 1),
            f,
            h1_norm: loopspace::h1_norm(u),
            weighted_gradient: weighted_gradient(u, grad),
            distance,
            constraint_residual: (g_value(u, spec)? - spec.h).abs(),
        };
        let finite = [record.f, record.h1_norm, record.weighted_gradient, record.constraint_residual]
            .iter()
            .all(|x| x.is_finite())
            && record.distance.is_none_or(f64::is_finite);
        if !finite {
            return Err(Error::Domain(format!("non-finite CPS record {record:?}")));
        }
        self.records.push(record);
        Ok(self.records.last().expect("just pushed"))
    }
}

/// Free-function form of [`CpsTrace::append`].
pub fn cps_append(mut trace: CpsTrace, u: &LoopPath, spec: &ProblemSpec, set: &ConstraintSet) -> Result<CpsTrace> {
    trace.append(u, spec, set)?;
    Ok(trace)
}
