//! Discrete unit-period loops `u: R/Z -> R^n` sampled on a uniform grid.
//!
//! Node `k` holds `u(k/N)`. Index arithmetic is periodic. The derivative is
//! the forward difference scaled by `N`, and integrals use the rectangle rule,
//! so the kinetic term is an exact quadratic form whose gradient is the
//! periodic second difference.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible node count.
pub const MIN_NODES: usize = 8;

/// Symmetry subspace a loop is restricted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymmetryClass {
    /// Full loop space.
    #[default]
    None,
    /// Antiperiodic loops, `u(t + 1/2) = -u(t)`.
    E1,
    /// Odd loops, `u(-t) = -u(t)`.
    E2,
}

impl SymmetryClass {
    pub fn as_str(self) -> &'static str {
        match self {
            SymmetryClass::None => "none",
            SymmetryClass::E1 => "e1",
            SymmetryClass::E2 => "e2",
        }
    }
}

impl fmt::Display for SymmetryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SymmetryClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(SymmetryClass::None),
            "e1" => Ok(SymmetryClass::E1),
            "e2" => Ok(SymmetryClass::E2),
            other => Err(Error::InvalidProblem(format!("unknown symmetry class '{other}' (expected none, e1 or e2)"))),
        }
    }
}

/// A sampled loop: `N` nodes in `R^n`, stored node-major.
///
/// The same container is used for node fields that are not positions
/// (velocities, gradients), since they share shape and periodic indexing.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopPath {
    dim: usize,
    data: Vec<f64>,
}

impl LoopPath {
    /// Builds a loop from a list of nodes.
    pub fn new(nodes: Vec<Vec<f64>>) -> Result<Self> {
        let dim = nodes.first().map(Vec::len).unwrap_or(0);
        if let Some((k, node)) = nodes.iter().enumerate().find(|(_, v)| v.len() != dim) {
            return Err(Error::InvalidLoop(format!("node {k} has {} coordinates, expected {dim}", node.len())));
        }
        Self::from_flat(dim, nodes.into_iter().flatten().collect())
    }

    /// Builds a loop from node-major flat storage.
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidLoop("dimension must be at least 1".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidLoop(format!(
                "{} values do not split into nodes of dimension {dim}",
                data.len()
            )));
        }
        let nodes = data.len() / dim;
        if nodes < MIN_NODES {
            return Err(Error::InvalidLoop(format!("need at least {MIN_NODES} nodes, got {nodes}")));
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidLoop(format!("non-finite coordinate at node {}", i / dim)));
        }
        Ok(Self { dim, data })
    }

    pub fn zeros(nodes: usize, dim: usize) -> Result<Self> {
        Self::from_flat(dim, vec![0.0; nodes * dim])
    }

    pub fn constant(nodes: usize, point: &[f64]) -> Result<Self> {
        Self::from_flat(point.len(), point.repeat(nodes))
    }

    /// Unit circle in the `(q1, q2)` plane, zero in the remaining coordinates.
    /// For `n = 1` this is `cos(2 pi t)`.
    pub fn circle(nodes: usize, dim: usize) -> Result<Self> {
        Self::from_fn(nodes, dim, |t, out| {
            let theta = 2.0 * PI * t;
            out[0] = theta.cos();
            if out.len() > 1 {
                out[1] = theta.sin();
            }
        })
    }

    /// Samples `fill(t, node)` at `t = k / N`.
    pub fn from_fn(nodes: usize, dim: usize, mut fill: impl FnMut(f64, &mut [f64])) -> Result<Self> {
        let mut data = vec![0.0; nodes * dim];
        for (k, node) in data.chunks_mut(dim.max(1)).enumerate() {
            fill(k as f64 / nodes as f64, node);
        }
        Self::from_flat(dim, data)
    }

    /// Random loop built from the first four Fourier modes with seeded
    /// coefficients in `[-1, 1]`, projected onto `symmetry`.
    pub fn random_bandlimited(nodes: usize, dim: usize, seed: u64, symmetry: SymmetryClass) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coeffs = Vec::with_capacity(4 * dim);
        for _ in 0..4 * dim {
            let a: f64 = rng.random_range(-1.0..1.0);
            let b: f64 = rng.random_range(-1.0..1.0);
            coeffs.push((a, b));
        }
        let raw = Self::from_fn(nodes, dim, |t, out| {
            for (m, chunk) in coeffs.chunks(dim).enumerate() {
                let theta = 2.0 * PI * (m as f64 + 1.0) * t;
                let (c, s) = (theta.cos(), theta.sin());
                for (o, (a, b)) in out.iter_mut().zip(chunk) {
                    *o += a * c + b * s;
                }
            }
        })?;
        project_symmetric(&raw, symmetry)
    }

    /// Node count `N`.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Spatial dimension `n`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node(&self, k: usize) -> &[f64] {
        let k = k % self.len();
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn node_mut(&mut self, k: usize) -> &mut [f64] {
        let k = k % self.len();
        &mut self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_nested(&self) -> Vec<Vec<f64>> {
        self.nodes().map(<[f64]>::to_vec).collect()
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim || self.data.len() != other.data.len() {
            return Err(Error::DimensionMismatch { expected: self.data.len(), got: other.data.len() });
        }
        Ok(())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|x| x * factor).collect() }
    }

    /// `self + factor * other`.
    pub fn axpy(&self, factor: f64, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        Ok(Self { dim: self.dim, data: self.data.iter().zip(&other.data).map(|(a, b)| a + factor * b).collect() })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    /// Nodewise Euclidean pairing `sum_k a_k . b_k`.
    pub fn dot(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Circular shift: node `k` of the result is node `k + j` of `self`.
    pub fn shift(&self, j: usize) -> Self {
        let n = self.len();
        let mut data = Vec::with_capacity(self.data.len());
        for k in 0..n {
            data.extend_from_slice(self.node(k + j));
        }
        Self { dim: self.dim, data }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Smallest Euclidean node norm.
    pub fn min_node_norm(&self) -> f64 {
        self.nodes().map(norm).fold(f64::INFINITY, f64::min)
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Forward-difference derivative `v_k = N (u_{k+1} - u_k)`.
pub fn velocity(u: &LoopPath) -> LoopPath {
    let n = u.len() as f64;
    let mut data = Vec::with_capacity(u.data.len());
    for k in 0..u.len() {
        let (a, b) = (u.node(k), u.node(k + 1));
        data.extend(a.iter().zip(b).map(|(x, y)| n * (y - x)));
    }
    LoopPath { dim: u.dim, data }
}

/// Rectangle-rule integral over the unit period.
pub fn integrate(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// `A(u) = 1/2 int |u'|^2`, evaluated as `(N / 2) sum |u_{k+1} - u_k|^2`.
pub fn kinetic_half(u: &LoopPath) -> f64 {
    let n = u.len();
    let mut acc = 0.0;
    for k in 0..n {
        let (a, b) = (u.node(k), u.node(k + 1));
        acc += a.iter().zip(b).map(|(x, y)| (y - x) * (y - x)).sum::<f64>();
    }
    0.5 * n as f64 * acc
}

/// `||u'||_{L^2}`.
pub fn velocity_l2(u: &LoopPath) -> f64 {
    (2.0 * kinetic_half(u)).sqrt()
}

/// Mean value `int u dt`.
pub fn mean(u: &LoopPath) -> Vec<f64> {
    let mut m = vec![0.0; u.dim];
    for node in u.nodes() {
        for (mi, x) in m.iter_mut().zip(node) {
            *mi += x;
        }
    }
    let n = u.len() as f64;
    m.iter_mut().for_each(|x| *x /= n);
    m
}

/// Discrete `H^1` norm `||u'||_{L^2} + |int u dt|`.
pub fn h1_norm(u: &LoopPath) -> f64 {
    velocity_l2(u) + norm(&mean(u))
}

/// Projection onto the symmetry subspace.
pub fn project_symmetric(u: &LoopPath, s: SymmetryClass) -> Result<LoopPath> {
    let n = u.len();
    let partner: Box<dyn Fn(usize) -> usize> = match s {
        SymmetryClass::None => return Ok(u.clone()),
        SymmetryClass::E1 => {
            if !n.is_multiple_of(2) {
                return Err(Error::OddNodeCount(n));
            }
            Box::new(move |k| (k + n / 2) % n)
        }
        SymmetryClass::E2 => Box::new(move |k| (n - k) % n),
    };
    let mut data = Vec::with_capacity(u.data.len());
    for k in 0..n {
        let (a, b) = (u.node(k), u.node(partner(k)));
        data.extend(a.iter().zip(b).map(|(x, y)| 0.5 * (x - y)));
    }
    Ok(LoopPath { dim: u.dim, data })
}

/// Solves `(I - Delta_N) w = g` componentwise, with
/// `Delta_N w_k = N^2 (w_{k+1} - 2 w_k + w_{k-1})` periodic.
///
/// Cyclic tridiagonal elimination via Sherman–Morrison on top of a Thomas
/// sweep; the factorisation is shared by all components.
pub fn sobolev_precondition(g: &LoopPath) -> LoopPath {
    let n = g.len();
    let nn = (n * n) as f64;
    let off = -nn;
    let diag = 1.0 + 2.0 * nn;
    // Corner entries of the cyclic matrix are both `off`.
    let gamma = -diag;
    let mut modified = vec![diag; n];
    modified[0] = diag - gamma;
    modified[n - 1] = diag - off * off / gamma;

    // Thomas factorisation of the modified tridiagonal matrix.
    let mut c_prime = vec![0.0; n];
    let mut denom = vec![0.0; n];
    denom[0] = modified[0];
    c_prime[0] = off / denom[0];
    for i in 1..n {
        denom[i] = modified[i] - off * c_prime[i - 1];
        c_prime[i] = off / denom[i];
    }
    let solve = |rhs: &mut [f64]| {
        rhs[0] /= denom[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - off * rhs[i - 1]) / denom[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= c_prime[i] * rhs[i + 1];
        }
    };

    let mut z = vec![0.0; n];
    z[0] = gamma;
    z[n - 1] = off;
    solve(&mut z);
    let z_factor = 1.0 + z[0] + off * z[n - 1] / gamma;

    let mut out = g.clone();
    let mut col = vec![0.0; n];
    for c in 0..g.dim {
        for (i, x) in col.iter_mut().enumerate() {
            *x = g.data[i * g.dim + c];
        }
        solve(&mut col);
        let factor = (col[0] + off * col[n - 1] / gamma) / z_factor;
        for (i, x) in col.iter().enumerate() {
            out.data[i * g.dim + c] = x - factor * z[i];
        }
    }
    out
}

/// Applies `I - Delta_N` componentwise.
pub fn apply_helmholtz(w: &LoopPath) -> LoopPath {
    let n = w.len();
    let nn = (n * n) as f64;
    let mut data = Vec::with_capacity(w.data.len());
    for k in 0..n {
        let (prev, here, next) = (w.node(k + n - 1), w.node(k), w.node(k + 1));
        for c in 0..w.dim {
            data.push(here[c] + nn * (2.0 * here[c] - next[c] - prev[c]));
        }
    }
    LoopPath { dim: w.dim, data }
}

/// Piecewise-linear resampling onto `nodes` grid points.
pub fn resample(u: &LoopPath, nodes: usize) -> Result<LoopPath> {
    let old = u.len();
    LoopPath::from_fn(nodes, u.dim, |t, out| {
        let x = t * old as f64;
        let k = x.floor() as usize;
        let w = x - k as f64;
        let (a, b) = (u.node(k), u.node(k + 1));
        for (o, (p, q)) in out.iter_mut().zip(a.iter().zip(b)) {
            *o = (1.0 - w) * p + w * q;
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_loop(nodes: usize, dim: usize, seed: u64) -> LoopPath {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..nodes * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        LoopPath::from_flat(dim, data).unwrap()
    }

    /// Dense Gaussian elimination with partial pivoting, used as an oracle.
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for row in col + 1..n {
                let f = a[row][col] / a[col][col];
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
            x[i] = (b[i] - s) / a[i][i];
        }
        x
    }

    #[test]
    fn rejects_short_or_nonfinite_loops() {
        assert!(LoopPath::zeros(7, 2).is_err());
        assert!(LoopPath::from_flat(1, vec![0.0, 1.0, f64::NAN, 0.0, 0.0, 0.0, 0.0, 0.0]).is_err());
        assert!(LoopPath::new(vec![vec![0.0; 2]; 8]).is_ok());
        let mut ragged = vec![vec![0.0; 2]; 8];
        ragged[3] = vec![0.0];
        assert!(LoopPath::new(ragged).is_err());
    }

    #[test]
    fn velocity_of_constant_is_zero() {
        let u = LoopPath::constant(16, &[1.5, -2.0]).unwrap();
        assert_eq!(velocity(&u).max_abs(), 0.0);
    }

    #[test]
    fn velocity_sawtooth_wraps() {
        let n = 16;
        let u = LoopPath::from_fn(n, 2, |t, o| o[0] = t).unwrap();
        let v = velocity(&u);
        for k in 0..n - 1 {
            assert_relative_eq!(v.node(k)[0], 1.0, epsilon = 1e-12);
            assert_eq!(v.node(k)[1], 0.0);
        }
        assert_relative_eq!(v.node(n - 1)[0], 1.0 - n as f64, epsilon = 1e-12);
    }

    #[test]
    fn velocity_of_circle_is_chord_length() {
        let n = 256;
        let v = velocity(&LoopPath::circle(n, 2).unwrap());
        let chord = 2.0 * n as f64 * (PI / n as f64).sin();
        for node in v.nodes() {
            assert_relative_eq!(norm(node), chord, max_relative = 1e-12);
            assert!((norm(node) - 2.0 * PI).abs() / (2.0 * PI) < 1e-4);
        }
    }

    #[test]
    fn integrate_examples() {
        assert_eq!(integrate(&[3.0; 10]), 3.0);
        let n = 64;
        let s: Vec<f64> = (0..n).map(|k| (2.0 * PI * k as f64 / n as f64).sin()).collect();
        assert!(integrate(&s).abs() < 1e-15);
        let s2: Vec<f64> = s.iter().map(|x| x * x).collect();
        assert_relative_eq!(integrate(&s2), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn kinetic_half_examples() {
        assert_eq!(kinetic_half(&LoopPath::constant(32, &[2.0]).unwrap()), 0.0);
        let n = 256;
        let a = kinetic_half(&LoopPath::circle(n, 2).unwrap());
        let closed = 2.0 * (n * n) as f64 * (PI / n as f64).sin().powi(2);
        assert_relative_eq!(a, closed, max_relative = 1e-12);
        assert!((a - 2.0 * PI * PI).abs() / (2.0 * PI * PI) < 1e-4);

        let u = random_loop(40, 3, 11);
        assert_relative_eq!(kinetic_half(&u.scaled(3.0)), 9.0 * kinetic_half(&u), max_relative = 1e-14);
        let direct = 0.5 * integrate(&velocity(&u).nodes().map(|v| dot(v, v)).collect::<Vec<_>>());
        assert_relative_eq!(kinetic_half(&u), direct, max_relative = 1e-12);
    }

    #[test]
    fn kinetic_half_second_order_convergence() {
        let exact = 2.0 * PI * PI;
        let err = |n| (kinetic_half(&LoopPath::circle(n, 2).unwrap()) - exact).abs();
        for n in [32, 64, 128, 256] {
            let ratio = err(n) / err(2 * n);
            assert!((3.6..=4.4).contains(&ratio), "N = {n}: ratio {ratio}");
        }
    }

    #[test]
    fn projection_examples() {
        let circle = LoopPath::circle(64, 2).unwrap();
        let p = project_symmetric(&circle, SymmetryClass::E1).unwrap();
        assert!(p.sub(&circle).unwrap().max_abs() < 1e-15);

        let c = LoopPath::constant(64, &[1.0, 2.0]).unwrap();
        assert_eq!(project_symmetric(&c, SymmetryClass::E1).unwrap().max_abs(), 0.0);
        assert_eq!(project_symmetric(&c, SymmetryClass::E2).unwrap().max_abs(), 0.0);

        let odd = random_loop(9, 1, 1);
        assert_eq!(project_symmetric(&odd, SymmetryClass::E1), Err(Error::OddNodeCount(9)));
        assert!(project_symmetric(&odd, SymmetryClass::E2).is_ok());
        assert_eq!(project_symmetric(&odd, SymmetryClass::None).unwrap(), odd);
    }

    #[test]
    fn precondition_examples() {
        let zero = LoopPath::zeros(16, 2).unwrap();
        assert_eq!(sobolev_precondition(&zero).max_abs(), 0.0);

        let c = LoopPath::constant(16, &[2.5]).unwrap();
        let w = sobolev_precondition(&c);
        for node in w.nodes() {
            assert_relative_eq!(node[0], 2.5, max_relative = 1e-12);
        }

        let n = 16;
        let g = LoopPath::from_fn(n, 1, |t, o| o[0] = (2.0 * PI * t).cos()).unwrap();
        let w = sobolev_precondition(&g);
        let eig = 1.0 + 4.0 * (n * n) as f64 * (PI / n as f64).sin().powi(2);
        let nn = (n * n) as f64;
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            dense[i][i] = 1.0 + 2.0 * nn;
            dense[i][(i + 1) % n] -= nn;
            dense[i][(i + n - 1) % n] -= nn;
        }
        let oracle = dense_solve(dense, g.as_slice().to_vec());
        for k in 0..n {
            assert_relative_eq!(w.node(k)[0], g.node(k)[0] / eig, epsilon = 1e-14);
            assert_relative_eq!(w.node(k)[0], oracle[k], epsilon = 1e-14);
        }
    }

    #[test]
    fn precondition_residual_bound() {
        for (seed, n) in [(1, 8), (2, 33), (3, 256), (4, 1024)] {
            let g = random_loop(n, 2, seed);
            let w = sobolev_precondition(&g);
            let r = apply_helmholtz(&w).sub(&g).unwrap().max_abs();
            assert!(r <= 1e-10 * g.max_abs(), "N = {n}: residual {r}");
        }
    }

    #[test]
    fn resample_is_exact_on_refinement_nodes() {
        let u = random_loop(16, 2, 5);
        let fine = resample(&u, 32).unwrap();
        for k in 0..16 {
            assert_eq!(fine.node(2 * k), u.node(k));
        }
        let mid = fine.node(1);
        for c in 0..2 {
            assert_relative_eq!(mid[c], 0.5 * (u.node(0)[c] + u.node(1)[c]));
        }
    }

    #[test]
    fn random_bandlimited_is_seeded_and_symmetric() {
        let a = LoopPath::random_bandlimited(64, 3, 9, SymmetryClass::E1).unwrap();
        let b = LoopPath::random_bandlimited(64, 3, 9, SymmetryClass::E1).unwrap();
        assert_eq!(a, b);
        let p = project_symmetric(&a, SymmetryClass::E1).unwrap();
        assert!(p.sub(&a).unwrap().max_abs() < 1e-15);
        assert!(a.max_abs() > 0.0);
    }

    proptest! {
        #[test]
        fn integrate_shift_invariant(seed in 0u64..1000, j in 0usize..40) {
            let u = random_loop(40, 1, seed);
            let s = u.shift(j);
            // Summation order changes with the shift; compare to rounding.
            prop_assert!((integrate(u.as_slice()) - integrate(s.as_slice())).abs() < 1e-15);
        }

        #[test]
        fn kinetic_half_shift_and_sign_invariant(seed in 0u64..1000, j in 0usize..24) {
            let u = random_loop(24, 2, seed);
            let a = kinetic_half(&u);
            prop_assert!((kinetic_half(&u.shift(j)) - a).abs() <= 1e-12 * a);
            prop_assert_eq!(kinetic_half(&u.scaled(-1.0)), a);
        }

        #[test]
        fn projection_idempotent_and_contracting(seed in 0u64..1000, e1 in any::<bool>()) {
            let s = if e1 { SymmetryClass::E1 } else { SymmetryClass::E2 };
            let u = random_loop(32, 2, seed);
            let once = project_symmetric(&u, s).unwrap();
            let twice = project_symmetric(&once, s).unwrap();
            prop_assert_eq!(&once, &twice);
            prop_assert!(h1_norm(&once) <= h1_norm(&u) * (1.0 + 1e-12));
        }
    }
}
