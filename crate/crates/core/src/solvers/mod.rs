//! Critical-point routes for `f`: constrained minimisation on the Nehari-like
//! set and a mountain-pass path deformation.

mod constrained;
mod mountain_pass;

pub use constrained::minimize_on_f;
pub use mountain_pass::{build_endpoint, mountain_pass, separation_check, SeparationCertificate};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::CpsTrace;
use crate::loopspace::{project_symmetric, sobolev_precondition, LoopPath, SymmetryClass, MIN_NODES};

/// Starting loop for a solve.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialLoop {
    /// Unit circle in the `(q1, q2)` plane.
    #[default]
    Circle,
    /// First four Fourier modes with seeded coefficients.
    RandomBandlimited,
    User(LoopPath),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub max_iterations: usize,
    /// Bound on the weighted CPS quantity `(1 + ||u||) ||grad f||`.
    pub gradient_tolerance: f64,
    pub step_shrink: f64,
    pub armijo: f64,
    /// Interior segments of the mountain-pass path.
    pub path_points: usize,
    pub seed: u64,
    pub initial_loop: InitialLoop,
    /// Node count `N` for generated initial loops.
    pub nodes: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            gradient_tolerance: 1e-6,
            step_shrink: 0.5,
            armijo: 1e-4,
            path_points: 16,
            seed: 0,
            initial_loop: InitialLoop::Circle,
            nodes: 256,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidOptions(msg.to_string()));
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive");
        }
        if !(self.gradient_tolerance > 0.0) {
            return bad("gradient_tolerance must be positive");
        }
        if !(self.step_shrink > 0.0 && self.step_shrink < 1.0) {
            return bad("step_shrink must lie in (0, 1)");
        }
        if !(self.armijo > 0.0 && self.armijo < 0.5) {
            return bad("armijo constant must lie in (0, 1/2)");
        }
        if self.path_points < 8 {
            return bad("path_points must be at least 8");
        }
        if self.nodes < MIN_NODES {
            return bad("nodes must be at least 8");
        }
        Ok(())
    }

    /// Materialises the initial loop in dimension `dim`, projected onto `symmetry`.
    pub fn initial(&self, dim: usize, symmetry: SymmetryClass) -> Result<LoopPath> {
        let raw = match &self.initial_loop {
            InitialLoop::Circle => LoopPath::circle(self.nodes, dim)?,
            InitialLoop::RandomBandlimited => LoopPath::random_bandlimited(self.nodes, dim, self.seed, symmetry)?,
            InitialLoop::User(u) => u.clone(),
        };
        project_symmetric(&raw, symmetry)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIter,
    HypothesisViolation,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIter => "max_iter",
            Termination::HypothesisViolation => "hypothesis_violation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    ConstrainedMin,
    MountainPass,
}

impl Route {
    pub fn as_str(self) -> &'static str {
        match self {
            Route::ConstrainedMin => "constrained_min",
            Route::MountainPass => "mountain_pass",
        }
    }
}

impl std::str::FromStr for Route {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constrained_min" => Ok(Route::ConstrainedMin),
            "mountain_pass" => Ok(Route::MountainPass),
            other => Err(Error::InvalidOptions(format!(
                "unknown route '{other}' (expected constrained_min or mountain_pass)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub route: Route,
    pub solution: LoopPath,
    pub f_value: f64,
    pub termination: Termination,
    pub trace: CpsTrace,
    pub iterations: usize,
    /// Accepted `f` values along the run (constrained route) or the
    /// minimax level after each sweep (mountain pass).
    pub levels: Vec<f64>,
    /// Largest `||w - P_sym w||_inf` before projection over the run.
    pub max_symmetry_drift: f64,
    /// Mountain-pass endpoints `(z0, z1)`.
    pub endpoints: Option<(LoopPath, LoopPath)>,
    pub message: String,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    /// Mountain-pass level estimates; empty for the constrained route.
    pub fn gamma(&self) -> &[f64] {
        match self.route {
            Route::MountainPass => &self.levels,
            Route::ConstrainedMin => &[],
        }
    }
}

/// Preconditioned descent direction `-(I - Delta_N)^{-1} (N grad)`.
pub(crate) fn preconditioned(grad: &LoopPath) -> LoopPath {
    sobolev_precondition(&grad.scaled(grad.len() as f64))
}

/// Projects `w` onto `symmetry` and reports how far it was from the subspace.
pub(crate) fn project_with_drift(w: &LoopPath, symmetry: SymmetryClass) -> Result<(LoopPath, f64)> {
    let p = project_symmetric(w, symmetry)?;
    let drift = p.sub(w)?.max_abs();
    Ok((p, drift))
}
