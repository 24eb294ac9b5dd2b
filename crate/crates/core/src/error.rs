use thiserror::Error;

/// Errors raised by the loop-space numerics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid loop: {0}")]
    InvalidLoop(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("E1 symmetry needs an even node count, got N = {0}")]
    OddNodeCount(usize),

    #[error("parse error at position {position}: expected {}, found {found}", expected.join(" | "))]
    Parse {
        /// 1-based character position.
        position: usize,
        expected: Vec<String>,
        found: String,
    },

    #[error("variable q{index} out of range for dimension {dim}")]
    BadIndex { index: usize, dim: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("loop is identically zero")]
    ZeroLoop,

    #[error("no sign change of g(a u) - h for a in [1e-8, 1e8]; sampled (a, g): {samples:?}")]
    NoBracket { samples: Vec<(f64, f64)> },

    #[error("no R <= 2^60 with mean(h - V(R base)) <= 0; (B3) appears violated")]
    B3Fail,

    #[error("endpoint base loop passes through the origin at node {0}")]
    BaseThroughOrigin(usize),

    #[error("path collapsed: {0}")]
    Collapse(String),

    #[error("hypothesis violation during solve: {0}")]
    Hypothesis(String),

    #[error("period undefined: A = {kinetic}, B = {potential_gap} (both must be positive)")]
    Nonpositive { kinetic: f64, potential_gap: f64 },

    #[error("integrator blow-up: state norm {0} exceeds 1e8")]
    Blowup(f64),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid options: {0}")]
    InvalidOptions(String),
}

pub type Result<T> = std::result::Result<T, Error>;
