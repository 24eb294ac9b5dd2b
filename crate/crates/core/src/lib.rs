//! Periodic orbits of `q'' + V'(q) = 0` with prescribed energy
//! `1/2 |q'|^2 + V(q) = h`.
//!
//! Orbits are found as critical points of the fixed-energy functional
//! `f(u) = 1/2 int |u'|^2 * int (h - V(u))` on unit-period loops, either by
//! minimising on the Nehari-like set `int (V(u) + 1/2 V'(u).u) = h` inside a
//! symmetric subspace or by a mountain-pass path deformation. A critical
//! loop `u` with `f(u) > 0` becomes the orbit `q(t) = u(t / T)` with
//! `T^2 = A(u) / B(u)`.

pub mod error;
pub mod functional;
pub mod loopspace;
pub mod orbit;
pub mod potentials;
pub mod solvers;

pub use error::{Error, Result};
pub use functional::{ConstraintSet, CpsRecord, CpsTrace, ProblemSpec};
pub use loopspace::{LoopPath, SymmetryClass};
pub use orbit::OrbitResult;
pub use potentials::{HypothesisReport, PotentialModel, SamplerConfig};
pub use solvers::{InitialLoop, Route, SolveOptions, SolveReport, Termination};
