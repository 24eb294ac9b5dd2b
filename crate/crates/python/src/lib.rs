//! Python bindings for `hamloop`.
//!
//! ```python
//! import hamloop_py as hl
//! spec = hl.Problem(hl.Potential.power_law(0.5, 2.0), h=1.0, mu1=2.0)
//! sol = hl.solve(spec)
//! print(sol.period, sol.ode_sup)
//! ```

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use hamloop::functional::{f_gradient, f_value, g_value, scaling_root};
use hamloop::orbit::{synthesize, verify_samples};
use hamloop::potentials::{check_hypotheses, parse_potential, Verdict};
use hamloop::solvers::{build_endpoint, minimize_on_f, mountain_pass};
use hamloop::{
    ConstraintSet, Error, InitialLoop, LoopPath, PotentialModel, ProblemSpec, Route, SamplerConfig, SolveOptions,
    SymmetryClass,
};

fn err(e: Error) -> PyErr {
    match e {
        Error::InvalidProblem(_)
        | Error::InvalidOptions(_)
        | Error::InvalidLoop(_)
        | Error::OddNodeCount(_)
        | Error::Parse { .. }
        | Error::BadIndex { .. }
        | Error::DimensionMismatch { .. } => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// A potential `V: R^n -> R`.
#[pyclass(name = "Potential", module = "hamloop_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPotential {
    inner: PotentialModel,
}

#[pymethods]
impl PyPotential {
    /// `V(q) = a |q|^mu1 + mu2 / mu1`.
    #[staticmethod]
    #[pyo3(signature = (a, mu1, mu2=0.0, n=2))]
    fn power_law(a: f64, mu1: f64, mu2: f64, n: usize) -> PyResult<Self> {
        Ok(Self { inner: PotentialModel::power_law(a, mu1, mu2, n).map_err(err)? })
    }

    /// Expression in `q1..qn`, e.g. `"0.25*|q|^4 + cos(q2)"`.
    #[staticmethod]
    #[pyo3(signature = (source, n=2))]
    fn parse(source: &str, n: usize) -> PyResult<Self> {
        Ok(Self { inner: parse_potential(source, n).map_err(err)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, q: Vec<f64>) -> PyResult<f64> {
        self.inner.value(&q).map_err(err)
    }

    fn grad(&self, q: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.eval_grad(&q).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Potential({})", self.inner.describe())
    }
}

/// Potential, energy level, exponents and symmetry class.
#[pyclass(name = "Problem", module = "hamloop_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyProblem {
    inner: ProblemSpec,
}

#[pymethods]
impl PyProblem {
    #[new]
    #[pyo3(signature = (potential, h, mu1, mu2=0.0, symmetry="e1"))]
    fn new(potential: &PyPotential, h: f64, mu1: f64, mu2: f64, symmetry: &str) -> PyResult<Self> {
        let symmetry: SymmetryClass = symmetry.parse().map_err(err)?;
        let inner = ProblemSpec::new(potential.inner.clone(), h, mu1, mu2, symmetry).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn symmetry(&self) -> &'static str {
        self.inner.symmetry.as_str()
    }

    /// `f(u) = A(u) B(u)`.
    fn f(&self, u: &PyLoop) -> PyResult<f64> {
        f_value(&u.inner, &self.inner).map_err(err)
    }

    fn gradient(&self, u: &PyLoop) -> PyResult<PyLoop> {
        Ok(PyLoop { inner: f_gradient(&u.inner, &self.inner).map_err(err)? })
    }

    /// `mean(V + 1/2 V'.u)`; the constraint set is `g = h`.
    fn g(&self, u: &PyLoop) -> PyResult<f64> {
        g_value(&u.inner, &self.inner).map_err(err)
    }

    /// The `a > 0` with `g(a u) = h`.
    fn scaling_root(&self, u: &PyLoop) -> PyResult<f64> {
        scaling_root(&u.inner, &self.inner).map_err(err)
    }

    fn __repr__(&self) -> String {
        let s = &self.inner;
        format!(
            "Problem({}, h={}, mu1={}, mu2={}, symmetry={})",
            s.potential.describe(),
            s.h,
            s.mu1,
            s.mu2,
            s.symmetry.as_str()
        )
    }
}

/// Samples `u(k/N)` of a unit-period loop.
#[pyclass(name = "Loop", module = "hamloop_py", frozen, from_py_object)]
#[derive(Clone)]
struct PyLoop {
    inner: LoopPath,
}

#[pymethods]
impl PyLoop {
    /// From an `N x n` nested list.
    #[new]
    fn new(nodes: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Self { inner: LoopPath::new(nodes).map_err(err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (nodes, n=2))]
    fn circle(nodes: usize, n: usize) -> PyResult<Self> {
        Ok(Self { inner: LoopPath::circle(nodes, n).map_err(err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (nodes, n=2, seed=0, symmetry="none"))]
    fn random(nodes: usize, n: usize, seed: u64, symmetry: &str) -> PyResult<Self> {
        let symmetry: SymmetryClass = symmetry.parse().map_err(err)?;
        Ok(Self { inner: LoopPath::random_bandlimited(nodes, n, seed, symmetry).map_err(err)? })
    }

    fn scaled(&self, factor: f64) -> Self {
        Self { inner: self.inner.scaled(factor) }
    }

    fn to_list(&self) -> Vec<Vec<f64>> {
        self.inner.to_nested()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Loop(nodes={}, dim={})", self.inner.len(), self.inner.dim())
    }
}

/// Outcome of one hypothesis check.
#[pyclass(name = "HypothesisResult", module = "hamloop_py", frozen, get_all)]
struct PyHypothesis {
    name: String,
    verdict: &'static str,
    residual: f64,
    threshold_radius: Option<f64>,
    detail: String,
}

#[pymethods]
impl PyHypothesis {
    fn __repr__(&self) -> String {
        format!("{} {} (residual {:.3e})", self.name, self.verdict, self.residual)
    }
}

/// Critical loop plus the synthesized orbit and its residuals.
#[pyclass(name = "Solution", module = "hamloop_py", frozen, get_all)]
struct PySolution {
    route: &'static str,
    termination: &'static str,
    converged: bool,
    iterations: usize,
    f_value: f64,
    period: f64,
    ode_sup: f64,
    energy_sup: f64,
    closure: f64,
    nonconstant: bool,
    /// Weighted gradient `(1 + ||u||) ||grad f||` per recorded iterate.
    weighted_gradients: Vec<f64>,
    levels: Vec<f64>,
    message: String,
    loop_: PyLoop,
    orbit: PyLoop,
}

#[pymethods]
impl PySolution {
    fn __repr__(&self) -> String {
        format!(
            "Solution(route={}, termination={}, f={:.6}, T={:.6})",
            self.route, self.termination, self.f_value, self.period
        )
    }
}

/// Runs B1-B5 on `problem`'s potential.
#[pyfunction]
#[pyo3(signature = (problem, samples=None, seed=0))]
fn check(problem: &PyProblem, samples: Option<usize>, seed: u64) -> PyResult<Vec<PyHypothesis>> {
    let s = &problem.inner;
    let mut cfg = SamplerConfig { seed, ..SamplerConfig::default() };
    if let Some(n) = samples {
        cfg.samples = n;
    }
    let reports = check_hypotheses(&s.potential, s.h, s.mu1, s.mu2, &cfg).map_err(err)?;
    Ok(reports
        .into_iter()
        .map(|r| PyHypothesis {
            name: format!("{:?}", r.hypothesis),
            verdict: match r.verdict {
                Verdict::Pass => "pass",
                Verdict::Fail => "fail",
                Verdict::Inconclusive => "inconclusive",
            },
            residual: r.residual,
            threshold_radius: r.threshold_radius,
            detail: r.detail,
        })
        .collect())
}

/// Finds a critical loop and its orbit.
///
/// `route` is `"constrained_min"` or `"mountain_pass"`; the mountain pass
/// runs from the zero loop to the scaled circle across the gradient sphere
/// of radius `sphere_radius` (default half the circle's velocity norm).
#[pyfunction]
#[pyo3(signature = (
    problem, route="constrained_min", nodes=256, seed=0, max_iterations=5000,
    gradient_tolerance=1e-6, initial=None, sphere_radius=None,
))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    problem: &PyProblem,
    route: &str,
    nodes: usize,
    seed: u64,
    max_iterations: usize,
    gradient_tolerance: f64,
    initial: Option<PyLoop>,
    sphere_radius: Option<f64>,
) -> PyResult<PySolution> {
    let route: Route = route.parse().map_err(err)?;
    let spec = problem.inner.clone();
    let opts = SolveOptions {
        max_iterations,
        gradient_tolerance,
        seed,
        nodes,
        initial_loop: initial.map_or(InitialLoop::Circle, |u| InitialLoop::User(u.inner)),
        ..SolveOptions::default()
    };
    let (report, orbit) = py
        .detach(move || -> hamloop::Result<_> {
            let report = match route {
                Route::ConstrainedMin => minimize_on_f(&spec, &opts)?,
                Route::MountainPass => {
                    let circle = LoopPath::circle(nodes, spec.dim())?;
                    let radius = sphere_radius.unwrap_or(0.5 * hamloop::loopspace::velocity_l2(&circle));
                    let z0 = LoopPath::zeros(nodes, spec.dim())?;
                    let z1 = build_endpoint(&spec, &circle)?;
                    mountain_pass(&spec, &z0, &z1, &ConstraintSet::GradientSphere { radius }, &opts)?
                }
            };
            let orbit = synthesize(&report.solution, &spec)?;
            Ok((report, orbit))
        })
        .map_err(err)?;
    Ok(PySolution {
        route: report.route.as_str(),
        termination: report.termination.as_str(),
        converged: report.converged(),
        iterations: report.iterations,
        f_value: report.f_value,
        period: orbit.period,
        ode_sup: orbit.ode_sup,
        energy_sup: orbit.energy_sup,
        closure: orbit.closure,
        nonconstant: orbit.nonconstant,
        weighted_gradients: report.trace.records().iter().map(|r| r.weighted_gradient).collect(),
        levels: report.levels.clone(),
        message: report.message.clone(),
        loop_: PyLoop { inner: report.solution },
        orbit: PyLoop { inner: orbit.samples },
    })
}

/// Residuals `(ode_sup, energy_sup, closure)` of orbit samples `q(kT/N)`.
#[pyfunction]
fn verify(orbit: &PyLoop, period: f64, potential: &PyPotential, h: f64) -> PyResult<(f64, f64, f64)> {
    verify_samples(&orbit.inner, period, &potential.inner, h).map_err(err)
}

#[pymodule]
fn hamloop_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPotential>()?;
    m.add_class::<PyProblem>()?;
    m.add_class::<PyLoop>()?;
    m.add_class::<PyHypothesis>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
