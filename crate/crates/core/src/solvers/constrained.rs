use super::{preconditioned, project_with_drift, Route, SolveOptions, SolveReport, Termination};
use crate::error::{Error, Result};
use crate::functional::{
    f_value, f_value_and_gradient, g_gradient, g_value, scaling_root, weighted_gradient, ConstraintSet, CpsTrace,
    ProblemSpec,
};
use crate::loopspace::{LoopPath, SymmetryClass};

/// Relative size of `f` below which the Armijo test cannot resolve decrease
/// and acceptance falls back to gradient reduction.
const ROUNDING_FLOOR: f64 = 1e-12;

fn onto_constraint(u: &LoopPath, spec: &ProblemSpec) -> Result<LoopPath> {
    let a = scaling_root(u, spec).map_err(|e| match e {
        Error::NoBracket { .. } | Error::ZeroLoop => {
            Error::Hypothesis(format!("cannot scale loop onto the constraint set: {e}"))
        }
        other => other,
    })?;
    Ok(u.scaled(a))
}

struct Tangent {
    direction: LoopPath,
    drift: f64,
    weighted: f64,
}

/// Preconditioned gradient with its component along `grad g` removed.
fn tangent_step(u: &LoopPath, grad_f: &LoopPath, spec: &ProblemSpec) -> Result<Tangent> {
    let grad_g = g_gradient(u, spec)?;
    let pf = preconditioned(grad_f);
    let pg = preconditioned(&grad_g);
    let denom = grad_g.dot(&pg);
    let lambda = if denom > 0.0 { grad_g.dot(&pf) / denom } else { 0.0 };
    let tangential = grad_f.axpy(-lambda, &grad_g)?;
    let (direction, drift) = project_with_drift(&pg.scaled(lambda).sub(&pf)?, spec.symmetry)?;
    Ok(Tangent { direction, drift, weighted: weighted_gradient(u, &tangential) })
}

/// Minimises `f` on `F_i = { u in E_i : g(u) = h }`.
///
/// Each iteration projects onto the symmetry subspace, rescales onto the
/// constraint set along the ray, takes a preconditioned tangential step and
/// backtracks until the Armijo condition holds after re-projection.
pub fn minimize_on_f(spec: &ProblemSpec, opts: &SolveOptions) -> Result<SolveReport> {
    opts.validate()?;
    if spec.symmetry == SymmetryClass::None {
        return Err(Error::InvalidOptions("constrained minimisation needs symmetry e1 or e2".into()));
    }
    let set = ConstraintSet::Nehari;
    let tol = opts.gradient_tolerance;
    let mut u = onto_constraint(&opts.initial(spec.dim(), spec.symmetry)?, spec)?;
    let mut trace = CpsTrace::new();
    let mut levels = Vec::new();
    let mut max_drift: f64 = 0.0;
    let mut step: f64 = 1.0;
    let mut current = f_value_and_gradient(&u, spec)?;

    let finish = |u: LoopPath, f, termination, trace, iterations, levels, drift, message: String| SolveReport {
        route: Route::ConstrainedMin,
        solution: u,
        f_value: f,
        termination,
        trace,
        iterations,
        levels,
        max_symmetry_drift: drift,
        endpoints: None,
        message,
    };

    for iteration in 0..opts.max_iterations {
        let (f, grad) = current;
        levels.push(f);
        let weighted = trace.append_with_gradient(&u, f, &grad, spec, &set)?.weighted_gradient;
        let tangent = tangent_step(&u, &grad, spec)?;
        max_drift = max_drift.max(tangent.drift);
        if weighted <= tol && tangent.weighted <= tol {
            return Ok(finish(
                u,
                f,
                Termination::Converged,
                trace,
                iteration,
                levels,
                max_drift,
                format!("weighted gradient {weighted:.3e} <= {tol:.1e}"),
            ));
        }
        let slope = grad.dot(&tangent.direction);
        if !(slope < 0.0) {
            return Ok(finish(
                u,
                f,
                Termination::MaxIter,
                trace,
                iteration,
                levels,
                max_drift,
                format!("no descent direction (slope {slope:.3e}); weighted gradient {weighted:.3e}"),
            ));
        }

        let mut alpha = (2.0 * step).min(1e6);
        let accepted = loop {
            let (moved, drift) = project_with_drift(&u.axpy(alpha, &tangent.direction)?, spec.symmetry)?;
            max_drift = max_drift.max(drift);
            let trial = match onto_constraint(&moved, spec) {
                Ok(t) => t,
                Err(Error::Hypothesis(msg)) => {
                    return Ok(finish(u, f, Termination::HypothesisViolation, trace, iteration, levels, max_drift, msg))
                }
                Err(e) => return Err(e),
            };
            let ft = f_value(&trial, spec)?;
            if (alpha * slope).abs() > ROUNDING_FLOOR * f.abs() {
                if ft <= f + opts.armijo * alpha * slope {
                    break Some((trial, alpha));
                }
            } else if ft <= f + ROUNDING_FLOOR * f.abs() {
                // Predicted decrease is at rounding level; accept only if the
                // gradient shrinks.
                let (_, gt) = f_value_and_gradient(&trial, spec)?;
                if weighted_gradient(&trial, &gt) < weighted {
                    break Some((trial, alpha));
                }
            }
            alpha *= opts.step_shrink;
            if alpha < 1e-16 {
                break None;
            }
        };
        match accepted {
            Some((trial, alpha)) => {
                u = trial;
                step = alpha;
                current = f_value_and_gradient(&u, spec)?;
            }
            None => {
                return Ok(finish(
                    u,
                    f,
                    Termination::MaxIter,
                    trace,
                    iteration,
                    levels,
                    max_drift,
                    format!("line search stalled; weighted gradient {weighted:.3e}"),
                ))
            }
        }
    }
    let (f, grad) = current;
    levels.push(f);
    trace.append_with_gradient(&u, f, &grad, spec, &set)?;
    debug_assert!((g_value(&u, spec)? - spec.h).abs() <= 1e-10 * (1.0 + spec.h.abs()));
    Ok(finish(
        u,
        f,
        Termination::MaxIter,
        trace,
        opts.max_iterations,
        levels,
        max_drift,
        format!("reached {} iterations", opts.max_iterations),
    ))
}
