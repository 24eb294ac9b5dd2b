//! Mountain-pass route: a discrete path between two separated endpoints is
//! deformed by pushing its highest node downhill until that node is a
//! critical point of `f`.

use serde::Serialize;

use super::{preconditioned, project_with_drift, Route, SolveOptions, SolveReport, Termination};
use crate::error::{Error, Result};
use crate::functional::{f_value, f_value_and_gradient, g_value, ConstraintSet, CpsTrace, ProblemSpec};
use crate::loopspace::{h1_norm, integrate, project_symmetric, velocity_l2, LoopPath};

/// Largest power of two tried by [`build_endpoint`].
const MAX_SCALE_EXPONENT: i32 = 60;

/// Doubles `base` until `int (h - V(R base)) <= 0`, so that `f(R base) <= 0`.
pub fn build_endpoint(spec: &ProblemSpec, base: &LoopPath) -> Result<LoopPath> {
    if let Some(k) = base.nodes().position(|q| q.iter().all(|x| *x == 0.0)) {
        return Err(Error::BaseThroughOrigin(k));
    }
    for e in 0..=MAX_SCALE_EXPONENT {
        let z = base.scaled(2f64.powi(e));
        let mut gap = Vec::with_capacity(z.len());
        for q in z.nodes() {
            gap.push(spec.h - spec.potential.value(q)?);
        }
        if integrate(&gap) <= 0.0 {
            return Ok(z);
        }
    }
    Err(Error::B3Fail)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationCertificate {
    pub separated: bool,
    /// `||z0'||` (sphere) or `g(z0)` (Nehari).
    pub at_z0: f64,
    /// `||z1'||` (sphere) or `g(z1)` (Nehari).
    pub at_z1: f64,
    /// `r` (sphere) or `h` (Nehari).
    pub threshold: f64,
}

/// Checks that `set` separates `z0` from `z1` by evaluating the quantity
/// that defines it on both sides.
pub fn separation_check(
    z0: &LoopPath,
    z1: &LoopPath,
    set: &ConstraintSet,
    spec: &ProblemSpec,
) -> Result<SeparationCertificate> {
    let (at_z0, at_z1, threshold) = match set {
        ConstraintSet::GradientSphere { radius } => (velocity_l2(z0), velocity_l2(z1), *radius),
        ConstraintSet::Nehari => (g_value(z0, spec)?, g_value(z1, spec)?, spec.h),
    };
    Ok(SeparationCertificate { separated: at_z0 < threshold && threshold < at_z1, at_z0, at_z1, threshold })
}

fn evaluate(path: &[LoopPath], spec: &ProblemSpec) -> Result<Vec<f64>> {
    path.iter().map(|p| f_value(p, spec)).collect()
}

/// Refinement iterations for the maximum of `f` on one segment.
const PEAK_STEPS: usize = 52;

/// Highest point of the piecewise-linear path found so far.
#[derive(Debug, Clone, Copy)]
struct Peak {
    segment: usize,
    /// Position in `[0, 1]` along `path[segment] -> path[segment + 1]`.
    sigma: f64,
    value: f64,
}

fn on_segment(path: &[LoopPath], segment: usize, sigma: f64) -> Result<LoopPath> {
    path[segment].scaled(1.0 - sigma).axpy(sigma, &path[segment + 1])
}

/// Samples per segment used to bracket the top of the polygon.
const SEGMENT_SAMPLES: usize = 8;

/// Refines a bracketed maximum of `f` on one segment. Bisection on the
/// directional derivative resolves the top far below the `sqrt(eps)` limit
/// of comparing values; golden section covers brackets without a sign change.
fn refine_peak(path: &[LoopPath], segment: usize, lo: f64, hi: f64, spec: &ProblemSpec) -> Result<Peak> {
    let chord = path[segment + 1].sub(&path[segment])?;
    let slope_at = |s: f64| -> Result<f64> {
        let (_, g) = f_value_and_gradient(&on_segment(path, segment, s)?, spec)?;
        Ok(g.dot(&chord))
    };
    let f_at = |s: f64| -> Result<f64> { f_value(&on_segment(path, segment, s)?, spec) };
    let (mut lo, mut hi) = (lo, hi);
    let sigma = if slope_at(lo)? > 0.0 && slope_at(hi)? < 0.0 {
        for _ in 0..PEAK_STEPS {
            let mid = 0.5 * (lo + hi);
            if slope_at(mid)? > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    } else {
        let ratio = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = hi - ratio * (hi - lo);
        let mut x2 = lo + ratio * (hi - lo);
        let (mut f1, mut f2) = (f_at(x1)?, f_at(x2)?);
        for _ in 0..PEAK_STEPS {
            if f1 >= f2 {
                hi = x2;
                (x2, f2) = (x1, f1);
                x1 = hi - ratio * (hi - lo);
                f1 = f_at(x1)?;
            } else {
                lo = x1;
                (x1, f1) = (x2, f2);
                x2 = lo + ratio * (hi - lo);
                f2 = f_at(x2)?;
            }
        }
        if f1 >= f2 {
            x1
        } else {
            x2
        }
    };
    Ok(Peak { segment, sigma, value: f_at(sigma)? })
}

/// Locates the top of the polygon: a uniform scan of every segment picks
/// the bracket, golden section refines it.
fn path_peak(path: &[LoopPath], values: &[f64], spec: &ProblemSpec) -> Result<Peak> {
    let m = path.len() - 1;
    let mut best = Peak { segment: 0, sigma: 0.0, value: values[0] };
    for s in 0..m {
        for k in 1..=SEGMENT_SAMPLES {
            let sigma = k as f64 / SEGMENT_SAMPLES as f64;
            let v = if k == SEGMENT_SAMPLES { values[s + 1] } else { f_value(&on_segment(path, s, sigma)?, spec)? };
            if v > best.value {
                best = Peak { segment: s, sigma, value: v };
            }
        }
    }
    let h = 1.0 / SEGMENT_SAMPLES as f64;
    let mut peak = best;
    // The bracket may straddle a node; search both sides.
    let sides = [(best.segment, best.sigma - h, best.sigma + h)];
    let mut brackets: Vec<(usize, f64, f64)> = Vec::new();
    for (s, lo, hi) in sides {
        brackets.push((s, lo.max(0.0), hi.min(1.0)));
        if hi > 1.0 && s + 1 < m {
            brackets.push((s + 1, 0.0, hi - 1.0));
        }
        if lo < 0.0 && s > 0 {
            brackets.push((s - 1, 1.0 + lo, 1.0));
        }
    }
    for (s, lo, hi) in brackets {
        let candidate = refine_peak(path, s, lo, hi, spec)?;
        if candidate.value > peak.value {
            peak = candidate;
        }
    }
    Ok(peak)
}

/// Re-spaces interior nodes uniformly in `H^1` arc length by linear
/// interpolation along the current polygon.
fn equidistribute(path: &[LoopPath]) -> Result<Vec<LoopPath>> {
    let m = path.len() - 1;
    let mut arc = vec![0.0; m + 1];
    for j in 1..=m {
        arc[j] = arc[j - 1] + h1_norm(&path[j].sub(&path[j - 1])?);
    }
    let total = arc[m];
    if total == 0.0 {
        return Ok(path.to_vec());
    }
    let mut out = Vec::with_capacity(m + 1);
    out.push(path[0].clone());
    let mut seg = 0;
    for j in 1..m {
        let s = total * j as f64 / m as f64;
        while seg + 1 < m && arc[seg + 1] < s {
            seg += 1;
        }
        let len = arc[seg + 1] - arc[seg];
        let w = if len > 0.0 { (s - arc[seg]) / len } else { 0.0 };
        out.push(path[seg].scaled(1.0 - w).axpy(w, &path[seg + 1])?);
    }
    out.push(path[m].clone());
    Ok(out)
}

/// Mountain-pass deformation between `z0` and `z1` across `set`.
///
/// The path starts as the straight segment. Its level is the maximum of `f`
/// along the polygon. Each sweep moves the node nearest the top onto it,
/// takes one preconditioned Armijo step downhill from there and re-spaces
/// the path; every change is kept only if the level does not rise, so the
/// level estimates are non-increasing. The top of the polygon is the
/// returned critical-point candidate.
pub fn mountain_pass(
    spec: &ProblemSpec,
    z0: &LoopPath,
    z1: &LoopPath,
    set: &ConstraintSet,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    opts.validate()?;
    let cert = separation_check(z0, z1, set, spec)?;
    if !cert.separated {
        return Err(Error::Collapse(format!(
            "endpoints are not separated by the chosen set: value at z0 = {}, at z1 = {}, threshold = {}",
            cert.at_z0, cert.at_z1, cert.threshold
        )));
    }
    let m = opts.path_points;
    let step_dir = z1.sub(z0)?;
    let mut path = Vec::with_capacity(m + 1);
    for j in 0..=m {
        let p = z0.axpy(j as f64 / m as f64, &step_dir)?;
        path.push(if j == 0 || j == m { p } else { project_symmetric(&p, spec.symmetry)? });
    }
    let endpoint_level = f_value(z0, spec)?.max(f_value(z1, spec)?);
    let collapse_tol = 1e-10 * (1.0 + endpoint_level.abs());
    let mut values = evaluate(&path, spec)?;
    let mut peak = path_peak(&path, &values, spec)?;
    let mut trace = CpsTrace::new();
    let mut levels = Vec::new();
    let mut max_drift: f64 = 0.0;
    let mut step: f64 = 1.0;

    let finish = |solution: LoopPath, value, termination, trace, iterations, levels, drift, message| SolveReport {
        route: Route::MountainPass,
        solution,
        f_value: value,
        termination,
        trace,
        iterations,
        levels,
        max_symmetry_drift: drift,
        endpoints: Some((z0.clone(), z1.clone())),
        message,
    };

    for sweep in 0..opts.max_iterations {
        let gamma = peak.value;
        if gamma <= endpoint_level + collapse_tol {
            return Err(Error::Collapse(format!(
                "max f along path {gamma} does not exceed endpoint level {endpoint_level}"
            )));
        }
        levels.push(gamma);

        let near = if peak.sigma < 0.5 { peak.segment } else { peak.segment + 1 };
        let top = if near == 0 {
            1
        } else if near == m {
            m - 1
        } else {
            near
        };
        let x = on_segment(&path, peak.segment, peak.sigma)?;
        let (x, drift) = project_with_drift(&x, spec.symmetry)?;
        max_drift = max_drift.max(drift);
        let (fx, gx) = f_value_and_gradient(&x, spec)?;
        let weighted = trace.append_with_gradient(&x, fx, &gx, spec, set)?.weighted_gradient;
        if weighted <= opts.gradient_tolerance {
            return Ok(finish(
                x,
                fx,
                Termination::Converged,
                trace,
                sweep,
                levels,
                max_drift,
                format!("weighted gradient {weighted:.3e} at the top of the path"),
            ));
        }
        let (dir, drift) = project_with_drift(&preconditioned(&gx).scaled(-1.0), spec.symmetry)?;
        max_drift = max_drift.max(drift);
        let slope = gx.dot(&dir);
        let mut alpha = (2.0 * step).min(1e6);
        let moved = loop {
            let mut trial = path.clone();
            trial[top] = x.axpy(alpha, &dir)?;
            let ft = f_value(&trial[top], spec)?;
            if ft <= fx + opts.armijo * alpha * slope {
                let mut trial_values = values.clone();
                trial_values[top] = ft;
                // A step that opens a gap over the ridge raises the level.
                let trial_peak = path_peak(&trial, &trial_values, spec)?;
                if trial_peak.value <= gamma {
                    break Some((trial, trial_values, trial_peak));
                }
            }
            alpha *= opts.step_shrink;
            if alpha < 1e-16 {
                break None;
            }
        };
        let Some((trial, trial_values, trial_peak)) = moved else {
            return Ok(finish(
                x,
                fx,
                Termination::MaxIter,
                trace,
                sweep,
                levels,
                max_drift,
                format!("line search stalled at path node {top}; weighted gradient {weighted:.3e}"),
            ));
        };
        step = alpha;
        path = trial;
        values = trial_values;
        peak = trial_peak;

        let respaced = equidistribute(&path)?;
        let respaced_values = evaluate(&respaced, spec)?;
        let respaced_peak = path_peak(&respaced, &respaced_values, spec)?;
        if respaced_peak.value <= peak.value {
            path = respaced;
            values = respaced_values;
            peak = respaced_peak;
        }
    }
    let x = on_segment(&path, peak.segment, peak.sigma)?;
    Ok(finish(
        x,
        peak.value,
        Termination::MaxIter,
        trace,
        opts.max_iterations,
        levels,
        max_drift,
        format!("reached {} sweeps", opts.max_iterations),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loopspace::SymmetryClass;
    use crate::potentials::PotentialModel;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn harmonic() -> ProblemSpec {
        let p = PotentialModel::power_law(0.5, 2.0, 0.0, 2).unwrap();
        ProblemSpec::new(p, 1.0, 2.0, 0.0, SymmetryClass::E1).unwrap()
    }

    #[test]
    fn endpoint_examples() {
        let circle = LoopPath::circle(64, 2).unwrap();
        let z = build_endpoint(&harmonic(), &circle).unwrap();
        assert_relative_eq!(z.max_abs(), 2.0 * circle.max_abs());
        assert!(f_value(&z, &harmonic()).unwrap() <= 0.0);

        let p = PotentialModel::power_law(0.25, 4.0, 0.0, 2).unwrap();
        let quartic = ProblemSpec::new(p, 0.75, 4.0, 0.0, SymmetryClass::E1).unwrap();
        let z = build_endpoint(&quartic, &circle).unwrap();
        assert_relative_eq!(z.max_abs(), 2.0 * circle.max_abs());

        let mut through = circle.clone();
        through.node_mut(5).fill(0.0);
        assert_eq!(build_endpoint(&harmonic(), &through), Err(Error::BaseThroughOrigin(5)));
    }

    #[test]
    fn endpoint_b3_failure() {
        let p = crate::potentials::parse_potential("1 - exp(-|q|^2)", 2).unwrap();
        let spec = ProblemSpec::new(p, 2.0, 2.0, 0.0, SymmetryClass::None).unwrap();
        let circle = LoopPath::circle(16, 2).unwrap();
        assert_eq!(build_endpoint(&spec, &circle), Err(Error::B3Fail));
    }

    #[test]
    fn separation_examples() {
        let spec = harmonic();
        let zero = LoopPath::zeros(64, 2).unwrap();
        let big = LoopPath::circle(64, 2).unwrap().scaled(2.0);
        let c = separation_check(&zero, &big, &ConstraintSet::Nehari, &spec).unwrap();
        assert!(c.separated);
        assert_relative_eq!(c.at_z1, 4.0, epsilon = 1e-12);
        assert!(!separation_check(&big, &big, &ConstraintSet::Nehari, &spec).unwrap().separated);
        let far = ConstraintSet::GradientSphere { radius: 10.0 };
        let c = separation_check(&zero, &LoopPath::circle(64, 2).unwrap(), &far, &spec).unwrap();
        assert!(!c.separated);
        assert!(c.at_z1 < 10.0);
    }

    #[test]
    fn harmonic_pass_from_circle_endpoint() {
        let spec = harmonic();
        let circle = LoopPath::circle(128, 2).unwrap();
        let z0 = LoopPath::zeros(128, 2).unwrap();
        let z1 = build_endpoint(&spec, &circle).unwrap();
        let set = ConstraintSet::GradientSphere { radius: 0.5 * velocity_l2(&circle) };
        let report = mountain_pass(&spec, &z0, &z1, &set, &SolveOptions::default()).unwrap();
        assert!(report.converged(), "{}", report.message);
        assert!((report.f_value - PI * PI).abs() < 1e-2 * PI * PI);
    }

    #[test]
    fn harmonic_pass_from_perturbed_endpoint() {
        let spec = harmonic();
        let base = LoopPath::from_fn(64, 2, |t, o| {
            let w = 2.0 * PI * t;
            o[0] = w.cos() + 0.3 * (3.0 * w).cos();
            o[1] = w.sin() - 0.2 * (3.0 * w).sin();
        })
        .unwrap();
        let z0 = LoopPath::zeros(64, 2).unwrap();
        let z1 = build_endpoint(&spec, &base).unwrap();
        let set = ConstraintSet::GradientSphere { radius: 2.0 };
        let opts = SolveOptions { gradient_tolerance: 1e-4, ..SolveOptions::default() };
        let report = mountain_pass(&spec, &z0, &z1, &set, &opts).unwrap();
        assert!(report.converged(), "{}", report.message);
        for w in report.levels.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(*report.levels.last().unwrap() >= 0.0);
        assert!((report.f_value - PI * PI).abs() < 1e-1, "level {}", report.f_value);
    }

    #[test]
    fn unseparated_endpoints_are_rejected() {
        let spec = harmonic();
        let circle = LoopPath::circle(64, 2).unwrap();
        let z0 = LoopPath::zeros(64, 2).unwrap();
        let z1 = build_endpoint(&spec, &circle).unwrap();
        let set = ConstraintSet::GradientSphere { radius: 100.0 };
        assert!(matches!(mountain_pass(&spec, &z0, &z1, &set, &SolveOptions::default()), Err(Error::Collapse(_))));
    }
}
