//! Physical orbits from critical loops, and their independent verification.
//!
//! A unit-period loop `u` with `A(u), B(u) > 0` is rescaled to period
//! `T = sqrt(A / B)` and checked with central differences (a different
//! scheme from the solver's forward differences) and by re-integrating the
//! equations of motion over one period.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::{f_value, potential_gap, ProblemSpec};
use crate::loopspace::{dot, kinetic_half, norm, velocity_l2, LoopPath};
use crate::potentials::PotentialModel;

/// `||u'||_{L^2}` below which a loop counts as constant.
pub const NONCONSTANT_THRESHOLD: f64 = 1e-6;
/// Integrator steps per grid node in the closure test.
pub const STEPS_PER_NODE: usize = 8;
const BLOWUP_NORM: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitResult {
    pub period: f64,
    /// `t_k = k T / N`.
    pub times: Vec<f64>,
    #[serde(skip)]
    pub samples: LoopPath,
    pub f_value: f64,
    pub ode_sup: f64,
    pub energy_sup: f64,
    pub closure: f64,
    pub nonconstant: bool,
}

/// `T = sqrt(A(u) / B(u))`.
pub fn period_from(u: &LoopPath, spec: &ProblemSpec) -> Result<f64> {
    let kinetic = kinetic_half(u);
    let gap = potential_gap(u, spec)?;
    if kinetic <= 0.0 || gap <= 0.0 {
        return Err(Error::Nonpositive { kinetic, potential_gap: gap });
    }
    Ok((kinetic / gap).sqrt())
}

/// Sup-norm ODE and energy residuals of samples `q_k = q(kT/N)`.
///
/// Uses the periodic central second difference for `q''` and the centred
/// first difference for `q'`.
pub fn orbit_residuals(q: &LoopPath, period: f64, p: &PotentialModel, h: f64) -> Result<(f64, f64)> {
    let n = q.len();
    let dt = period / n as f64;
    let mut ode_sup: f64 = 0.0;
    let mut energy_sup: f64 = 0.0;
    for k in 0..n {
        let (prev, here, next) = (q.node(k + n - 1), q.node(k), q.node(k + 1));
        let (v, grad) = p.value_and_grad(here)?;
        let mut accel_defect = 0.0;
        let mut speed2 = 0.0;
        for c in 0..q.dim() {
            let acc = (next[c] - 2.0 * here[c] + prev[c]) / (dt * dt);
            accel_defect += (acc + grad[c]) * (acc + grad[c]);
            let vel = (next[c] - prev[c]) / (2.0 * dt);
            speed2 += vel * vel;
        }
        ode_sup = ode_sup.max(accel_defect.sqrt());
        energy_sup = energy_sup.max((0.5 * speed2 + v - h).abs());
    }
    Ok((ode_sup, energy_sup))
}

/// Centred-difference velocity at `t = 0`.
pub fn initial_velocity(q: &LoopPath, period: f64) -> Vec<f64> {
    let n = q.len();
    let dt = period / n as f64;
    q.node(1).iter().zip(q.node(n - 1)).map(|(a, b)| (a - b) / (2.0 * dt)).collect()
}

/// Periodicity gap `|q(T) - q0| + |q'(T) - v0|` after integrating
/// `q'' = -grad V(q)` with classical RK4 over `steps` steps.
pub fn integrate_check(q0: &[f64], v0: &[f64], period: f64, p: &PotentialModel, steps: usize) -> Result<f64> {
    if !(period > 0.0) || steps == 0 {
        return Err(Error::InvalidOptions(format!(
            "integrate_check needs T > 0 and steps > 0 (T = {period}, steps = {steps})"
        )));
    }
    let dim = q0.len();
    let dt = period / steps as f64;
    let mut q = q0.to_vec();
    let mut v = v0.to_vec();
    let accel = |x: &[f64]| -> Result<Vec<f64>> { Ok(p.eval_grad(x)?.into_iter().map(|g| -g).collect()) };
    let shifted = |x: &[f64], d: &[f64], s: f64| -> Vec<f64> { x.iter().zip(d).map(|(a, b)| a + s * b).collect() };
    for _ in 0..steps {
        let k1q = v.clone();
        let k1v = accel(&q)?;
        let k2q = shifted(&v, &k1v, 0.5 * dt);
        let k2v = accel(&shifted(&q, &k1q, 0.5 * dt))?;
        let k3q = shifted(&v, &k2v, 0.5 * dt);
        let k3v = accel(&shifted(&q, &k2q, 0.5 * dt))?;
        let k4q = shifted(&v, &k3v, dt);
        let k4v = accel(&shifted(&q, &k3q, dt))?;
        for c in 0..dim {
            q[c] += dt / 6.0 * (k1q[c] + 2.0 * k2q[c] + 2.0 * k3q[c] + k4q[c]);
            v[c] += dt / 6.0 * (k1v[c] + 2.0 * k2v[c] + 2.0 * k3v[c] + k4v[c]);
        }
        let state = (dot(&q, &q) + dot(&v, &v)).sqrt();
        if !(state <= BLOWUP_NORM) {
            return Err(Error::Blowup(state));
        }
    }
    let dq: Vec<f64> = q.iter().zip(q0).map(|(a, b)| a - b).collect();
    let dv: Vec<f64> = v.iter().zip(v0).map(|(a, b)| a - b).collect();
    Ok(norm(&dq) + norm(&dv))
}

/// Verifies an orbit given only its samples and period.
pub fn verify_samples(q: &LoopPath, period: f64, p: &PotentialModel, h: f64) -> Result<(f64, f64, f64)> {
    let (ode_sup, energy_sup) = orbit_residuals(q, period, p, h)?;
    let v0 = initial_velocity(q, period);
    let closure = integrate_check(q.node(0), &v0, period, p, STEPS_PER_NODE * q.len())?;
    Ok((ode_sup, energy_sup, closure))
}

/// Builds `q(t) = u(t / T)` and its residuals.
pub fn synthesize(u: &LoopPath, spec: &ProblemSpec) -> Result<OrbitResult> {
    let period = period_from(u, spec)?;
    let n = u.len();
    let (ode_sup, energy_sup, closure) = verify_samples(u, period, &spec.potential, spec.h)?;
    Ok(OrbitResult {
        period,
        times: (0..n).map(|k| k as f64 * period / n as f64).collect(),
        samples: u.clone(),
        f_value: f_value(u, spec)?,
        ode_sup,
        energy_sup,
        closure,
        nonconstant: velocity_l2(u) >= NONCONSTANT_THRESHOLD,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::scaling_root;
    use crate::loopspace::SymmetryClass;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn harmonic() -> ProblemSpec {
        let p = PotentialModel::power_law(0.5, 2.0, 0.0, 2).unwrap();
        ProblemSpec::new(p, 1.0, 2.0, 0.0, SymmetryClass::E1).unwrap()
    }

    fn quartic() -> ProblemSpec {
        let p = PotentialModel::power_law(0.25, 4.0, 0.0, 2).unwrap();
        ProblemSpec::new(p, 0.75, 4.0, 0.0, SymmetryClass::E1).unwrap()
    }

    #[test]
    fn period_examples() {
        let circle = LoopPath::circle(256, 2).unwrap();
        let t = period_from(&circle, &harmonic()).unwrap();
        assert!((t - 2.0 * PI).abs() / (2.0 * PI) < 1e-3);
        let t = period_from(&circle, &quartic()).unwrap();
        assert!((t - 2.0 * PI).abs() / (2.0 * PI) < 1e-3);
        let c = LoopPath::constant(16, &[0.1, 0.0]).unwrap();
        assert!(matches!(period_from(&c, &harmonic()), Err(Error::Nonpositive { .. })));
    }

    #[test]
    fn action_balance_holds_at_returned_period() {
        let u = LoopPath::random_bandlimited(64, 2, 8, SymmetryClass::E1).unwrap().scaled(0.2);
        let spec = harmonic();
        let t = period_from(&u, &spec).unwrap();
        assert_relative_eq!(kinetic_half(&u) / (t * t), potential_gap(&u, &spec).unwrap(), max_relative = 1e-14);
    }

    #[test]
    fn circle_orbits_verify() {
        for spec in [harmonic(), quartic()] {
            let o = synthesize(&LoopPath::circle(256, 2).unwrap(), &spec).unwrap();
            assert!(o.ode_sup <= 1e-3 && o.energy_sup <= 1e-3, "{o:?}");
            assert!(o.closure <= 1e-3 * o.period);
            assert!(o.nonconstant);
            // Cross-oracle agreement between residuals and closure.
            let defect = o.ode_sup.max(o.energy_sup);
            assert!(o.closure <= 10.0 * defect * o.period);
        }
    }

    #[test]
    fn impostor_loop_is_rejected() {
        // Third-harmonic distortion, rescaled onto the constraint set; the
        // x-component defect is a (1 - 4 / 10.4) with a = 1 / sqrt(0.625).
        let spec = harmonic();
        let raw = LoopPath::from_fn(256, 2, |t, o| {
            o[0] = (2.0 * PI * t).cos();
            o[1] = 0.5 * (6.0 * PI * t).sin();
        })
        .unwrap();
        let u = raw.scaled(scaling_root(&raw, &spec).unwrap());
        let o = synthesize(&u, &spec).unwrap();
        assert!(o.ode_sup >= 0.1, "{}", o.ode_sup);
        let predicted = (1.0f64 / 0.625).sqrt() * (1.0 - 4.0 / 10.4);
        assert!(o.ode_sup >= 0.9 * predicted);
    }

    #[test]
    fn residuals_converge_at_second_order() {
        let p = PotentialModel::power_law(0.5, 2.0, 0.0, 2).unwrap();
        let res = |n| orbit_residuals(&LoopPath::circle(n, 2).unwrap(), 2.0 * PI, &p, 1.0).unwrap();
        for n in [64, 128, 256] {
            let (o1, e1) = res(n);
            let (o2, e2) = res(2 * n);
            assert!((3.5..=4.5).contains(&(o1 / o2)), "ode ratio {}", o1 / o2);
            assert!((3.5..=4.5).contains(&(e1 / e2)), "energy ratio {}", e1 / e2);
        }
    }

    #[test]
    fn integrator_examples() {
        let p = PotentialModel::power_law(0.5, 2.0, 0.0, 2).unwrap();
        let c = integrate_check(&[1.0, 0.0], &[0.0, 1.0], 2.0 * PI, &p, 2048).unwrap();
        assert!(c <= 1e-6, "{c}");
        let c = integrate_check(&[1.0, 0.0], &[0.0, 1.0], PI, &p, 2048).unwrap();
        assert_relative_eq!(c, 4.0, epsilon = 1e-6);
        let c = integrate_check(&[0.0, 0.0], &[0.0, 0.0], 1.0, &p, 16).unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn integrator_blowup() {
        let p = crate::potentials::parse_potential("-q1^4", 1).unwrap();
        assert!(matches!(integrate_check(&[1.0], &[10.0], 50.0, &p, 1000), Err(Error::Blowup(_))));
    }
}
