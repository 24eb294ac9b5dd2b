//! Sampling-based checks of the structural hypotheses (B1)–(B5).
//!
//! A `pass` verdict means no counterexample was found among the samples.
//! Each sample draws from its own ChaCha stream keyed by (hypothesis, index),
//! so results do not depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::Serialize;

use super::PotentialModel;
use crate::error::{Error, Result};
use crate::loopspace::{self, dot, norm, LoopPath, SymmetryClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Hypothesis {
    B1,
    B2,
    B3,
    B4,
    B5,
}

impl Hypothesis {
    fn stream(self) -> u64 {
        (self as u64 + 1) << 40
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Witness {
    Point(Vec<f64>),
    Loop(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub hypothesis: Hypothesis,
    pub verdict: Verdict,
    /// Sample attaining the worst residual.
    pub worst_witness: Option<Witness>,
    /// Residual at the worst sample; its meaning depends on the hypothesis.
    pub residual: f64,
    pub samples_used: usize,
    pub tolerance: f64,
    /// Empirical threshold radius for (B3).
    pub threshold_radius: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    /// Point samples for (B1), (B2), (B4).
    pub samples: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub seed: u64,
    /// Slack for the inequalities (B1), (B2), (B5); larger is looser.
    pub tol: f64,
    /// Lower bound for `|3 V'(q).q + V''(q)q.q| / (1 + |q|^mu1)` in (B4);
    /// smaller is looser.
    pub nonzero_tol: f64,
    /// Radii on the (B3) grid over `[r_min, r_max]`.
    pub radial_steps: usize,
    /// Directions per sphere for (B3).
    pub sphere_samples: usize,
    /// Gradient-sphere radius `r` for (B5).
    pub b5_radius: f64,
    pub b5_loops: usize,
    pub b5_nodes: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            samples: 2000,
            r_min: 0.05,
            r_max: 10.0,
            seed: 0,
            tol: 1e-9,
            nonzero_tol: 1e-9,
            radial_steps: 400,
            sphere_samples: 64,
            b5_radius: 1.0,
            b5_loops: 200,
            b5_nodes: 64,
        }
    }
}

impl SamplerConfig {
    fn validate(&self) -> Result<()> {
        let ok = self.samples > 0
            && self.r_min > 0.0
            && self.r_max > self.r_min
            && self.tol >= 0.0
            && self.nonzero_tol >= 0.0
            && self.radial_steps >= 2
            && self.sphere_samples > 0
            && self.b5_radius > 0.0
            && self.b5_loops > 0
            && self.b5_nodes >= loopspace::MIN_NODES;
        if !ok {
            return Err(Error::InvalidOptions(format!("bad sampler config {self:?}")));
        }
        Ok(())
    }

    fn rng(&self, h: Hypothesis, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(h.stream() | index as u64);
        rng
    }

    fn direction(&self, rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
            let r = norm(&v);
            if r > 1e-12 {
                return v.into_iter().map(|x| x / r).collect();
            }
        }
    }

    fn point(&self, h: Hypothesis, index: usize, dim: usize) -> Vec<f64> {
        let mut rng = self.rng(h, index);
        let dir = self.direction(&mut rng, dim);
        let radius = Uniform::new_inclusive(self.r_min, self.r_max).expect("validated radius range").sample(&mut rng);
        dir.into_iter().map(|x| x * radius).collect()
    }
}

fn at_sample<T>(r: Result<T>, q: &[f64]) -> Result<T> {
    r.map_err(|e| match e {
        Error::Domain(msg) => Error::Domain(format!("{msg} (sample q = {q:?})")),
        other => other,
    })
}

/// Runs the five hypothesis checkers for `p` at energy `h`.
pub fn check_hypotheses(
    p: &PotentialModel,
    h: f64,
    mu1: f64,
    mu2: f64,
    cfg: &SamplerConfig,
) -> Result<Vec<HypothesisReport>> {
    cfg.validate()?;
    Ok(vec![
        check_b1(p, cfg)?,
        check_b2(p, mu1, mu2, cfg)?,
        check_b3(p, h, cfg)?,
        check_b4(p, mu1, cfg)?,
        check_b5(p, h, cfg)?,
    ])
}

fn check_b1(p: &PotentialModel, cfg: &SamplerConfig) -> Result<HypothesisReport> {
    let mut worst = (f64::NEG_INFINITY, Vec::new());
    for i in 0..cfg.samples {
        let q = cfg.point(Hypothesis::B1, i, p.dim());
        let neg: Vec<f64> = q.iter().map(|x| -x).collect();
        let r = (at_sample(p.value(&q), &q)? - at_sample(p.value(&neg), &neg)?).abs();
        if r > worst.0 {
            worst = (r, q);
        }
    }
    let verdict = if worst.0 <= cfg.tol { Verdict::Pass } else { Verdict::Fail };
    Ok(HypothesisReport {
        hypothesis: Hypothesis::B1,
        verdict,
        worst_witness: Some(Witness::Point(worst.1)),
        residual: worst.0,
        samples_used: cfg.samples,
        tolerance: cfg.tol,
        threshold_radius: None,
        detail: "max |V(q) - V(-q)|".into(),
    })
}

fn check_b2(p: &PotentialModel, mu1: f64, mu2: f64, cfg: &SamplerConfig) -> Result<HypothesisReport> {
    // Residual is relative to the magnitude of mu1 V so large-radius rounding
    // does not register as a violation.
    let mut worst = (f64::INFINITY, Vec::new());
    let mut violated = false;
    for i in 0..cfg.samples {
        let q = cfg.point(Hypothesis::B2, i, p.dim());
        let (v, g) = at_sample(p.value_and_grad(&q), &q)?;
        let r = (dot(&g, &q) - mu1 * v + mu2) / (1.0 + (mu1 * v).abs());
        violated |= r < -cfg.tol;
        if r < worst.0 {
            worst = (r, q);
        }
    }
    Ok(HypothesisReport {
        hypothesis: Hypothesis::B2,
        verdict: if violated { Verdict::Fail } else { Verdict::Pass },
        worst_witness: Some(Witness::Point(worst.1)),
        residual: worst.0,
        samples_used: cfg.samples,
        tolerance: cfg.tol,
        threshold_radius: None,
        detail: "min (V'(q).q - mu1 V(q) + mu2) / (1 + |mu1 V(q)|)".into(),
    })
}

fn check_b3(p: &PotentialModel, h: f64, cfg: &SamplerConfig) -> Result<HypothesisReport> {
    let steps = cfg.radial_steps;
    let dirs: Vec<Vec<f64>> =
        (0..cfg.sphere_samples).map(|j| cfg.direction(&mut cfg.rng(Hypothesis::B3, j), p.dim())).collect();
    // (radius, min V on the sphere, argmin)
    let mut spheres = Vec::with_capacity(steps);
    for i in 0..steps {
        let radius = cfg.r_min + (cfg.r_max - cfg.r_min) * i as f64 / (steps - 1) as f64;
        let mut best = (f64::INFINITY, Vec::new());
        for d in &dirs {
            let q: Vec<f64> = d.iter().map(|x| x * radius).collect();
            let v = at_sample(p.value(&q), &q)?;
            if v < best.0 {
                best = (v, q);
            }
        }
        spheres.push((radius, best.0, best.1));
    }
    let samples_used = steps * dirs.len();
    let mut threshold = None;
    for (idx, s) in spheres.iter().enumerate().rev() {
        if s.1 >= h {
            threshold = Some(idx);
        } else {
            break;
        }
    }
    let report = match threshold {
        Some(idx) => {
            let (radius, v, q) = &spheres[idx];
            HypothesisReport {
                hypothesis: Hypothesis::B3,
                verdict: Verdict::Pass,
                worst_witness: Some(Witness::Point(q.clone())),
                residual: v - h,
                samples_used,
                tolerance: 0.0,
                threshold_radius: Some(*radius),
                detail: format!("min V >= h on every sampled sphere of radius >= {radius}"),
            }
        }
        None => {
            let (radius, v, q) = spheres.last().expect("radial_steps >= 2");
            HypothesisReport {
                hypothesis: Hypothesis::B3,
                verdict: Verdict::Fail,
                worst_witness: Some(Witness::Point(q.clone())),
                residual: v - h,
                samples_used,
                tolerance: 0.0,
                threshold_radius: None,
                detail: format!("min V < h on the sphere of radius r_max = {radius}"),
            }
        }
    };
    Ok(report)
}

fn check_b4(p: &PotentialModel, mu1: f64, cfg: &SamplerConfig) -> Result<HypothesisReport> {
    let mut worst = (f64::INFINITY, 0.0, Vec::new());
    let (mut positive, mut negative) = (false, false);
    for i in 0..cfg.samples {
        let q = cfg.point(Hypothesis::B4, i, p.dim());
        let g = at_sample(p.eval_grad(&q), &q)?;
        let value = 3.0 * dot(&g, &q) + at_sample(p.second_radial(&q), &q)?;
        positive |= value > 0.0;
        negative |= value < 0.0;
        let ratio = value.abs() / (1.0 + norm(&q).powf(mu1));
        if ratio < worst.0 {
            worst = (ratio, value, q);
        }
    }
    // On a connected punctured space a sign change forces a zero.
    let sign_change = positive && negative && p.dim() >= 2;
    let verdict = if worst.0 < cfg.nonzero_tol || sign_change { Verdict::Fail } else { Verdict::Pass };
    let detail = if sign_change {
        "3V'(q).q + V''(q)q.q changes sign across samples".to_string()
    } else {
        "min |3V'(q).q + V''(q)q.q| / (1 + |q|^mu1)".to_string()
    };
    Ok(HypothesisReport {
        hypothesis: Hypothesis::B4,
        verdict,
        worst_witness: Some(Witness::Point(worst.2)),
        residual: worst.1,
        samples_used: cfg.samples,
        tolerance: cfg.nonzero_tol,
        threshold_radius: None,
        detail,
    })
}

fn check_b5(p: &PotentialModel, h: f64, cfg: &SamplerConfig) -> Result<HypothesisReport> {
    // Zero-mean band-limited loops: translated loops drive the infimum to
    // -inf whenever (B3) holds, so the check is taken on the mean-zero slice.
    let mut worst = (f64::INFINITY, None);
    for i in 0..cfg.b5_loops {
        let seed = cfg.seed ^ (Hypothesis::B5.stream() | i as u64);
        let raw = LoopPath::random_bandlimited(cfg.b5_nodes, p.dim(), seed, SymmetryClass::None)?;
        let speed = loopspace::velocity_l2(&raw);
        if speed == 0.0 {
            continue;
        }
        let u = raw.scaled(cfg.b5_radius / speed);
        let mut gap = Vec::with_capacity(u.len());
        for node in u.nodes() {
            gap.push(h - at_sample(p.value(node), node)?);
        }
        let value = loopspace::integrate(&gap);
        if value < worst.0 {
            worst = (value, Some(u));
        }
    }
    let verdict = if worst.0 > cfg.tol {
        Verdict::Pass
    } else if worst.0 < -cfg.tol {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    };
    Ok(HypothesisReport {
        hypothesis: Hypothesis::B5,
        verdict,
        worst_witness: worst.1.map(|u| Witness::Loop(u.to_nested())),
        residual: worst.0,
        samples_used: cfg.b5_loops,
        tolerance: cfg.tol,
        threshold_radius: None,
        detail: format!("min over sampled zero-mean loops with ||u'|| = {} of int (h - V(u))", cfg.b5_radius),
    })
}
