//! The `check`, `solve` and `verify` commands.
//!
//! Exit codes: 0 success, 1 method failure (hypothesis fails, no
//! convergence, residual gates missed, collapse), 2 usage or config error.

use std::io::Write;
use std::path::Path;

use anyhow::Context;
use hamloop::{
    loopspace::velocity_l2,
    orbit::{synthesize, verify_samples},
    potentials::{check_hypotheses, Verdict, Witness},
    solvers::{build_endpoint, minimize_on_f, mountain_pass, separation_check, SeparationCertificate},
    ConstraintSet, CpsTrace, HypothesisReport, LoopPath, OrbitResult, Route, SolveReport, Termination,
};
use serde::Serialize;

use crate::config::{Gates, RunConfig, Separation, SpecEcho};
use crate::table;

pub const REPORT_SCHEMA: &str = "hamloop-report/1";

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config, input file or output path.
    Usage(anyhow::Error),
    /// The method itself failed.
    Method(anyhow::Error),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Method(_) => 1,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            CliError::Usage(e) | CliError::Method(e) => e,
        }
    }
}

fn usage(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Usage(e.into())
}

fn timestamp(enabled: bool) -> Option<u64> {
    enabled
        .then(|| std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(usage)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display())).map_err(usage)
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub schema: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp_unix: Option<u64>,
    pub spec: SpecEcho,
    pub hypotheses: Vec<HypothesisReport>,
    pub passed: bool,
}

/// Runs the hypothesis checkers; exit 0 iff nothing failed.
pub fn cmd_check(cfg: &RunConfig, with_timestamp: bool, out: &mut impl Write) -> Result<i32, CliError> {
    let spec = &cfg.spec;
    let reports = check_hypotheses(&spec.potential, spec.h, spec.mu1, spec.mu2, &cfg.sampler)
        .map_err(|e| CliError::Method(e.into()))?;
    let mut failed = false;
    for r in &reports {
        let verdict = match r.verdict {
            Verdict::Pass => "pass",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "inconclusive",
        };
        let witness = match &r.worst_witness {
            Some(Witness::Point(q)) => format!("{q:?}"),
            Some(Witness::Loop(u)) => format!("loop of {} nodes", u.len()),
            None => "-".to_string(),
        };
        writeln!(out, "{:?} {verdict:<12} residual={:.6e} witness={witness} ({})", r.hypothesis, r.residual, r.detail)
            .map_err(usage)?;
        if r.verdict == Verdict::Inconclusive {
            eprintln!("warning: {:?} is inconclusive: {}", r.hypothesis, r.detail);
        }
        failed |= r.verdict == Verdict::Fail;
    }
    if let Some(path) = &cfg.report {
        let report = CheckReport {
            schema: REPORT_SCHEMA,
            timestamp_unix: timestamp(with_timestamp),
            spec: cfg.echo(),
            hypotheses: reports,
            passed: !failed,
        };
        write_json(path, &report)?;
    }
    Ok(if failed { 1 } else { 0 })
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp_unix: Option<u64>,
    pub spec: SpecEcho,
    pub route: Route,
    pub termination: Option<Termination>,
    pub message: String,
    pub iterations: Option<usize>,
    pub f_star: Option<f64>,
    pub period: Option<f64>,
    pub ode_sup: Option<f64>,
    pub energy_sup: Option<f64>,
    pub closure: Option<f64>,
    pub nonconstant: Option<bool>,
    pub velocity_l2: Option<f64>,
    pub max_symmetry_drift: Option<f64>,
    /// Mountain-pass level estimates per sweep.
    pub gamma: Vec<f64>,
    pub separation: Option<SeparationCertificate>,
    pub passed: bool,
    pub error: Option<String>,
    pub cps_trace: CpsTrace,
}

/// Everything a solve produced, before anything is written.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub report: RunReport,
    pub solution: Option<SolveReport>,
    pub orbit: Option<OrbitResult>,
}

impl SolveOutcome {
    pub fn passed(&self) -> bool {
        self.report.passed
    }
}

fn gates_pass(orbit: &OrbitResult, gates: &Gates) -> bool {
    orbit.nonconstant
        && orbit.ode_sup <= gates.ode_tol
        && orbit.energy_sup <= gates.energy_tol
        && orbit.closure <= gates.closure_tol * orbit.period
}

fn run_route(cfg: &RunConfig) -> hamloop::Result<(SolveReport, Option<SeparationCertificate>)> {
    let spec = &cfg.spec;
    match cfg.route {
        Route::ConstrainedMin => Ok((minimize_on_f(spec, &cfg.solver)?, None)),
        Route::MountainPass => {
            let z0 = LoopPath::zeros(cfg.nodes, spec.dim())?;
            let z1 = build_endpoint(spec, &LoopPath::circle(cfg.nodes, spec.dim())?)?;
            let set = match cfg.separation.unwrap_or(Separation::Nehari) {
                Separation::Sphere { radius } => ConstraintSet::GradientSphere { radius },
                Separation::Nehari => ConstraintSet::Nehari,
            };
            let cert = separation_check(&z0, &z1, &set, spec)?;
            Ok((mountain_pass(spec, &z0, &z1, &set, &cfg.solver)?, Some(cert)))
        }
    }
}

/// Runs the configured route and synthesizes the orbit. Method failures
/// are recorded in the report rather than returned.
pub fn solve(cfg: &RunConfig, with_timestamp: bool) -> SolveOutcome {
    let mut report = RunReport {
        schema: REPORT_SCHEMA,
        timestamp_unix: timestamp(with_timestamp),
        spec: cfg.echo(),
        route: cfg.route,
        termination: None,
        message: String::new(),
        iterations: None,
        f_star: None,
        period: None,
        ode_sup: None,
        energy_sup: None,
        closure: None,
        nonconstant: None,
        velocity_l2: None,
        max_symmetry_drift: None,
        gamma: Vec::new(),
        separation: None,
        passed: false,
        error: None,
        cps_trace: CpsTrace::new(),
    };
    let (solved, cert) = match run_route(cfg) {
        Ok(r) => r,
        Err(e) => {
            report.error = Some(e.to_string());
            return SolveOutcome { report, solution: None, orbit: None };
        }
    };
    report.termination = Some(solved.termination);
    report.message = solved.message.clone();
    report.iterations = Some(solved.iterations);
    report.f_star = Some(solved.f_value);
    report.velocity_l2 = Some(velocity_l2(&solved.solution));
    report.max_symmetry_drift = Some(solved.max_symmetry_drift);
    report.gamma = solved.gamma().to_vec();
    report.separation = cert;
    report.cps_trace = solved.trace.clone();
    let orbit = match synthesize(&solved.solution, &cfg.spec) {
        Ok(o) => o,
        Err(e) => {
            report.error = Some(format!("orbit synthesis failed: {e}"));
            return SolveOutcome { report, solution: Some(solved), orbit: None };
        }
    };
    report.period = Some(orbit.period);
    report.ode_sup = Some(orbit.ode_sup);
    report.energy_sup = Some(orbit.energy_sup);
    report.closure = Some(orbit.closure);
    report.nonconstant = Some(orbit.nonconstant);
    report.passed = solved.converged() && gates_pass(&orbit, &cfg.gates);
    SolveOutcome { report, solution: Some(solved), orbit: Some(orbit) }
}

/// Solves, writes the report and orbit table, exit 0 iff all gates pass.
pub fn cmd_solve(cfg: &RunConfig, with_timestamp: bool, out: &mut impl Write) -> Result<i32, CliError> {
    let outcome = solve(cfg, with_timestamp);
    let r = &outcome.report;
    if let Some(path) = &cfg.report {
        write_json(path, r)?;
    }
    if let (Some(path), Some(orbit)) = (&cfg.orbit, &outcome.orbit) {
        std::fs::write(path, table::render(&orbit.samples, orbit.period))
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(usage)?;
    }
    let show = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.12e}"));
    writeln!(
        out,
        "route={} termination={} f_star={} period={} ode_sup={} energy_sup={} closure={}",
        r.route.as_str(),
        r.termination.map_or("-", Termination::as_str),
        show(r.f_star),
        show(r.period),
        show(r.ode_sup),
        show(r.energy_sup),
        show(r.closure),
    )
    .map_err(usage)?;
    if let Some(e) = &r.error {
        return Err(CliError::Method(anyhow::anyhow!("{e}")));
    }
    if !r.passed {
        let why = if r.termination != Some(Termination::Converged) {
            format!("solver did not converge: {}", r.message)
        } else {
            "orbit failed the residual gates".to_string()
        };
        return Err(CliError::Method(anyhow::anyhow!(why)));
    }
    Ok(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verification {
    pub period: f64,
    pub nodes: usize,
    pub ode_sup: f64,
    pub energy_sup: f64,
    pub closure: f64,
    pub passed: bool,
}

/// Recomputes residuals from an orbit table alone.
pub fn verify_file(cfg: &RunConfig, path: &Path) -> Result<Verification, CliError> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display())).map_err(usage)?;
    let orbit = table::parse(&text).map_err(usage)?;
    if orbit.samples.dim() != cfg.spec.dim() {
        return Err(usage(anyhow::anyhow!(
            "orbit has {} coordinates but the potential is configured for n = {}",
            orbit.samples.dim(),
            cfg.spec.dim()
        )));
    }
    let (ode_sup, energy_sup, closure) = verify_samples(&orbit.samples, orbit.period, &cfg.spec.potential, cfg.spec.h)
        .map_err(|e| CliError::Method(e.into()))?;
    let g = &cfg.gates;
    Ok(Verification {
        period: orbit.period,
        nodes: orbit.samples.len(),
        ode_sup,
        energy_sup,
        closure,
        passed: ode_sup <= g.ode_tol && energy_sup <= g.energy_tol && closure <= g.closure_tol * orbit.period,
    })
}

pub fn cmd_verify(cfg: &RunConfig, path: &Path, out: &mut impl Write) -> Result<i32, CliError> {
    let v = verify_file(cfg, path)?;
    writeln!(
        out,
        "period={:.12e} nodes={} ode_sup={:.6e} energy_sup={:.6e} closure={:.6e} {}",
        v.period,
        v.nodes,
        v.ode_sup,
        v.energy_sup,
        v.closure,
        if v.passed { "pass" } else { "FAIL" }
    )
    .map_err(usage)?;
    Ok(if v.passed { 0 } else { 1 })
}
