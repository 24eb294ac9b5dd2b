//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use hamloop::functional::{f_gradient, f_value, scaling_root};
use hamloop::orbit::orbit_residuals;
use hamloop::potentials::{check_hypotheses, parse_potential, Hypothesis, Verdict};
use hamloop::{LoopPath, PotentialModel, ProblemSpec, SamplerConfig, SymmetryClass};
use hamloop_cli::commands::{solve, verify_file, SolveOutcome};
use hamloop_cli::config::{ConfigArgs, RunConfig};
use hamloop_cli::table;

type Check = Result<String, String>;

fn ensure(ok: bool, what: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what)
    }
}

fn config(args: ConfigArgs) -> RunConfig {
    RunConfig::resolve(&args).expect("valid acceptance config")
}

fn harmonic_args() -> ConfigArgs {
    ConfigArgs {
        potential: Some("power_law".into()),
        a: Some(0.5),
        mu1: Some(2.0),
        mu2: Some(0.0),
        h: Some(1.0),
        n: Some(2),
        symmetry: Some("e1".into()),
        nodes: Some(256),
        ..ConfigArgs::default()
    }
}

fn quartic_args() -> ConfigArgs {
    ConfigArgs { a: Some(0.25), mu1: Some(4.0), h: Some(0.75), ..harmonic_args() }
}

fn mountain_pass_args() -> ConfigArgs {
    ConfigArgs { route: Some("mountain_pass".into()), gradient_tolerance: Some(1e-4), ..harmonic_args() }
}

fn timed_solve(args: ConfigArgs) -> (SolveOutcome, Duration) {
    let cfg = config(args);
    let start = Instant::now();
    let outcome = solve(&cfg, false);
    (outcome, start.elapsed())
}

struct Gate {
    f_star: f64,
    period: f64,
}

/// Route converged and the orbit passes the residual gates of criterion 1.
fn gated(outcome: &SolveOutcome, period_tol: f64) -> Result<Gate, String> {
    let r = &outcome.report;
    if let Some(e) = &r.error {
        return Err(e.clone());
    }
    let sol = outcome.solution.as_ref().ok_or("no solution")?;
    ensure(sol.converged(), format!("not converged: {}", r.message))?;
    let (period, ode, energy, closure) = (
        r.period.unwrap_or(f64::NAN),
        r.ode_sup.unwrap_or(f64::NAN),
        r.energy_sup.unwrap_or(f64::NAN),
        r.closure.unwrap_or(f64::NAN),
    );
    ensure((period - 2.0 * PI).abs() <= period_tol, format!("T = {period}"))?;
    ensure(ode <= 1e-2, format!("ode_sup = {ode}"))?;
    ensure(energy <= 1e-2, format!("energy_sup = {energy}"))?;
    ensure(closure <= 1e-3 * period, format!("closure = {closure}"))?;
    ensure(r.nonconstant == Some(true), "orbit is constant".into())?;
    Ok(Gate { f_star: r.f_star.unwrap_or(f64::NAN), period })
}

fn criterion_1() -> Check {
    let (outcome, elapsed) = timed_solve(harmonic_args());
    let g = gated(&outcome, 1e-2)?;
    ensure((g.f_star - PI * PI).abs() <= 1e-2, format!("f* = {}", g.f_star))?;
    ensure(elapsed <= Duration::from_secs(10), format!("took {elapsed:?}"))?;
    Ok(format!("f* = {:.6}, T = {:.6}, {:.2?}", g.f_star, g.period, elapsed))
}

fn criterion_2() -> Check {
    let (outcome, _) = timed_solve(quartic_args());
    let g = gated(&outcome, 5e-2)?;
    Ok(format!("T = {:.6}", g.period))
}

fn criterion_3() -> Check {
    let (reference, _) = timed_solve(harmonic_args());
    let level_1 = reference.report.f_star.ok_or("route (1) failed")?;
    let (outcome, elapsed) = timed_solve(mountain_pass_args());
    let g = gated(&outcome, 1e-2)?;
    let last = outcome.report.cps_trace.last().ok_or("empty trace")?.weighted_gradient;
    ensure(last <= 1e-4, format!("weighted gradient {last}"))?;
    ensure((g.f_star - level_1).abs() <= 1e-1, format!("level {} vs {level_1}", g.f_star))?;
    ensure(outcome.report.gamma.windows(2).all(|w| w[1] <= w[0]), "gamma increased".into())?;
    ensure(elapsed <= Duration::from_secs(60), format!("took {elapsed:?}"))?;
    Ok(format!("level {:.6} vs {level_1:.6}, {elapsed:.2?}", g.f_star))
}

fn criterion_4() -> Check {
    let mut worst: f64 = 0.0;
    for i in 0..50u64 {
        let mu1 = 2.0 + 0.37 * (i % 8) as f64;
        let mu2 = 0.11 * (i % 5) as f64;
        let h = mu2 / mu1 + 0.2 + 0.05 * i as f64;
        let potential = if i % 2 == 0 {
            PotentialModel::power_law(0.3 + 0.04 * i as f64, mu1, mu2, 2)
        } else {
            parse_potential(&format!("{}*|q|^4 + q1^2*q2^2 + 0.5*cos(q2)", 0.5 + 0.03 * i as f64), 2)
        }
        .map_err(|e| e.to_string())?;
        let spec = ProblemSpec::new(potential, h, mu1, mu2, SymmetryClass::None).map_err(|e| e.to_string())?;
        let u =
            LoopPath::random_bandlimited(16, 2, 1000 + i, SymmetryClass::None).map_err(|e| e.to_string())?.scaled(0.6);
        let g = f_gradient(&u, &spec).map_err(|e| e.to_string())?;
        let base = u.as_slice().to_vec();
        let mut dev: f64 = 0.0;
        for k in 0..base.len() {
            let step = 1e-6 * (1.0 + base[k].abs());
            let shifted = |s: f64| {
                let mut v = base.clone();
                v[k] += s;
                f_value(&LoopPath::from_flat(2, v).unwrap(), &spec).unwrap()
            };
            let fd = (shifted(step) - shifted(-step)) / (2.0 * step);
            dev = dev.max((fd - g.as_slice()[k]).abs());
        }
        worst = worst.max(dev / g.max_abs());
    }
    ensure(worst <= 1e-6, format!("worst relative error {worst:.3e}"))?;
    Ok(format!("worst relative error {worst:.3e} over 50 pairs"))
}

fn criterion_5() -> Check {
    let circle = LoopPath::circle(256, 2).map_err(|e| e.to_string())?;
    let root = |a: f64, mu: f64, h: f64| -> Result<f64, String> {
        let p = PotentialModel::power_law(a, mu, 0.0, 2).map_err(|e| e.to_string())?;
        let spec = ProblemSpec::new(p, h, mu, 0.0, SymmetryClass::E1).map_err(|e| e.to_string())?;
        scaling_root(&circle, &spec).map_err(|e| e.to_string())
    };
    let harmonic = root(0.5, 2.0, 4.0)?;
    let quartic = root(0.25, 4.0, 12.0)?;
    ensure((harmonic - 2.0).abs() <= 1e-10, format!("harmonic a(u) = {harmonic}"))?;
    ensure((quartic - 2.0).abs() <= 1e-10, format!("quartic a(u) = {quartic}"))?;
    Ok(format!("a = {harmonic:.12}, {quartic:.12}"))
}

fn criterion_6() -> Check {
    let p = PotentialModel::power_law(0.5, 2.0, 0.0, 2).map_err(|e| e.to_string())?;
    let ode = |n: usize| -> Result<f64, String> {
        let q = LoopPath::circle(n, 2).map_err(|e| e.to_string())?;
        Ok(orbit_residuals(&q, 2.0 * PI, &p, 1.0).map_err(|e| e.to_string())?.0)
    };
    let mut ratios = Vec::new();
    for n in [64, 128, 256] {
        let ratio = ode(n)? / ode(2 * n)?;
        ensure((3.5..=4.5).contains(&ratio), format!("ratio {ratio} at N = {n}"))?;
        ratios.push(format!("{ratio:.4}"));
    }
    Ok(format!("ratios {}", ratios.join(", ")))
}

fn criterion_7() -> Check {
    let cfg = SamplerConfig::default();
    for (a, mu1, mu2, h) in [(0.5, 2.0, 0.0, 1.0), (0.25, 4.0, 0.0, 0.75), (1.3, 3.0, 0.7, 1.0)] {
        let p = PotentialModel::power_law(a, mu1, mu2, 2).map_err(|e| e.to_string())?;
        let reports = check_hypotheses(&p, h, mu1, mu2, &cfg).map_err(|e| e.to_string())?;
        let b2 = reports.iter().find(|r| r.hypothesis == Hypothesis::B2).ok_or("no B2")?;
        ensure(b2.residual.abs() <= 1e-12, format!("B2 residual {} for mu1 = {mu1}", b2.residual))?;
    }
    let odd = parse_potential("q1", 2).map_err(|e| e.to_string())?;
    let reports = check_hypotheses(&odd, 1.0, 2.0, 0.0, &cfg).map_err(|e| e.to_string())?;
    ensure(
        reports.iter().any(|r| r.hypothesis == Hypothesis::B1 && r.verdict == Verdict::Fail),
        "B1 did not fail on q1".into(),
    )?;
    let harmonic = PotentialModel::power_law(0.5, 2.0, 0.0, 2).map_err(|e| e.to_string())?;
    let reports = check_hypotheses(&harmonic, 1.0, 2.0, 0.0, &cfg).map_err(|e| e.to_string())?;
    let b3 = reports.iter().find(|r| r.hypothesis == Hypothesis::B3).ok_or("no B3")?;
    let radius = b3.threshold_radius.ok_or("no B3 threshold radius")?;
    let grid_step = (cfg.r_max - cfg.r_min) / (cfg.radial_steps - 1) as f64;
    ensure((radius - 2f64.sqrt()).abs() <= grid_step, format!("B3 radius {radius} vs sqrt 2 (step {grid_step})"))?;
    let gate = PotentialModel::power_law(0.5, 2.0, 1.0, 2).map_err(|e| e.to_string())?;
    ensure(ProblemSpec::new(gate, 0.5, 2.0, 1.0, SymmetryClass::E1).is_err(), "h = mu2/mu1 was accepted".into())?;
    Ok(format!("B3 radius {radius:.6}"))
}

fn criterion_8() -> Check {
    let runs = [
        ("harmonic", harmonic_args()),
        ("quartic", quartic_args()),
        (
            "harmonic random start",
            ConfigArgs { initial_loop: Some("random_bandlimited".into()), seed: Some(3), ..harmonic_args() },
        ),
        (
            "harmonic e2 random start",
            ConfigArgs {
                initial_loop: Some("random_bandlimited".into()),
                symmetry: Some("e2".into()),
                seed: Some(5),
                ..harmonic_args()
            },
        ),
        ("mountain pass", ConfigArgs { gradient_tolerance: None, ..mountain_pass_args() }),
    ];
    let mut finals = Vec::new();
    for (name, args) in runs {
        let (outcome, _) = timed_solve(args);
        let sol = outcome.solution.as_ref().ok_or(format!("{name}: no solution"))?;
        ensure(sol.converged(), format!("{name}: not converged ({})", sol.message))?;
        let first = sol.trace.first().ok_or("empty trace")?.weighted_gradient;
        let last = sol.trace.last().ok_or("empty trace")?.weighted_gradient;
        ensure(last <= 1e-6, format!("{name}: final weighted gradient {last}"))?;
        ensure(last <= first, format!("{name}: final {last} > initial {first}"))?;
        finals.push(format!("{last:.1e}"));
    }
    Ok(format!("final weighted gradients {}", finals.join(", ")))
}

fn run_binary(args: &[&str]) -> Result<std::process::Output, String> {
    Command::new(env!("CARGO_BIN_EXE_hamloop")).args(args).output().map_err(|e| e.to_string())
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn criterion_9() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for run in 0..2 {
        let report = dir.path().join(format!("report{run}.json"));
        let orbit = dir.path().join(format!("orbit{run}.csv"));
        let out = run_binary(&[
            "solve",
            "--initial-loop",
            "random_bandlimited",
            "--seed",
            "7",
            "--no-timestamp",
            "--report",
            path_str(&report),
            "--orbit",
            path_str(&orbit),
        ])?;
        ensure(out.status.success(), format!("solve exited {:?}", out.status.code()))?;
        let read = |p: &Path| std::fs::read(p).map_err(|e| e.to_string());
        outputs.push((read(&report)?, read(&orbit)?));
    }
    ensure(outputs[0].0 == outputs[1].0, "reports differ".into())?;
    ensure(outputs[0].1 == outputs[1].1, "orbit tables differ".into())?;
    Ok(format!("{} report bytes identical", outputs[0].0.len()))
}

fn criterion_10() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let orbit = dir.path().join("orbit.csv");
    let out = run_binary(&["solve", "--no-timestamp", "--orbit", path_str(&orbit)])?;
    ensure(out.status.success(), "harmonic solve failed".into())?;
    let text = std::fs::read_to_string(&orbit).map_err(|e| e.to_string())?;
    let t = table::parse(&text).map_err(|e| e.to_string())?;
    let scaled = dir.path().join("scaled.csv");
    std::fs::write(&scaled, table::render(&t.samples.scaled(1.1), t.period)).map_err(|e| e.to_string())?;
    let out = run_binary(&["verify", path_str(&scaled)])?;
    ensure(out.status.code() == Some(1), format!("verify exited {:?} on the scaled orbit", out.status.code()))?;
    let v = verify_file(&config(ConfigArgs::default()), &scaled).map_err(|e| format!("{:#}", e.error()))?;
    ensure(v.energy_sup >= 0.05, format!("energy_sup = {}", v.energy_sup))?;
    let original = run_binary(&["verify", path_str(&orbit)])?;
    ensure(original.status.success(), "unscaled orbit failed verification".into())?;
    Ok(format!("energy_sup = {:.4} on the 1.1-scaled orbit", v.energy_sup))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("harmonic oscillator end-to-end", criterion_1),
        ("quartic potential end-to-end", criterion_2),
        ("mountain-pass route on the harmonic case", criterion_3),
        ("gradient vs central differences", criterion_4),
        ("scaling-root closed forms", criterion_5),
        ("second-order residual convergence", criterion_6),
        ("hypothesis checkers", criterion_7),
        ("CPS diagnostics on converged runs", criterion_8),
        ("byte-identical reports", criterion_9),
        ("impostor rejection by verify", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS criterion {}: {name} ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name} ({why})", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
