//! Run configuration: command-line flags layered over an optional TOML file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use hamloop::{
    potentials::parse_potential, InitialLoop, PotentialModel, ProblemSpec, Route, SamplerConfig, SolveOptions,
    SymmetryClass,
};
use serde::{Deserialize, Serialize};

/// Keys accepted in the config file. Every key is optional; flags override.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub potential: Option<String>,
    pub a: Option<f64>,
    pub n: Option<usize>,
    pub h: Option<f64>,
    pub mu1: Option<f64>,
    pub mu2: Option<f64>,
    pub symmetry: Option<String>,
    pub route: Option<String>,
    pub nodes: Option<usize>,
    pub seed: Option<u64>,
    pub max_iterations: Option<usize>,
    pub gradient_tolerance: Option<f64>,
    pub step_shrink: Option<f64>,
    pub armijo: Option<f64>,
    pub path_points: Option<usize>,
    pub initial_loop: Option<String>,
    pub separation: Option<String>,
    pub sphere_radius: Option<f64>,
    pub ode_tol: Option<f64>,
    pub energy_tol: Option<f64>,
    pub closure_tol: Option<f64>,
    pub report: Option<PathBuf>,
    pub orbit: Option<PathBuf>,
    pub sampler: Option<SamplerConfig>,
}

/// Problem and solver flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// TOML file with any of the keys below; flags take precedence.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// `power_law` (uses --a, --mu1, --mu2) or an expression in q1..qn.
    #[arg(long)]
    pub potential: Option<String>,
    /// Power-law coefficient in V = a|q|^mu1 + mu2/mu1.
    #[arg(long)]
    pub a: Option<f64>,
    /// Spatial dimension.
    #[arg(long)]
    pub n: Option<usize>,
    /// Energy level.
    #[arg(long, allow_negative_numbers = true)]
    pub h: Option<f64>,
    #[arg(long)]
    pub mu1: Option<f64>,
    #[arg(long)]
    pub mu2: Option<f64>,
    /// none, e1 or e2.
    #[arg(long)]
    pub symmetry: Option<String>,
    /// constrained_min or mountain_pass.
    #[arg(long)]
    pub route: Option<String>,
    /// Grid nodes N.
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub gradient_tolerance: Option<f64>,
    #[arg(long)]
    pub step_shrink: Option<f64>,
    #[arg(long)]
    pub armijo: Option<f64>,
    #[arg(long)]
    pub path_points: Option<usize>,
    /// circle or random_bandlimited.
    #[arg(long)]
    pub initial_loop: Option<String>,
    /// Mountain-pass separating set: sphere or nehari.
    #[arg(long)]
    pub separation: Option<String>,
    /// Radius r of the gradient sphere ||u'|| = r.
    #[arg(long)]
    pub sphere_radius: Option<f64>,
    #[arg(long)]
    pub ode_tol: Option<f64>,
    #[arg(long)]
    pub energy_tol: Option<f64>,
    /// Closure gate, relative to the period.
    #[arg(long)]
    pub closure_tol: Option<f64>,
    /// Where to write the run report.
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    /// Where to write (solve) or read (verify) the orbit table.
    #[arg(long, value_name = "FILE")]
    pub orbit: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Separation {
    Sphere { radius: f64 },
    Nehari,
}

/// Residual gates applied to a synthesized or loaded orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Gates {
    pub ode_tol: f64,
    pub energy_tol: f64,
    /// `closure <= closure_tol * T`.
    pub closure_tol: f64,
}

/// Fully resolved configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub potential_source: String,
    pub spec: ProblemSpec,
    pub route: Route,
    pub nodes: usize,
    pub seed: u64,
    pub solver: SolveOptions,
    pub separation: Option<Separation>,
    pub gates: Gates,
    pub sampler: SamplerConfig,
    pub report: Option<PathBuf>,
    pub orbit: Option<PathBuf>,
}

/// Spec echo written into reports.
#[derive(Debug, Clone, Serialize)]
pub struct SpecEcho {
    pub potential: String,
    pub n: usize,
    pub h: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub symmetry: SymmetryClass,
    pub route: Route,
    pub nodes: usize,
    pub seed: u64,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub step_shrink: f64,
    pub armijo: f64,
    pub path_points: usize,
    pub initial_loop: String,
    pub separation: Option<Separation>,
    pub gates: Gates,
}

fn read_file(path: &Path) -> anyhow::Result<FileConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
}

fn initial_loop_name(l: &InitialLoop) -> &'static str {
    match l {
        InitialLoop::Circle => "circle",
        InitialLoop::RandomBandlimited => "random_bandlimited",
        InitialLoop::User(_) => "user",
    }
}

impl RunConfig {
    /// Layers `args` over the file named by `--config`, then defaults.
    pub fn resolve(args: &ConfigArgs) -> anyhow::Result<Self> {
        let file = match &args.config {
            Some(p) => read_file(p)?,
            None => FileConfig::default(),
        };
        macro_rules! pick {
            ($field:ident, $default:expr) => {
                args.$field.clone().or(file.$field.clone()).unwrap_or($default)
            };
        }
        let n = pick!(n, 2);
        let mu1 = pick!(mu1, 2.0);
        let mu2 = pick!(mu2, 0.0);
        let source = pick!(potential, "power_law".to_string());
        let potential: PotentialModel = if source == "power_law" {
            let a = pick!(a, 0.5);
            PotentialModel::power_law(a, mu1, mu2, n)?
        } else {
            if args.a.is_some() || file.a.is_some() {
                bail!("--a only applies to the power_law potential");
            }
            parse_potential(&source, n)?
        };
        let symmetry: SymmetryClass = pick!(symmetry, "e1".to_string()).parse()?;
        let h = pick!(h, 1.0);
        let spec = ProblemSpec::new(potential.clone(), h, mu1, mu2, symmetry)?;
        let route: Route = pick!(route, "constrained_min".to_string()).parse()?;
        let nodes = pick!(nodes, 256);
        let seed = pick!(seed, 0);
        let initial_loop = match pick!(initial_loop, "circle".to_string()).as_str() {
            "circle" => InitialLoop::Circle,
            "random_bandlimited" => InitialLoop::RandomBandlimited,
            other => bail!("unknown initial_loop '{other}' (expected circle or random_bandlimited)"),
        };
        let defaults = SolveOptions::default();
        let solver = SolveOptions {
            max_iterations: pick!(max_iterations, defaults.max_iterations),
            gradient_tolerance: pick!(gradient_tolerance, defaults.gradient_tolerance),
            step_shrink: pick!(step_shrink, defaults.step_shrink),
            armijo: pick!(armijo, defaults.armijo),
            path_points: pick!(path_points, defaults.path_points),
            seed,
            initial_loop,
            nodes,
        };
        solver.validate()?;
        let separation = match route {
            Route::ConstrainedMin => None,
            Route::MountainPass => Some(match pick!(separation, "sphere".to_string()).as_str() {
                "sphere" => {
                    let circle = hamloop::LoopPath::circle(nodes, n)?;
                    let radius = pick!(sphere_radius, 0.5 * hamloop::loopspace::velocity_l2(&circle));
                    if !(radius > 0.0) {
                        bail!("sphere_radius must be positive");
                    }
                    Separation::Sphere { radius }
                }
                "nehari" => Separation::Nehari,
                other => bail!("unknown separation '{other}' (expected sphere or nehari)"),
            }),
        };
        let gates = Gates {
            ode_tol: pick!(ode_tol, 1e-2),
            energy_tol: pick!(energy_tol, 1e-2),
            closure_tol: pick!(closure_tol, 1e-3),
        };
        if !(gates.ode_tol > 0.0 && gates.energy_tol > 0.0 && gates.closure_tol > 0.0) {
            bail!("residual tolerances must be positive");
        }
        let mut sampler = file.sampler.clone().unwrap_or_default();
        sampler.seed = seed;
        Ok(Self {
            potential_source: potential.describe(),
            spec,
            route,
            nodes,
            seed,
            solver,
            separation,
            gates,
            sampler,
            report: args.report.clone().or(file.report.clone()),
            orbit: args.orbit.clone().or(file.orbit.clone()),
        })
    }

    pub fn echo(&self) -> SpecEcho {
        SpecEcho {
            potential: self.potential_source.clone(),
            n: self.spec.dim(),
            h: self.spec.h,
            mu1: self.spec.mu1,
            mu2: self.spec.mu2,
            symmetry: self.spec.symmetry,
            route: self.route,
            nodes: self.nodes,
            seed: self.seed,
            max_iterations: self.solver.max_iterations,
            gradient_tolerance: self.solver.gradient_tolerance,
            step_shrink: self.solver.step_shrink,
            armijo: self.solver.armijo,
            path_points: self.solver.path_points,
            initial_loop: initial_loop_name(&self.solver.initial_loop).to_string(),
            separation: self.separation,
            gates: self.gates,
        }
    }
}
