//! Command-line runner: config loading, subcommand dispatch, report files.
//!
//! Exit codes: 0 success, 1 usage/config/io error, 2 completed with flags
//! (failed checks, degenerate constants, empty decay window, blow-ups).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::checks::{
    b1_checks, contraction_spot_check, operator_identities, random_states, reference_params, reference_profile,
    CheckResult,
};
use crate::config::{broadcast, Experiment, ExperimentConfig};
use crate::coupling_sim::{simulate_ensemble, write_trajectory_csv, PairState, Stepper};
use crate::distance_constants::{
    build_constants, derive_inputs, f_property_suite, psi, psi_tilde, ConstantsReport, DerivedInputs,
    DistanceProfile,
};
use crate::ergodicity::{equilibrium_diagnostics, estimate_decay, EquilibriumSetup};
use crate::error::{Error, Result};
use crate::generator::{Generator, Profile};
use crate::model::{auto_certificate, choose_r_eps, verify_a2ii, verify_b1, LyapunovSpec, V0Spec};

/// Environment variable holding the worker-thread count.
pub const WORKERS_ENV: &str = "LEVYHAM_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "levy-coupling", version, about = "Refined basic coupling experiments for Levy-driven Hamiltonian systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML experiment config; the benchmark model when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides `sim.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides `sim.replicas`.
    #[arg(long)]
    pub replicas: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    #[value(name = "B1", alias = "b1")]
    B1,
    #[value(name = "F1", alias = "f1")]
    F1,
    #[value(name = "A2", alias = "a2")]
    A2,
    #[value(name = "f-props")]
    FProps,
    #[value(name = "operator-identities")]
    OperatorIdentities,
    #[value(name = "all")]
    All,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Constant chain: JSON report and the f/g/sigma curve.
    Constants(Common),
    /// Grid and spot checks; exit 0 iff all pass.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "all")]
        which: Which,
    },
    /// Simulate coupled pairs and write their trajectories.
    Couple(Common),
    /// Fit the decay rate of the contraction functional.
    Rate(Common),
    /// Distances between two ensembles started far apart.
    Equilibrium(Common),
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = init_workers() {
        eprintln!("error: {e}");
        return 1;
    }
    match dispatch(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Io(_) => 1,
        _ => 2,
    }
}

fn init_workers() -> Result<()> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("{WORKERS_ENV} must be a positive integer, got '{raw}'")))?;
    // a second call in one process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn dispatch(cmd: &Command) -> Result<i32> {
    let started = Instant::now();
    let (name, common) = match cmd {
        Command::Constants(c) => ("constants", c),
        Command::Verify { common, .. } => ("verify", common),
        Command::Couple(c) => ("couple", c),
        Command::Rate(c) => ("rate", c),
        Command::Equilibrium(c) => ("equilibrium", c),
    };
    let exp = load(common)?;
    let out = Outputs::new(&common.out)?;
    let code = match cmd {
        Command::Constants(_) => cmd_constants(&exp, &out),
        Command::Verify { which, .. } => cmd_verify(&exp, *which, &out),
        Command::Couple(_) => cmd_couple(&exp, &out),
        Command::Rate(_) => cmd_rate(&exp, &out),
        Command::Equilibrium(_) => cmd_equilibrium(&exp, &out),
    }?;
    out.manifest(name, &exp.config, started, code)?;
    Ok(code)
}

fn load(common: &Common) -> Result<Experiment> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.sim.seed = s;
    }
    if let Some(n) = common.replicas {
        cfg.sim.replicas = n;
    }
    cfg.build()
}

/// Output directory with the list of files written to it.
struct Outputs {
    dir: PathBuf,
    files: std::cell::RefCell<Vec<String>>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), files: Default::default() })
    }

    fn path(&self, name: &str) -> Result<PathBuf> {
        let p = self.dir.join(name);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        self.files.borrow_mut().push(name.to_string());
        Ok(p)
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
        fs::write(self.path(name)?, text + "\n")?;
        Ok(())
    }

    fn writer(&self, name: &str) -> Result<std::io::BufWriter<fs::File>> {
        Ok(std::io::BufWriter::new(fs::File::create(self.path(name)?)?))
    }

    fn manifest(&self, command: &str, cfg: &ExperimentConfig, started: Instant, code: i32) -> Result<()> {
        let files = self.files.borrow().clone();
        let m = json!({
            "command": command,
            "config_hash": cfg.hash(),
            "seed": cfg.sim.seed,
            "version": env!("CARGO_PKG_VERSION"),
            "workers": rayon::current_num_threads(),
            "elapsed_seconds": started.elapsed().as_secs_f64(),
            "exit_code": code,
            "outputs": files,
        });
        let text = serde_json::to_string_pretty(&m).map_err(|e| Error::Io(e.to_string()))?;
        fs::write(self.dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }
}

/// Everything downstream of the model: derived inputs, the chain, and `f`.
pub struct Pipeline {
    pub derived: DerivedInputs,
    pub report: ConstantsReport,
    pub profile: DistanceProfile,
}

impl Pipeline {
    pub fn lyap(&self) -> &LyapunovSpec {
        &self.derived.input.lyap
    }

    /// `(psi_tilde, psi)` with `Ĥ` in units of `L`.
    pub fn functionals(&self) -> impl Fn(&PairState) -> (f64, f64) + Sync + '_ {
        let params = self.report.params();
        move |s: &PairState| {
            let hat = self.profile.hat();
            (psi_tilde(s, &hat, &params, self.lyap(), self.report.eps), psi(s, self.lyap()))
        }
    }
}

pub fn pipeline(exp: &Experiment) -> Result<Pipeline> {
    let cfg = &exp.config;
    let mut derived =
        derive_inputs(&exp.spec, &exp.nu, &exp.grid, &cfg.quadrature, cfg.lyapunov.r0_jump, cfg.certificate)?;
    derived.input.position_radius = cfg.constants.position_radius;
    derived.input.lipschitz_samples = cfg.constants.lipschitz_samples;
    derived.input.lambda_star_r0 = cfg.constants.lambda_star_r0;
    let (report, profile) = build_constants(&derived.input)?;
    Ok(Pipeline { derived, report, profile })
}

fn cmd_constants(exp: &Experiment, out: &Outputs) -> Result<i32> {
    let p = match pipeline(exp) {
        Ok(p) => p,
        Err(e @ Error::DegenerateState(_)) => {
            out.json("constants.json", &json!({ "degenerate": true, "reason": e.to_string() }))?;
            eprintln!("flag: {e}");
            return Ok(2);
        }
        Err(e) => return Err(e),
    };
    out.json("constants.json", &json!({ "report": p.report, "inputs": p.derived }))?;
    write_f_curve(&p.profile, out.writer("f_curve.csv")?)?;
    let failed: Vec<&str> = p.report.invariants().into_iter().filter(|(_, ok)| !ok).map(|(n, _)| n).collect();
    if failed.is_empty() {
        Ok(0)
    } else {
        eprintln!("flag: invariants fail: {}", failed.join(", "));
        Ok(2)
    }
}

/// `s, f_over_l, f_prime, g, sigma` on a geometric grid of `(0, 2 R0]`.
/// `f / L` is reported because `f` itself can underflow.
fn write_f_curve<W: std::io::Write>(f: &DistanceProfile, mut w: W) -> Result<()> {
    writeln!(w, "s,f_over_l,f_prime,g,sigma")?;
    let hi = 2.0 * f.r0_big;
    let lo = hi * 1e-9;
    let n = 200;
    let scaled = f.scaled();
    for i in 0..=n {
        let s = lo * (hi / lo).powf(i as f64 / n as f64);
        writeln!(w, "{s},{},{},{},{}", scaled.value(s), f.f_prime(s), f.g(s), f.sigma.value(s))?;
    }
    Ok(())
}

fn cmd_verify(exp: &Experiment, which: Which, out: &Outputs) -> Result<i32> {
    let all = which == Which::All;
    let cfg = &exp.config;
    let mut results: Vec<CheckResult> = Vec::new();
    let certificate = match cfg.certificate {
        Some(c) => c,
        None => auto_certificate(&exp.spec, &exp.grid)?,
    };
    if all || which == Which::B1 {
        results.extend(b1_checks(&verify_b1(&exp.spec, &certificate, &exp.grid)));
    }
    if all || which == Which::F1 {
        results.push(match choose_r_eps(&exp.spec, &certificate, &exp.grid) {
            Ok(f1) => CheckResult::scalar("F1 drift window", true, f1.c),
            Err(Error::EmptyWindow { margin }) => CheckResult::scalar("F1 drift window", false, margin),
            Err(e) => return Err(e),
        });
    }
    if all || which == Which::A2 {
        let f1 = choose_r_eps(&exp.spec, &certificate, &exp.grid)?;
        let lyap = LyapunovSpec::new(f1.r, f1.r0_cross, exp.nu.theta, V0Spec::from_certificate(&exp.spec, &certificate))?;
        let a2 = verify_a2ii(&lyap, &exp.nu.coupling_slice(), &exp.grid)?;
        let ok = a2.sup_ratio.is_finite() && a2.moment.is_finite();
        results.push(CheckResult::scalar("A2 jump regularity", ok, a2.c_star - a2.sup_ratio));
    }
    if all || which == Which::FProps || which == Which::OperatorIdentities {
        let p = pipeline(exp)?;
        if all || which == Which::FProps {
            let c = &cfg.checks;
            results.extend(f_property_suite(&p.profile, c.f_points, c.f_deltas, c.f_tolerance).iter().map(CheckResult::from));
        }
        if all || which == Which::OperatorIdentities {
            let c = &cfg.checks;
            let gen = Generator::new(&exp.nu, cfg.quadrature)?;
            let params = reference_params(&exp.sys, cfg.lyapunov.r0_jump);
            let f = reference_profile(&params, p.derived.input.j_c0, p.derived.input.theta0)?;
            let states = random_states(exp.sys.dim, c.states, c.state_seed, c.state_radius, c.diagonal);
            results.extend(operator_identities(&gen, &exp.sys, &params, &f, p.lyap(), &states)?);
            let hat = p.profile.hat();
            results.push(contraction_spot_check(&gen, &exp.sys, &p.report, &hat, p.lyap(), &states)?);
        }
    }
    out.json("verify.json", &results)?;
    for r in &results {
        println!("{} {} (worst slack {:.3e}, {} points)", if r.pass { "PASS" } else { "FAIL" }, r.name, r.worst_slack, r.points);
    }
    Ok(if results.iter().all(|r| r.pass) { 0 } else { 2 })
}

fn cmd_couple(exp: &Experiment, out: &Outputs) -> Result<i32> {
    let p = pipeline(exp)?;
    let sim = &exp.config.sim;
    let stepper = Stepper::new(&exp.sys, &exp.nu, p.report.params(), sim.delta, sim.correction)?;
    let runs = simulate_ensemble(&stepper, sim, |_| exp.initial.clone());
    let functional = p.functionals();
    let params = p.report.params();
    let mut blow_ups = Vec::new();
    let mut stability = 0.0f64;
    for (i, run) in runs.iter().enumerate() {
        match run {
            Ok(tr) => {
                stability = stability.max(tr.stability);
                let w = out.writer(&format!("trajectories/replica_{i:05}.csv"))?;
                write_trajectory_csv(w, tr, |s| (s.r(&params), functional(s).0))?;
            }
            Err(Error::NonFiniteState { t }) => blow_ups.push(json!({ "replica": i, "t": t })),
            Err(e) => return Err(e.clone()),
        }
    }
    out.json(
        "couple.json",
        &json!({ "replicas": runs.len(), "blow_ups": blow_ups, "stability": stability, "params": params }),
    )?;
    Ok(if blow_ups.is_empty() { 0 } else { 2 })
}

fn cmd_rate(exp: &Experiment, out: &Outputs) -> Result<i32> {
    let p = pipeline(exp)?;
    let sim = &exp.config.sim;
    let stepper = Stepper::new(&exp.sys, &exp.nu, p.report.params(), sim.delta, sim.correction)?;
    let lambda_star = Some(p.report.rate);
    match estimate_decay(&stepper, sim, |_| exp.initial.clone(), p.functionals(), lambda_star) {
        Ok(rep) => {
            out.json("decay.json", &rep)?;
            rep.write_csv(out.writer("decay.csv")?)?;
            Ok(if rep.blow_ups == 0 { 0 } else { 2 })
        }
        Err(e @ Error::InsufficientDecay(_)) => {
            out.json("decay.json", &json!({ "error": e.to_string() }))?;
            eprintln!("flag: {e}");
            Ok(2)
        }
        Err(e) => Err(e),
    }
}

fn cmd_equilibrium(exp: &Experiment, out: &Outputs) -> Result<i32> {
    let cfg = &exp.config;
    let e = &cfg.equilibrium;
    let d = exp.sys.dim;
    let params = reference_params(&exp.sys, cfg.lyapunov.r0_jump);
    let stepper = Stepper::new(&exp.sys, &exp.nu, params, cfg.sim.delta, cfg.sim.correction)?;
    let setup = EquilibriumSetup {
        projections: e.projections,
        projection_seed: e.projection_seed,
        seed_b: e.seed_b,
        floor_splits: e.floor_splits,
        factor: e.factor,
        moment_exponent: e.moment_exponent,
    };
    let (xa, va) = (broadcast("x_a", &e.x_a, d)?, broadcast("v_a", &e.v_a, d)?);
    let (xb, vb) = (broadcast("x_b", &e.x_b, d)?, broadcast("v_b", &e.v_b, d)?);
    let rep = equilibrium_diagnostics(&stepper, &cfg.sim, &setup, |_| (xa.clone(), va.clone()), |_| (xb.clone(), vb.clone()))?;
    out.json("equilibrium.json", &rep)?;
    Ok(if rep.pass_cross && rep.pass_stationarity && rep.blow_ups == 0 { 0 } else { 2 })
}
