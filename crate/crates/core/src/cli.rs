//! Command-line front end.
//!
//! Exit codes: 0 success, 1 failed checks or replay mismatch, 2 usage or
//! configuration error, 3 solver failure, 4 fixed-point non-convergence.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, SimulateMode};
use crate::error::{Error, Result};
use crate::estimators::{integral_v, pathwise_sup_h};
use crate::fixed_point::{picard_iterate, staircase_with_stats, FixedPointStatus};
use crate::haar::{fmt_f64, Trajectory};
use crate::par::{self, Execution};
use crate::rng::path_seed;
use crate::solver::FrozenSolver;
use crate::verify::{run_suite, write_jsonl, Suite, VerifyOptions};
use crate::wiener::sample_ensemble;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_NONCONVERGENCE: i32 = 4;

/// Caps the worker pool when set to a positive integer.
pub const THREADS_ENV: &str = "STF_SPDE_THREADS";

const SEED_DERIVATION: &str = "splitmix64(master_seed ^ path_index)";
const MANIFEST: &str = "manifest.json";

#[derive(Parser, Debug)]
#[command(name = "stf-spde", version, about = "Frozen-coefficient SPDE fixed-point experiments")]
struct Cli {
    /// Run every ensemble on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve an ensemble and write one trajectory CSV per path.
    Simulate(RunArgs),
    /// Picard iteration of the projected solution map.
    FixedPoint(RunArgs),
    /// Run a built-in verification suite.
    Verify {
        #[arg(long)]
        suite: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        paths: Option<usize>,
    },
    /// Rerun a recorded command and compare its outputs byte for byte.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        /// Defaults to `replay/` next to the manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Everything needed to rerun a command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<String>,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    pub seed_derivation: String,
    pub path_seeds: Vec<u64>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))
    }

    fn save(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Malformed(e.to_string()))?;
        fs::write(dir.join(MANIFEST), text + "\n")?;
        Ok(())
    }
}

fn version() -> String {
    format!("v{}", env!("CARGO_PKG_VERSION"))
}

/// Maps a library error onto the exit-code contract.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NewtonDivergence { .. }
        | Error::DegenerateFit(_)
        | Error::TooFewSamples { .. }
        | Error::NonFiniteSample(_) => EXIT_SOLVER,
        _ => EXIT_USAGE,
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            par::init_threads(n);
        }
    }
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    match dispatch(cli.command, exec) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: Command, exec: Execution) -> Result<i32> {
    match command {
        Command::Simulate(a) => {
            let (cfg, out) = load_run(&a)?;
            simulate(&cfg, &out, exec)
        }
        Command::FixedPoint(a) => {
            let (cfg, out) = load_run(&a)?;
            fixed_point(&cfg, &out, exec)
        }
        Command::Verify { suite, out, seed, paths } => {
            let suite_kind: Suite = suite.parse()?;
            let out = out.unwrap_or_else(|| PathBuf::from("out"));
            verify(&suite, suite_kind, seed, paths, &out, exec)
        }
        Command::Replay { manifest, out } => replay(&manifest, out, exec),
    }
}

fn load_run(a: &RunArgs) -> Result<(RunConfig, PathBuf)> {
    let mut cfg = RunConfig::load(&a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(p) = a.paths {
        cfg.paths = p;
    }
    cfg.validate()?;
    let out = a.out.clone().or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    Ok((cfg, out))
}

fn seeds(master: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|p| path_seed(master, p)).collect()
}

fn run_manifest(command: &str, cfg: &RunConfig, outputs: Vec<String>) -> Manifest {
    Manifest {
        command: command.into(),
        version: version(),
        suite: None,
        config: Some(cfg.canonical()),
        master_seed: cfg.seed,
        paths: Some(cfg.paths),
        seed_derivation: SEED_DERIVATION.into(),
        path_seeds: seeds(cfg.seed, cfg.paths),
        outputs,
    }
}

/// Writes `path_NNNN.csv` (the solution), `noise_NNNN.bin`, a summary and
/// the manifest; staircase runs also write `staircase_NNNN.csv`.
pub fn simulate(cfg: &RunConfig, out: &Path, exec: Execution) -> Result<i32> {
    let problem = cfg.problem()?;
    let triple = problem.triple();
    let solver = FrozenSolver::new(problem, cfg.solver)?;
    let level = cfg.haar_level()?;
    let time = cfg.time()?;
    let noises = sample_ensemble(&cfg.qwiener()?, time, cfg.seed, cfg.paths, exec);
    let results = exec.try_map(cfg.paths, |i| -> Result<(Option<Trajectory>, Trajectory, usize)> {
        let noise = &noises[i];
        match cfg.mode {
            SimulateMode::Staircase => {
                let (w, _) = staircase_with_stats(&solver, &level, noise)?;
                let (u, stats) = solver.solve_with_stats(&w, noise)?;
                Ok((Some(w), u, stats.retried_steps))
            }
            SimulateMode::Frozen => {
                let xi = Trajectory::constant(time, &solver.problem().initial);
                let (u, stats) = solver.solve_with_stats(&xi, noise)?;
                Ok((None, u, stats.retried_steps))
            }
        }
    })?;

    fs::create_dir_all(out)?;
    let mut outputs = Vec::new();
    let mut summary = String::new();
    let _ = writeln!(summary, "command: simulate\nexample: {}\npaths: {}\nmaster_seed: {}", solver.problem().example.name(), cfg.paths, cfg.seed);
    let _ = writeln!(summary, "path,seed,sup_h_sq,int_v,retried_steps");
    for (i, ((w, u, retried), noise)) in results.iter().zip(&noises).enumerate() {
        let name = format!("path_{i:04}.csv");
        u.save_csv(&out.join(&name))?;
        outputs.push(name);
        if let Some(w) = w {
            let name = format!("staircase_{i:04}.csv");
            w.save_csv(&out.join(&name))?;
            outputs.push(name);
        }
        let name = format!("noise_{i:04}.bin");
        noise.save(&out.join(&name))?;
        outputs.push(name);
        let _ = writeln!(
            summary,
            "{i},{},{},{},{retried}",
            noise.seed(),
            fmt_f64(pathwise_sup_h(u, triple)),
            fmt_f64(integral_v(u, triple))
        );
    }
    fs::write(out.join("summary.txt"), summary)?;
    outputs.push("summary.txt".into());
    run_manifest("simulate", cfg, outputs).save(out)?;
    Ok(EXIT_OK)
}

/// Writes `diagnostics.csv`, per-path distances, a summary and the manifest.
/// Non-convergence still writes everything before returning exit code 4.
pub fn fixed_point(cfg: &RunConfig, out: &Path, exec: Execution) -> Result<i32> {
    let solver = FrozenSolver::new(cfg.problem()?, cfg.solver)?;
    let level = cfg.haar_level()?;
    let noises = sample_ensemble(&cfg.qwiener()?, cfg.time()?, cfg.seed, cfg.paths, exec);
    let outcome = picard_iterate(&solver, &level, &noises, cfg.fp_tol, cfg.fp_max_iter, cfg.radius, exec)?;
    let d = &outcome.diagnostics;

    fs::create_dir_all(out)?;
    let mut w = std::io::BufWriter::new(fs::File::create(out.join("diagnostics.csv"))?);
    d.write_csv(&mut w)?;
    std::io::Write::flush(&mut w)?;

    let mut pd = String::from("path,iteration,distance\n");
    for (i, row) in d.path_distances.iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            let _ = writeln!(pd, "{i},{},{}", k + 1, fmt_f64(*v));
        }
    }
    fs::write(out.join("path_distances.csv"), pd)?;

    let mut s = String::new();
    let status = match d.status {
        FixedPointStatus::Converged { iterations } => format!("converged after {iterations} iterations"),
        FixedPointStatus::NonConvergence { iterations } => format!("no convergence within {iterations} iterations"),
    };
    let _ = writeln!(s, "command: fixed-point\nexample: {}\nstatus: {status}", solver.problem().example.name());
    let _ = writeln!(s, "residual: {} (stderr {})", fmt_f64(d.residual.mean), fmt_f64(d.residual.stderr));
    let _ = writeln!(s, "energy_functional: {}", fmt_f64(d.energy_functional.mean));
    if let Some(inside) = d.within_radius() {
        let _ = writeln!(s, "within_radius: {inside}");
    }
    fs::write(out.join("summary.txt"), s)?;

    let outputs = ["diagnostics.csv", "path_distances.csv", "summary.txt"].map(String::from).to_vec();
    run_manifest("fixed-point", cfg, outputs).save(out)?;
    Ok(if d.status.converged() { EXIT_OK } else { EXIT_NONCONVERGENCE })
}

/// Writes `verdicts.jsonl`, a summary and the manifest; exit code 1 when any
/// check fails.
pub fn verify(name: &str, suite: Suite, seed: Option<u64>, paths: Option<usize>, out: &Path, exec: Execution) -> Result<i32> {
    let defaults = VerifyOptions::default();
    let opts = VerifyOptions { seed: seed.unwrap_or(defaults.seed), paths, exec };
    let verdicts = run_suite(suite, &opts)?;

    fs::create_dir_all(out)?;
    let mut w = std::io::BufWriter::new(fs::File::create(out.join("verdicts.jsonl"))?);
    write_jsonl(&verdicts, &mut w)?;
    std::io::Write::flush(&mut w)?;
    let failed = verdicts.iter().filter(|v| !v.pass).count();
    let mut s = String::new();
    for v in &verdicts {
        let _ = writeln!(s, "{v}");
    }
    let _ = writeln!(s, "{} checks, {failed} failed", verdicts.len());
    fs::write(out.join("summary.txt"), &s)?;
    print!("{s}");

    Manifest {
        command: "verify".into(),
        version: version(),
        suite: Some(name.into()),
        config: None,
        master_seed: opts.seed,
        paths,
        seed_derivation: SEED_DERIVATION.into(),
        path_seeds: Vec::new(),
        outputs: vec!["verdicts.jsonl".into(), "summary.txt".into()],
    }
    .save(out)?;
    Ok(if failed == 0 { EXIT_OK } else { EXIT_CHECK_FAILED })
}

/// Reruns the manifest's command into `out` and compares every recorded
/// output with the original next to the manifest.
pub fn replay(manifest_path: &Path, out: Option<PathBuf>, exec: Execution) -> Result<i32> {
    let m = Manifest::load(manifest_path)?;
    let src = manifest_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let out = out.unwrap_or_else(|| src.join("replay"));
    let config = || -> Result<RunConfig> {
        let text = m.config.as_deref().ok_or_else(|| Error::Malformed("manifest has no config".into()))?;
        RunConfig::parse(text)
    };
    let code = match m.command.as_str() {
        "simulate" => simulate(&config()?, &out, exec)?,
        "fixed-point" => fixed_point(&config()?, &out, exec)?,
        "verify" => {
            let name = m.suite.as_deref().ok_or_else(|| Error::Malformed("manifest has no suite".into()))?;
            verify(name, name.parse()?, Some(m.master_seed), m.paths, &out, exec)?
        }
        other => return Err(Error::Malformed(format!("unknown command '{other}' in manifest"))),
    };
    let mut mismatches = 0;
    for name in m.outputs.iter().map(String::as_str).chain([MANIFEST]) {
        let same = match (fs::read(src.join(name)), fs::read(out.join(name))) {
            (Ok(a), Ok(b)) => a == b,
            _ => false,
        };
        if !same {
            eprintln!("replay mismatch: {name}");
            mismatches += 1;
        }
    }
    if mismatches > 0 {
        return Ok(EXIT_CHECK_FAILED);
    }
    println!("replay identical: {} files", m.outputs.len() + 1);
    Ok(code)
}
