//! `dsprt`: calibrate, simulate, sweep and check decentralized SPRT systems.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use dsprt_core::experiments::{
    run_sweep, run_theory_checks, write_csv, CalibrationRow, CsvRecord, RunConfig,
};
use dsprt_core::kernel::{hypothesis_root, run_trials};
use dsprt_core::rng::derive_seed;
use dsprt_core::{run_dsprt_trial, Error, FusionCalibration};

const DEFAULT_SEED: u64 = 1;
const DEFAULT_TRIALS: u64 = 1_000;

#[derive(Parser, Debug)]
#[command(name = "dsprt", version, about = "Decentralized SPRT simulator and calibration toolkit")]
struct Cli {
    /// TOML run configuration; unknown keys are rejected.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed (overrides the file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Trial count (overrides the file and section defaults).
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// CSV destination; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Per-sensor quantization tables and fusion thresholds.
    Calibrate,
    /// Independent D-SPRT trials, one CSV row each.
    Simulate,
    /// Operating characteristics over the `[sweep]` grid.
    Sweep,
    /// Monte Carlo checks of the analytic bounds; exit code 2 on failure.
    Check,
}

/// What a subcommand reports besides its CSV.
enum Outcome {
    Done,
    ChecksFailed(usize),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed(n)) => {
            eprintln!("error: {n} theory check(s) failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            let calibration = e.chain().any(|c| c.downcast_ref::<Error>().is_some_and(Error::is_calibration_failure));
            ExitCode::from(if calibration { 3 } else { 1 })
        }
    }
}

fn run(cli: &Cli) -> Result<Outcome> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("--threads")?;
    }
    let config = match &cli.config {
        Some(p) => Some(RunConfig::load(p)?),
        None => None,
    };
    let seed = cli.seed.or(config.as_ref().and_then(|c| c.seed)).unwrap_or(DEFAULT_SEED);
    // The file's top-level `trials` is the simulate count; sections carry their own.
    let trials = cli.trials;
    match cli.command {
        Command::Calibrate => calibrate(require(&config)?, seed, trials, cli.out.as_deref()),
        Command::Simulate => {
            let config = require(&config)?;
            simulate(config, seed, trials.or(config.trials), cli.out.as_deref())
        }
        Command::Sweep => sweep(require(&config)?, seed, trials, cli.out.as_deref()),
        Command::Check => check(config.as_ref(), seed, trials, cli.out.as_deref()),
    }
}

fn require(config: &Option<RunConfig>) -> Result<&RunConfig> {
    config.as_ref().ok_or_else(|| Error::Config("this subcommand needs --config <file>".into()).into())
}

fn emit<T: CsvRecord>(out: Option<&Path>, rows: &[T]) -> Result<()> {
    match out {
        Some(p) => {
            let f = std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
            write_csv(std::io::BufWriter::new(f), rows)?;
        }
        None => write_csv(std::io::stdout().lock(), rows)?,
    }
    Ok(())
}

fn report_fusion(cal: &FusionCalibration) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(
        err,
        "fusion thresholds: a_tilde={:.6} b_tilde={:.6} (alpha_hat={:.3e} <= {:.3e}, beta_hat={:.3e} <= {:.3e}, n={} per hypothesis)",
        cal.thresholds.lower, cal.thresholds.upper, cal.alpha.value, cal.alpha.upper, cal.beta.value, cal.beta.upper, cal.n_mc
    );
}

fn calibrate(config: &RunConfig, seed: u64, trials: Option<u64>, out: Option<&Path>) -> Result<Outcome> {
    let system = config.system()?;
    let mut spec = config.calibration.clone();
    if let Some(n) = trials {
        spec.n_trials = n;
    }
    let tables = match system.mode()? {
        dsprt_core::Mode::Discrete { .. } => None,
        // Continuous mode does not need the tables to run, but they are still the calibration report.
        dsprt_core::Mode::Continuous { .. } => Some(system.quantization_tables(spec.n_mc, derive_seed(seed, &[1]))?),
    };
    let prepared = system.prepare(&spec, seed)?;
    if let Some(cal) = &prepared.fusion {
        report_fusion(cal);
    }
    let tables = prepared.tables.or(tables).unwrap_or_default();
    let rows: Vec<CalibrationRow> = tables.into_iter().enumerate().map(|(sensor, table)| CalibrationRow { sensor, table }).collect();
    emit(out, &rows)?;
    Ok(Outcome::Done)
}

fn simulate(config: &RunConfig, seed: u64, trials: Option<u64>, out: Option<&Path>) -> Result<Outcome> {
    let system = config.system()?;
    let prepared = system.prepare(&config.calibration, seed)?;
    if let Some(cal) = &prepared.fusion {
        report_fusion(cal);
    }
    let cfg = prepared.config;
    let n = trials.unwrap_or(DEFAULT_TRIALS);
    let results = run_trials(n, hypothesis_root(seed, cfg.truth()), |s| run_dsprt_trial(&cfg, s))?;
    emit(out, &results)?;
    Ok(Outcome::Done)
}

fn sweep(config: &RunConfig, seed: u64, trials: Option<u64>, out: Option<&Path>) -> Result<Outcome> {
    let mut spec = config.sweep.clone().unwrap_or_default();
    if let Some(n) = trials {
        spec.n_trials = n;
    }
    let rows = run_sweep(config.system()?, &spec, &config.calibration, seed)?;
    emit(out, &rows)?;
    Ok(Outcome::Done)
}

fn check(config: Option<&RunConfig>, seed: u64, trials: Option<u64>, out: Option<&Path>) -> Result<Outcome> {
    let mut spec = config.and_then(|c| c.check.clone()).unwrap_or_default();
    if let Some(n) = trials {
        spec.n_trials = n;
        spec.continuous_trials = n;
    }
    let report = run_theory_checks(&spec, seed)?;
    emit(out, &report.results)?;
    let failed = report.failures().count();
    Ok(if failed == 0 { Outcome::Done } else { Outcome::ChecksFailed(failed) })
}
