//! Command-line front end: `predict`, `simulate`, `minima`, `sweep`,
//! `validate` and `mse`, each writing `<command>.csv` plus
//! `<command>.meta.json` into the output directory.

pub mod commands;
pub mod config;
pub mod output;
pub mod validate;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};

use commands::{run_minima, run_table, Plan};
use config::RunConfig;
use output::{output_paths, write_metadata, write_minima_csv, write_results_csv, Metadata};

pub const THREADS_ENV: &str = "MLRES_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] crate::Error),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("output error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Validation(_) => EXIT_VALIDATION,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mlres", version, about = "Resolution probability and MSE of ML direction-of-arrival estimators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for Monte Carlo.
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Cmd {
    /// Predicted resolution probability and MSE per method and SNR.
    Predict,
    /// Prediction alongside empirical resolution probability.
    Simulate,
    /// Local minima of the deterministic cost surfaces.
    Minima,
    /// Prediction, simulation and empirical MSE over the SNR grid.
    Sweep,
    /// Oracle self-checks; exits nonzero on any failure.
    Validate,
    /// Predicted and empirical MSE.
    Mse,
}

impl Cmd {
    pub fn name(self) -> &'static str {
        match self {
            Cmd::Predict => "predict",
            Cmd::Simulate => "simulate",
            Cmd::Minima => "minima",
            Cmd::Sweep => "sweep",
            Cmd::Validate => "validate",
            Cmd::Mse => "mse",
        }
    }
}

/// Configuration used by `validate` when no file is given: a ten-element
/// quarter-wavelength array with four equal-power sources.
pub fn reference_config() -> RunConfig {
    RunConfig::from_json(
        r#"{
            "array": {"elements": 10, "spacing_wavelengths": 0.25},
            "doas": {"units": "degrees", "values": [16, 18, 60, -50]},
            "snapshots": 100,
            "snr_db": [0]
        }"#,
    )
    .expect("reference config is valid")
}

fn init_threads(n: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::Config("thread count must be positive".into()));
        }
        // a pool may already exist when invoked repeatedly in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let start = Instant::now();
    let cfg = match (&cli.config, cli.command) {
        (Some(p), _) => RunConfig::load(p)?,
        (None, Cmd::Validate) => reference_config(),
        (None, _) => return Err(CliError::Config("--config <path> is required".into())),
    };
    init_threads(cli.threads.or(cfg.threads))?;
    let seed = cli.seed.unwrap_or(cfg.seed);
    let dir = cli.out.clone().or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let name = cli.command.name();
    let (csv_path, meta_path) = output_paths(&dir, name);
    let mut meta = Metadata::new(name, seed, &cfg);

    let mut failure = None;
    match cli.command {
        Cmd::Minima => {
            let (rows, timings) = run_minima(&cfg, seed)?;
            write_minima_csv(&csv_path, cfg.k(), &rows)?;
            meta.timings = timings;
        }
        Cmd::Validate => {
            let checks = validate::run_validate(&cfg, seed)?;
            for c in &checks {
                println!(
                    "{} {:<20} measured={:.3e} tolerance={:.1e} ({:.2}s) {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.check,
                    c.measured,
                    c.tolerance,
                    c.seconds,
                    c.detail
                );
            }
            validate::write_report(&csv_path, &checks)?;
            meta.timings =
                checks.iter().map(|c| output::RowTiming { label: c.check.clone(), seconds: c.seconds }).collect();
            let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.check.as_str()).collect();
            if !failed.is_empty() {
                failure = Some(CliError::Validation(failed.join(", ")));
            }
        }
        cmd => {
            let plan = match cmd {
                Cmd::Predict => Plan::PREDICT,
                Cmd::Simulate => Plan::SIMULATE,
                Cmd::Mse => Plan::MSE,
                _ if cfg.trials == 0 => Plan::PREDICT,
                _ => Plan::FULL,
            };
            let (rows, timings) = run_table(&cfg, seed, plan)?;
            write_results_csv(&csv_path, &rows)?;
            meta.timings = timings;
        }
    }
    meta.total_seconds = start.elapsed().as_secs_f64();
    write_metadata(&meta_path, &meta)?;
    failure.map_or(Ok(()), Err)
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("mlres: {e}");
            e.exit_code()
        }
    }
}

pub fn run_from_env() -> i32 {
    run(std::env::args_os())
}
