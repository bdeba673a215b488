//! Command-line front end.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::dataset::{self, DataError, DataTable, Group};
use crate::harness::{
    aggregate, run_experiment, skipped_fraction, write_provenance, write_report, write_results,
    write_summary, ConfigError, DatasetSource, ExperimentConfig, HarnessError, ReportFormat,
};

pub const SEED_ENV: &str = "AUDITBENCH_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "auditbench",
    version,
    about = "Simulated fairness audits under degraded data access"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a config and print one diagnostic per problem.
    Validate { config: PathBuf },
    /// Write the configured benchmark dataset to `<out>/dataset.csv`.
    GenData {
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run the experiment grid and write results, summary and provenance.
    Run {
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        jobs: u64,
        /// Overrides `master_seed` and the environment variable.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Render overlap tables and plot data from a results directory.
    Report {
        dir: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Md)]
        format: Format,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Md,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0:.1}% of records were skipped")]
    Degenerate(f64),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Degenerate(_) => 4,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io(e) => CliError::Io(format!("cannot read config: {e}")),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io(e) => CliError::Io(e.to_string()),
            DataError::Csv(e) if e.is_io_error() => CliError::Io(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(e) => e.into(),
            HarnessError::Data(e) => e.into(),
            other @ (HarnessError::Io(_)
            | HarnessError::Csv(_)
            | HarnessError::MissingResults(_)) => CliError::Io(other.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn base_dir(config_path: &Path) -> &Path {
    config_path.parent().unwrap_or(Path::new("."))
}

fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    if !path.is_file() {
        return Err(CliError::Io(format!(
            "cannot read config {}",
            path.display()
        )));
    }
    Ok(ExperimentConfig::load(path)?)
}

/// Checks the config and its dataset exactly as `run` would. Returns the
/// diagnostics on failure.
pub fn cmd_validate(config_path: &Path) -> Result<(), CliError> {
    let config = load_config(config_path)?;
    config.validate()?;
    if let DatasetSource::Csv { .. } = config.dataset {
        config.dataset.load(base_dir(config_path))?;
    }
    Ok(())
}

/// Per-group count and base rate of the target.
pub fn base_rates(table: &DataTable) -> [(Group, usize, f64); 2] {
    [Group::Privileged, Group::Underprivileged].map(|g| {
        let (n, pos) = table
            .groups()
            .iter()
            .zip(table.targets())
            .filter(|(h, _)| **h == g)
            .fold((0usize, 0usize), |(n, p), (_, &y)| {
                (n + 1, p + usize::from(y))
            });
        (
            g,
            n,
            if n == 0 {
                f64::NAN
            } else {
                pos as f64 / n as f64
            },
        )
    })
}

pub fn cmd_gen_data(
    config_path: &Path,
    out_dir: &Path,
    mut stdout: impl Write,
) -> Result<PathBuf, CliError> {
    let config = load_config(config_path)?;
    let DatasetSource::Benchmark(spec) = &config.dataset else {
        return Err(CliError::Config(
            "gen-data needs dataset.kind = \"benchmark\"".into(),
        ));
    };
    spec.validate()?;
    let table = dataset::generate_benchmark(spec)?;
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join("dataset.csv");
    dataset::save_csv(&table, &path)?;
    writeln!(stdout, "rows: {}", table.n_rows())?;
    let schema = table.schema();
    for (g, n, rate) in base_rates(&table) {
        let name = match g {
            Group::Privileged => &schema.privileged_value,
            Group::Underprivileged => &schema.underprivileged_value,
        };
        writeln!(stdout, "base_rate {name}: {rate:.6} ({n} rows)")?;
    }
    Ok(path)
}

/// Resolves the master seed: flag, then environment, then config.
pub fn resolve_seed(
    config_seed: u64,
    flag: Option<u64>,
    env: Option<&str>,
) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match env {
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{SEED_ENV}={v} is not an unsigned integer"))),
        None => Ok(config_seed),
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn cmd_run(
    config_path: &Path,
    out_dir: &Path,
    jobs: usize,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let mut config = load_config(config_path)?;
    config.master_seed = resolve_seed(
        config.master_seed,
        seed,
        std::env::var(SEED_ENV).ok().as_deref(),
    )?;
    config.validate()?;
    let table = config.dataset.load(base_dir(config_path))?;
    let started = unix_now();
    let result = run_experiment(&config, &table, jobs)?;
    let finished = unix_now();
    fs::create_dir_all(out_dir)?;
    write_results(&result, fs::File::create(out_dir.join("results.csv"))?)?;
    let rows = aggregate(std::slice::from_ref(&result))?;
    write_summary(&rows, fs::File::create(out_dir.join("summary.csv"))?)?;
    write_provenance(
        &result,
        &[("started", started), ("finished", finished)],
        fs::File::create(out_dir.join("provenance.txt"))?,
    )?;
    let skipped = skipped_fraction(&result);
    if skipped > 0.5 {
        return Err(CliError::Degenerate(100.0 * skipped));
    }
    Ok(())
}

pub fn cmd_report(dir: &Path, format: Format) -> Result<Vec<PathBuf>, CliError> {
    let format = match format {
        Format::Csv => ReportFormat::Csv,
        Format::Md => ReportFormat::Md,
    };
    Ok(write_report(dir, format)?)
}

/// Runs a parsed command and returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    let outcome = match cli.command {
        Command::Validate { config } => cmd_validate(&config).map(|()| println!("OK")),
        Command::GenData { config, out } => {
            cmd_gen_data(&config, &out, std::io::stdout().lock()).map(|_| ())
        }
        Command::Run {
            config,
            out,
            jobs,
            seed,
        } => cmd_run(&config, &out, jobs as usize, seed),
        Command::Report { dir, format } => cmd_report(&dir, format).map(|paths| {
            for p in paths {
                println!("{}", p.display());
            }
        }),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
