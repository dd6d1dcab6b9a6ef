//! Command-line front end for the hybrid reflection modulation simulator.

pub mod config;
pub mod error;
pub mod jobs;
pub mod presets;
pub mod units;
pub mod validate;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use config::ExperimentConfig;
pub use error::CliError;
pub use jobs::{Job, Row};
pub use presets::Figure;

use config::MetricName;

#[derive(Debug, Parser)]
#[command(name = "hrmsim", version, about = "Link-level simulator for hybrid active/passive RIS modulation")]
pub struct Cli {
    /// TOML experiment file; defaults apply to anything it leaves out.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Master seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory. Without it, single runs go to the config's
    /// `output` path or stdout, and presets go to `results/`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Worker threads; all cores by default. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Override one config entry, e.g. `--set surface.elements=256` or
    /// `--set link.tx_power="5 dBm"`. Repeatable; applied in order.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Monte Carlo bit error rate over the sweep.
    Ber,
    /// Union-bound ABEP over the sweep.
    Abep,
    /// Mutual information over the sweep.
    Rate,
    /// Energy efficiency and power consumption over the sweep.
    Energy,
    /// Whatever `sweep.metric` names.
    Sweep,
    /// Recompute the data behind a figure into `<out>/<figure>.csv`.
    Reproduce {
        #[arg(value_enum)]
        figure: Figure,
    },
    /// Check a configuration without running it.
    Validate,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ber => "ber",
            Command::Abep => "abep",
            Command::Rate => "rate",
            Command::Energy => "energy",
            Command::Sweep => "sweep",
            Command::Reproduce { .. } => "reproduce",
            Command::Validate => "validate",
        }
    }
}

/// What a successful run printed, for the caller to decide the exit code.
#[derive(Debug, Default)]
pub struct Outcome {
    /// `validate` found errors.
    pub invalid: bool,
}

fn read_table(path: Option<&Path>) -> Result<toml::Table, CliError> {
    let Some(path) = path else {
        return Ok(toml::Table::new());
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    text.parse()
        .map_err(|e: toml::de::Error| CliError::schema(&path.display().to_string(), e.message().to_string()))
}

fn log_units(cfg: &ExperimentConfig) {
    for (name, watts, dbm) in cfg.power_model().unit_table() {
        log::info!("{name:>14}: {watts:>12.6e} W = {dbm:>8.3} dBm");
    }
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let pool = match cli.threads {
        Some(n) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::schema("--threads", e.to_string()))?,
        ),
        None => None,
    };
    match pool {
        Some(pool) => pool.install(|| execute(cli)),
        None => execute(cli),
    }
}

fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let base = read_table(cli.config.as_deref())?;
    let mut overrides = cli.overrides.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
    }

    if let Command::Reproduce { figure } = &cli.command {
        let jobs = presets::jobs(*figure, &base, &overrides)?;
        if let Some(first) = jobs.first() {
            log_units(&first.config);
        }
        let mut rows = Vec::new();
        for job in &jobs {
            rows.extend(jobs::run(job)?);
        }
        let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("results"));
        fs::create_dir_all(&dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
        let path = dir.join(figure.file_name());
        write_file(&path, &rows)?;
        log::info!("wrote {} rows to {}", rows.len(), path.display());
        return Ok(Outcome::default());
    }

    let mut table = base;
    for o in &overrides {
        config::apply_override(&mut table, o)?;
    }
    let mut cfg = ExperimentConfig::from_table(table)?;
    let metric = match cli.command {
        Command::Ber => Some(MetricName::Ber),
        Command::Abep => Some(MetricName::Abep),
        Command::Rate => Some(MetricName::Rate),
        Command::Energy => Some(MetricName::Energy),
        _ => None,
    };
    if let Some(m) = metric {
        cfg.sweep.metric = m;
    }

    if let Command::Validate = cli.command {
        let report = validate::validate(&cfg)?;
        for finding in &report.findings {
            println!("{finding}");
        }
        return Ok(Outcome {
            invalid: report.has_errors(),
        });
    }

    log_units(&cfg);
    let rows = jobs::run(&Job::new(cfg.scheme.scheme().name(), cfg.clone()))?;
    match (&cli.out, &cfg.output) {
        (Some(dir), _) => {
            fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
            write_file(&dir.join(format!("{}.csv", cli.command.name())), &rows)?;
        }
        (None, Some(path)) => write_file(Path::new(path), &rows)?,
        (None, None) => jobs::write_csv(io::stdout().lock(), &rows)?,
    }
    Ok(Outcome::default())
}

fn write_file(path: &Path, rows: &[Row]) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(|e| CliError::io(format!("creating {}", path.display()), e))?;
    jobs::write_csv(io::BufWriter::new(file), rows)
}
