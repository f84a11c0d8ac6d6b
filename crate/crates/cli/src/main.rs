//! `nestprog`: synthetic data, cohort building, nested CV runs and report
//! rendering from the command line.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
//! failure. Failures print one `error[<class>] <message>` line on stderr.

mod commands;
mod config;
mod error;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::ConfigMap;
use crate::error::{CliError, Result};

#[derive(Parser)]
#[command(name = "nestprog", version, about = "Nested cross-validation for cognitive-decline prognosis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic dataset (or a CN/MCI study with --study).
    Synth(SynthCmd),
    /// Build the CN_b and MCI_b datasets from predictors and diagnosis records.
    Cohort(CohortCmd),
    /// Run nested CV (repeated when repeats >= 2) and write all reports.
    Run(RunArgs),
    /// Repeated nested CV; repeats default to 100.
    Repeat(RunArgs),
    /// Re-render metrics.csv and roc_points.csv from stored OOF predictions.
    Report(ReportCmd),
}

#[derive(Args)]
struct SynthCmd {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 285)]
    n: usize,
    #[arg(long, default_value_t = 0.10)]
    positive_fraction: f64,
    #[arg(long, default_value_t = 1.5)]
    effect: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write predictors.csv and records.csv for a two-cohort study instead.
    #[arg(long)]
    study: bool,
    #[arg(long, default_value_t = 392)]
    mci_n: usize,
    #[arg(long, default_value_t = 0.40)]
    mci_positive_fraction: f64,
}

#[derive(Args)]
struct CohortCmd {
    #[arg(long)]
    predictors: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// Every flag overrides the same key from `--config`.
#[derive(Args)]
struct RunArgs {
    /// Plain-text `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    records: Option<PathBuf>,
    /// cn_b, mci_b or prebuilt.
    #[arg(long)]
    cohort: Option<String>,
    #[arg(long)]
    algorithm: Option<String>,
    /// full, full-expanded, custom, cn-optimum, mci-optimum or desk.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    neighbors: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    repeats: Option<String>,
    #[arg(long)]
    workers: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    permutation_repeats: Option<String>,
    /// Any configuration key, e.g. `--set grid.cp_index=1,50,200`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct ReportCmd {
    /// A run directory holding oof_probabilities.csv.
    #[arg(long, conflicts_with = "oof")]
    run: Option<PathBuf>,
    #[arg(long)]
    oof: Option<PathBuf>,
    /// Model name for the metrics row; read from the run manifest when omitted.
    #[arg(long)]
    name: Option<String>,
    /// Output directory; defaults to the directory holding the OOF file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn absolute(p: &Path) -> Result<String> {
    let abs = std::path::absolute(p).map_err(|e| CliError::Config(format!("bad path `{}`: {e}", p.display())))?;
    Ok(abs.to_string_lossy().into_owned())
}

impl RunArgs {
    fn config_map(&self, repeat_mode: bool) -> Result<ConfigMap> {
        let mut map = match &self.config {
            Some(path) => ConfigMap::load(path)?,
            None => ConfigMap::default(),
        };
        let mut flags = ConfigMap::default();
        for (key, path) in [("data", &self.data), ("schema", &self.schema), ("records", &self.records), ("out", &self.out)] {
            if let Some(p) = path {
                flags.set(key, absolute(p)?)?;
            }
        }
        let values = [
            ("cohort", &self.cohort),
            ("algorithm", &self.algorithm),
            ("grid", &self.grid),
            ("neighbors", &self.neighbors),
            ("seed", &self.seed),
            ("repeats", &self.repeats),
            ("workers", &self.workers),
            ("permutation_repeats", &self.permutation_repeats),
        ];
        for (key, v) in values {
            if let Some(v) = v {
                flags.set(key, v.clone())?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            flags.set(k.trim(), v.trim())?;
        }
        map.overlay(flags);
        if repeat_mode && map.get("repeats").is_none() {
            map.set("repeats", "100")?;
        }
        Ok(map)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => commands::synth(&commands::SynthArgs {
            out: a.out,
            n: a.n,
            positive_fraction: a.positive_fraction,
            effect: a.effect,
            seed: a.seed,
            study_mci: a.study.then_some((a.mci_n, a.mci_positive_fraction)),
        }),
        Command::Cohort(a) => commands::cohort(&a.predictors, &a.schema, &a.records, &a.out),
        Command::Run(a) => commands::execute(&a.config_map(false)?.resolve()?),
        Command::Repeat(a) => {
            let cfg = a.config_map(true)?.resolve()?;
            if cfg.repeats < 2 {
                return Err(CliError::Config(format!("repeat needs repeats >= 2, got {}", cfg.repeats)));
            }
            commands::execute(&cfg)
        }
        Command::Report(a) => {
            let (oof, dir) = match (&a.run, &a.oof) {
                (Some(run), _) => (run.join("oof_probabilities.csv"), run.clone()),
                (None, Some(oof)) => (oof.clone(), oof.parent().map(Path::to_path_buf).unwrap_or_default()),
                (None, None) => return Err(CliError::Config("report needs --run or --oof".into())),
            };
            let name = a
                .name
                .or_else(|| commands::manifest_model_name(&dir))
                .unwrap_or_else(|| "Model".to_string());
            commands::report(&oof, &name, a.out.as_deref().unwrap_or(&dir))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
