use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, warn};

use npinfl_cli::config::{ConfigError, DrawsFormat, Overrides, RunConfig};
use npinfl_cli::{report, run};

#[derive(Parser)]
#[command(
    name = "npinfl",
    version,
    about = "Recursive density forecasts of inflation with Gaussian-process and mixture-error models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config, dry-run the data alignment and print the cell count
    Validate(Common),
    /// Run the model x origin grid; completed cells are skipped
    Run(Common),
    /// Write tables, score files and calibration grids for a run directory
    Report(Common),
    /// Quantile-LASSO summaries of one model's predictive quantiles
    SummarizeLasso(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run config, or a run's manifest.json
    #[arg(long)]
    config: Option<PathBuf>,
    /// artifact directory; for report commands its manifest is used when no config is given
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// master seed
    #[arg(long)]
    seed: Option<u64>,
    /// comma-separated `mean-error` ids, e.g. uc-sv,gp-dpmsv
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    horizons: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    draws_format: Option<DrawsFormat>,
}

impl Common {
    fn load(&self) -> anyhow::Result<RunConfig> {
        let path = match (&self.config, &self.out) {
            (Some(c), _) => c.clone(),
            (None, Some(out)) => out.join("manifest.json"),
            (None, None) => {
                return Err(ConfigError("either --config or --out is required".into()).into())
            }
        };
        let mut cfg = RunConfig::load(&path)?;
        cfg.apply(&Overrides {
            out: self.out.clone(),
            workers: self.workers,
            seed: self.seed,
            models: self.models.clone(),
            horizons: self.horizons.clone(),
            draws_format: self.draws_format,
        });
        Ok(cfg)
    }
}

fn validate(args: &Common) -> anyhow::Result<ExitCode> {
    let cfg = args.load()?;
    let plan = cfg.plan()?;
    println!("config ok: models {}", cfg.model_ids()?.join(","));
    for d in &plan.designs {
        println!(
            "  {} h={}: {} predictors, {} origins ({}..{}), {} models",
            d.variant().slug(),
            d.horizon(),
            d.design.x.ncols(),
            d.origins.len(),
            d.origins[0],
            d.origins[d.origins.len() - 1],
            d.models.len()
        );
    }
    println!("cells: {}", plan.cell_count());
    Ok(ExitCode::SUCCESS)
}

fn run_cmd(args: &Common) -> anyhow::Result<ExitCode> {
    let cfg = args.load()?;
    let plan = cfg.plan()?;
    let summary = run::run_grid(&cfg, &plan)?;
    println!(
        "cells: {} total, {} run, {} reused, {} short-window, {} failed",
        summary.total,
        summary.executed,
        summary.reused,
        summary.skipped,
        summary.failed.len()
    );
    let missing = report::report(&cfg, &plan)?;
    if let Err(e) = report::summarize_lasso(&cfg, &plan) {
        warn!("LASSO summary skipped: {e:#}");
    }
    for (key, msg) in &summary.failed {
        eprintln!("failed: {key}: {msg}");
    }
    Ok(if summary.failed.is_empty() && missing == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn report_cmd(args: &Common) -> anyhow::Result<ExitCode> {
    let cfg = args.load()?;
    let plan = cfg.plan()?;
    let missing = report::report(&cfg, &plan)?;
    if let Err(e) = report::summarize_lasso(&cfg, &plan) {
        warn!("LASSO summary skipped: {e:#}");
    }
    if missing > 0 {
        eprintln!("{missing} grid cells have no results; see gaps.csv");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn lasso_cmd(args: &Common) -> anyhow::Result<ExitCode> {
    let cfg = args.load()?;
    let plan = cfg.plan()?;
    let files = report::summarize_lasso(&cfg, &plan)?;
    for f in &files {
        println!("{}", f.display());
    }
    Ok(if files.is_empty() {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate(a) => validate(a),
        Command::Run(a) => run_cmd(a),
        Command::Report(a) => report_cmd(a),
        Command::SummarizeLasso(a) => lasso_cmd(a),
    };
    match result {
        Ok(code) => code,
        Err(e) if e.downcast_ref::<ConfigError>().is_some() => {
            error!("{e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            error!("{e:#}");
            ExitCode::from(1)
        }
    }
}
