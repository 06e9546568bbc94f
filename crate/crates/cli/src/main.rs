use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use trendpulse_cli::{execute, Overrides, PipelineConfig, Stage};

#[derive(Parser)]
#[command(name = "trendpulse", version, about = "Topic, sentiment and trend analysis for social-media posts")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Time buckets, e.g. 2014-2017,2018-2020.
    #[arg(long, global = true)]
    buckets: Option<String>,

    /// Months to forecast.
    #[arg(long, global = true)]
    forecast_horizon: Option<usize>,

    /// Series to forecast: pp or volume.
    #[arg(long, global = true)]
    series: Option<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Parse, deduplicate and filter raw records.
    Ingest,
    /// Cluster posts and build the topic tables.
    Topics,
    /// Score sentiment and build monthly Pulse Potential series.
    Score,
    /// Fit, forecast and classify every topic series.
    Forecast,
    /// All stages in order.
    Run,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let Some(config) = cli.config else {
        eprintln!("error: --config is required");
        return ExitCode::from(5);
    };
    let overrides = Overrides {
        out: cli.out,
        workers: cli.workers,
        buckets: cli.buckets,
        forecast_horizon: cli.forecast_horizon,
        series: cli.series,
    };
    let stage = match cli.command {
        Command::Ingest => Stage::Ingest,
        Command::Topics => Stage::Topics,
        Command::Score => Stage::Score,
        Command::Forecast => Stage::Forecast,
        Command::Run => Stage::Run,
    };
    let result = PipelineConfig::load(&config, &overrides).and_then(|cfg| execute(stage, &cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
