use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use seqsl::commands::{self, RunInputs, EXIT_INPUT};
use seqsl::ExperimentConfig;

/// One-step ahead sequential Super Learner: simulate panels, run the
/// ensemble, evaluate bounds and verify them by Monte Carlo.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// Master seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a panel and write panel.csv, graph.csv and manifest.json.
    Simulate,
    /// Run the ensemble over a panel.
    Run {
        #[arg(long)]
        panel: Option<PathBuf>,
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Simulation manifest; enables the oracle trajectory.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Print the constants of the bounds for a manifest.
    Bounds {
        manifest: PathBuf,
        /// CSV instead of aligned text.
        #[arg(long)]
        csv: bool,
    },
    /// Monte Carlo verification of the bounds.
    Verify,
    /// Weight matrix and cost ratios from a run directory.
    Report {
        run_dir: PathBuf,
        /// Leading times excluded from the mean ratio.
        #[arg(long, default_value_t = 0)]
        burn_in: usize,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let config = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    Ok(match cli.seed {
        Some(s) => config.with_seed(s),
        None => config,
    })
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let out = |config: Option<&ExperimentConfig>, fallback: &str| {
        cli.out
            .clone()
            .or_else(|| config.and_then(|c| c.output.clone()))
            .unwrap_or_else(|| PathBuf::from(fallback))
    };
    match &cli.command {
        Command::Simulate => {
            let config = load_config(cli)?;
            commands::cmd_simulate(&config, &out(Some(&config), "sim"))
        }
        Command::Run {
            panel,
            graph,
            manifest,
        } => {
            let config = load_config(cli)?;
            let panel = panel
                .clone()
                .or_else(|| config.data.panel.clone())
                .ok_or_else(|| anyhow::anyhow!("no panel given (--panel or data.panel)"))?;
            let inputs = RunInputs {
                panel,
                graph: graph.clone().or_else(|| config.data.graph.clone()),
                manifest: manifest.clone().or_else(|| config.data.manifest.clone()),
            };
            commands::cmd_run(&config, &inputs, &out(Some(&config), "run"))
        }
        Command::Bounds { manifest, csv } => commands::cmd_bounds(manifest, *csv),
        Command::Verify => {
            let config = load_config(cli)?;
            commands::cmd_verify(&config, &out(Some(&config), "verify"))
        }
        Command::Report { run_dir, burn_in } => {
            commands::cmd_report(run_dir, *burn_in, &out(None, &run_dir.join("report").to_string_lossy()))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT as u8)
        }
    }
}
