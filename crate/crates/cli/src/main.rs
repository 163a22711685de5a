use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use drama_core::control::{AllocatorKind, ControlConfig};
use drama_core::harness::suite::{run_single, run_suite, SuiteSummary};
use drama_core::harness::{HarnessError, Manifest, Scenario};

#[derive(Debug, Parser)]
#[command(name = "drama", version, about = "Run task-allocation scenarios in the household simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario for a range of seeds.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "drama")]
        allocator: AllocatorKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        episodes: u64,
        #[arg(long)]
        out: PathBuf,
        /// Write per-episode traces to <out>/trace/.
        #[arg(long)]
        trace: bool,
        /// JSON file replacing the scenario's scheduler config block.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run every entry of a suite manifest.
    Suite {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: &Path) -> Result<ControlConfig, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|source| HarnessError::Json { path: path.display().to_string(), source })
}

fn execute(command: Command) -> Result<SuiteSummary, HarnessError> {
    match command {
        Command::Run { scenario, allocator, seed, episodes, out, trace, config } => {
            if episodes == 0 {
                return Err(HarnessError::Config("--episodes must be at least 1".into()));
            }
            let mut scenario = Scenario::load(&scenario)?;
            if let Some(path) = config {
                scenario = scenario.with_config(load_config(&path)?)?;
            }
            run_single(&scenario, allocator, seed, episodes, &out, trace)
        }
        Command::Suite { manifest, out } => {
            let parsed = Manifest::load(&manifest)?;
            let base = manifest.parent().unwrap_or(Path::new("."));
            run_suite(&parsed, base, &out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(summary) => {
            for row in &summary.rows {
                println!(
                    "{} {}: {}/{} succeeded, median TS {}",
                    row.scenario,
                    row.allocator,
                    row.successes,
                    row.episodes,
                    row.median_ts.map_or_else(|| "-".to_owned(), |v| format!("{v:.1}")),
                );
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::error!("{e}");
            eprintln!("drama: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
