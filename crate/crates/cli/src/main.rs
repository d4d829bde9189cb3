//! `codband` command-line driver.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use codband::runner::{self, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "codband",
    version,
    about = "Clustered non-stationary bandit simulations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (replication, policy) cell and write regret curves.
    Simulate(Common),
    /// Run the `[[grid]]` rows of the config and write a summary table.
    Grid(Common),
    /// Replay a uniformly logged event file through the configured policies.
    Replay {
        #[command(flatten)]
        common: Common,
        /// Event log to replay.
        #[arg(long)]
        log: PathBuf,
    },
    /// Generate a uniform-random event log from the configured environment.
    GenLog(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; the built-in desk-scale setup when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of replications.
    #[arg(long)]
    reps: Option<usize>,
    /// Comma-separated policy names, replacing the config's list.
    #[arg(long, value_delimiter = ',')]
    policies: Option<Vec<String>>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::desk_default(),
        };
        if let Some(seed) = self.seed {
            config.master_seed = seed;
        }
        if let Some(out) = &self.out {
            config.output_dir = Some(out.clone());
        }
        if let Some(reps) = self.reps {
            config.replications = reps;
        }
        if let Some(names) = &self.policies {
            let names: Vec<&str> = names
                .iter()
                .map(String::as_str)
                .filter(|s| !s.is_empty())
                .collect();
            config.set_policy_names(&names);
        }
        config.validate().context("invalid configuration")?;
        Ok(config)
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let start = Instant::now();
    match cli.command {
        Command::Simulate(common) => {
            let config = common.load()?;
            let manifest = runner::run_experiment(&config)?;
            for path in &manifest.artifacts {
                println!("wrote {}", path.display());
            }
        }
        Command::Grid(common) => {
            let config = common.load()?;
            if config.grid.is_empty() {
                bail!("config has no [[grid]] rows");
            }
            let path = runner::run_table_grid(&config)?;
            println!("wrote {}", path.display());
        }
        Command::Replay { common, log } => {
            let config = common.load()?;
            let results = runner::run_replay(&config, &log)
                .with_context(|| format!("replaying {}", log.display()))?;
            for r in &results {
                println!(
                    "{:<14} matched {:>7}/{:<7} rate {:.4} ± {:.4}  normalized {}",
                    r.policy,
                    r.matched,
                    r.total_events,
                    r.reward_rate,
                    r.standard_error,
                    r.normalized
                        .map_or("n/a".to_string(), |v| format!("{v:.4}"))
                );
            }
        }
        Command::GenLog(common) => {
            let config = common.load()?;
            let path = runner::run_gen_log(&config)?;
            println!("wrote {}", path.display());
        }
    }
    eprintln!("done in {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
