use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ici::commands::{self, exit_code, out_dir, EXIT_FAILURE};
use ici::config::ExperimentConfig;
use ici::verify::Suite;
use ici::{IciError, Result};

/// Closed-loop identification experiments.
#[derive(Parser)]
#[command(name = "ici", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate the closed loop and write a training dataset.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed to use; defaults to the first seed of the config.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
    },
    /// Train a model; generates the dataset when --dataset is absent.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
    },
    /// Score a trained run on a fresh test set.
    Evaluate {
        /// Run directory holding checkpoint.json.
        #[arg(long)]
        out: PathBuf,
        /// Defaults to the config echoed into the run directory.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Evaluate the true plant against itself instead of a checkpoint.
        #[arg(long)]
        self_check: bool,
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
    },
    /// Generate, train and evaluate over seeds × strategies × sigmas.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
    },
    /// Run a property suite and print its report as JSON.
    Verify {
        #[arg(long)]
        suite: Suite,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn first_seed(flag: &[u64], cfg: &ExperimentConfig) -> u64 {
    flag.first().copied().unwrap_or(cfg.seeds[0])
}

fn run(cmd: Cmd) -> Result<bool> {
    match cmd {
        Cmd::Generate { config, out, seeds } => {
            let cfg = ExperimentConfig::load(&config)?;
            let seed = first_seed(&seeds, &cfg);
            let dir = out_dir(out.as_deref(), &cfg);
            let hash = commands::generate(&cfg, seed, &dir)?;
            println!("{hash}  {}", dir.display());
        }
        Cmd::Train {
            config,
            dataset,
            out,
            seeds,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let seed = first_seed(&seeds, &cfg);
            let record = commands::train_run(
                &cfg,
                seed,
                dataset.as_deref(),
                &out_dir(out.as_deref(), &cfg),
            )?;
            println!("{}", serde_json::to_string(&record).expect("serializes"));
        }
        Cmd::Evaluate {
            out,
            config,
            self_check,
            seeds,
        } => {
            let cfg = config.as_deref().map(ExperimentConfig::load).transpose()?;
            let report = if self_check {
                let cfg =
                    cfg.ok_or_else(|| IciError::Config("--self-check needs --config".into()))?;
                commands::self_check(&cfg, first_seed(&seeds, &cfg), &out)?
            } else {
                commands::evaluate_run(cfg.as_ref(), &out)?
            };
            println!("{}", serde_json::to_string(&report).expect("serializes"));
        }
        Cmd::Sweep { config, out, seeds } => {
            let cfg = ExperimentConfig::load(&config)?;
            let seeds = if seeds.is_empty() {
                cfg.seeds.clone()
            } else {
                seeds
            };
            let dir = out_dir(out.as_deref(), &cfg);
            let report = commands::sweep(&cfg, &seeds, &dir)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("serializes")
            );
        }
        Cmd::Verify { suite, seed, out } => {
            let report = commands::verify(suite, seed, out.as_deref().map(Path::new))?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("serializes")
            );
            return Ok(report.pass);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match commands::thread_pool() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e) as u8);
        }
    };
    match pool.install(|| run(cli.cmd)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAILURE as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
