use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use svdd_core::error::Error;
use svdd_cli::{config, harness};

/// Experiment runner for reward-guided decoding on tractable toy diffusion
/// models.
#[derive(Parser)]
#[command(name = "svdd", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its artifacts.
    Run { config: PathBuf },
    /// Run one experiment per candidate count M and emit sweep.csv.
    SweepM {
        config: PathBuf,
        /// Comma-separated list of M values, e.g. --m 1,2,4,8.
        #[arg(long = "m", value_delimiter = ',', required = true)]
        m: Vec<usize>,
    },
    /// Run several configs over one model and emit a comparison table.
    Compare {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
    },
    /// Emit exact reference tables (model marginal, tilted target).
    Oracle { config: PathBuf },
    /// Train a value function and serialize it.
    TrainValue { config: PathBuf },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Budget(_) => 3,
        Error::Invalid(_)
        | Error::Parse(_)
        | Error::Distribution(_)
        | Error::Unsupported(_)
        | Error::Io(_) => 2,
        Error::Value(_) => 1,
    }
}

fn main() -> ExitCode {
    // Worker count is the only environment control and must not affect
    // outputs; every sampler derives its randomness per sample.
    if let Ok(workers) = std::env::var("SVDD_WORKERS") {
        match workers.parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: SVDD_WORKERS must be a positive integer");
                return ExitCode::from(2);
            }
        }
    }
    let cli = Cli::parse();
    let result = (|| -> svdd_core::Result<()> {
        match &cli.command {
            Command::Run { config } => {
                let cfg = config::load(config)?;
                let summary = harness::run_experiment(&cfg)?;
                println!("{}", summary.stdout_line());
                println!("artifacts: {}", cfg.out.display());
            }
            Command::SweepM { config, m } => {
                let cfg = config::load(config)?;
                let rows = harness::sweep_m(&cfg, m)?;
                for (row, m) in rows.iter().zip(m.iter()) {
                    println!("M={m} {}", row.stdout_line());
                }
                println!("artifacts: {}", cfg.out.join("sweep.csv").display());
            }
            Command::Compare { configs } => {
                let cfgs = configs
                    .iter()
                    .map(|p| config::load(p))
                    .collect::<svdd_core::Result<Vec<_>>>()?;
                let rows = harness::compare(&cfgs)?;
                for row in &rows {
                    println!("{}", row.stdout_line());
                }
                println!("artifacts: {}", cfgs[0].out.join("compare.csv").display());
            }
            Command::Oracle { config } => {
                let cfg = config::load(config)?;
                for path in harness::oracle_cmd(&cfg)? {
                    println!("wrote {}", path.display());
                }
            }
            Command::TrainValue { config } => {
                let cfg = config::load(config)?;
                let path = harness::train_value_cmd(&cfg)?;
                println!("wrote {}", path.display());
            }
        }
        Ok(())
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
