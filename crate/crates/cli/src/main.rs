use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use iwar_cli::{execute, Invocation, Mode};

/// Simulate, filter and fit inverse Wishart autoregressive volatility models.
#[derive(Debug, Parser)]
#[command(name = "iwar", version)]
struct Cli {
    #[arg(value_enum)]
    mode: Mode,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    chains: Option<usize>,
    /// Output directory (overrides io.output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let inv = Invocation { mode: cli.mode, config: cli.config, seed: cli.seed, chains: cli.chains, out: cli.out };
    match execute(&inv) {
        Ok(outcome) => {
            match &outcome.report {
                Some(r) => println!("{}", serde_json::to_string_pretty(r).expect("report serializes")),
                None => {
                    for f in &outcome.files {
                        println!("{}", f.display());
                    }
                }
            }
            if outcome.aborted_chains > 0 {
                eprintln!("iwar: {} chain(s) stopped on a numeric failure; see acceptance.json", outcome.aborted_chains);
                ExitCode::from(4)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("iwar: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
