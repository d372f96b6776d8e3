use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pap_core::cli::{
    cmd_compare, cmd_simulate, cmd_solve, cmd_sweep, load_config, render, CliError, OutputFormat,
    Scheme, DEFAULT_SEEDS,
};

#[derive(Parser)]
#[command(
    name = "tangle-pap",
    version,
    about = "Truthful PoW difficulty and transaction weight mechanism for the Tangle"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal difficulty and weight per type for every N in the sweep.
    Solve(Common),
    /// Approval-time metrics of simulated Tangles, per seed.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Scheme::Mechanism)]
        scheme: Scheme,
    },
    /// Solve and simulate across the sweep, averaging over seeds.
    Sweep(Common),
    /// Mechanism vs. fixed linear baseline.
    Compare(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Search every difficulty vector instead of the nondecreasing ones.
    #[arg(long)]
    exhaustive: bool,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
    /// Write to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of consecutive seeds to simulate, starting at the configured seed.
    #[arg(long, default_value_t = DEFAULT_SEEDS)]
    seeds: u64,
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (common, table) = match cli.command {
        Command::Solve(c) => {
            let config = load_config(&c.config)?;
            let table = cmd_solve(&config, c.exhaustive)?;
            (c, (config, table))
        }
        Command::Simulate { common: c, scheme } => {
            let config = load_config(&c.config)?;
            let table = cmd_simulate(&config, c.seeds, scheme)?;
            (c, (config, table))
        }
        Command::Sweep(c) => {
            let config = load_config(&c.config)?;
            let table = cmd_sweep(&config, c.seeds, c.exhaustive)?;
            (c, (config, table))
        }
        Command::Compare(c) => {
            let config = load_config(&c.config)?;
            let table = cmd_compare(&config, c.exhaustive)?;
            (c, (config, table))
        }
    };
    let (config, table) = table;
    let text = render(&table, &config, common.format);
    match common.out {
        Some(path) => fs::write(path, text).map_err(CliError::Output),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(CliError::Output),
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
