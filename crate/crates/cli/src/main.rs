use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nnpart_cli::run::{cmd_lowerbound, cmd_run, cmd_sweep, load_config};
use nnpart_cli::verify::{run_suite, SUITES};
use nnpart_cli::CliError;

/// Online learning of nearest-neighbor partitions: experiments and checks.
#[derive(Parser)]
#[command(name = "nnpart", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and write the ledger CSV and summary file.
    Run { config: PathBuf },
    /// Run a verification suite: kernels, lp, containment, volume.
    Verify {
        suite: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Run every cell of the config's grid and write one summary row each.
    Sweep { config: PathBuf },
    /// Run the lower-bound adversary episode.
    Lowerbound { config: PathBuf },
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("nnpart: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => match load_config(&config).and_then(|c| cmd_run(&c)) {
            Ok(o) => {
                println!("rounds={} total_loss={} mistakes={}", o.ledger.rounds(), o.ledger.total_loss, o.ledger.mistakes);
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Lowerbound { config } => match cmd_lowerbound(&config) {
            Ok(o) => {
                println!("rounds={} total_loss={} mistakes={}", o.ledger.rounds(), o.ledger.total_loss, o.ledger.mistakes);
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Sweep { config } => match cmd_sweep(&config) {
            Ok((cells, ok)) => {
                println!("{ok} of {cells} cells succeeded");
                if cells > 0 && ok == 0 {
                    ExitCode::from(3)
                } else {
                    ExitCode::SUCCESS
                }
            }
            Err(e) => fail(e),
        },
        Command::Verify { suite, seed } => match run_suite(&suite, seed) {
            None => {
                eprintln!("nnpart: unknown suite '{suite}' (expected one of {})", SUITES.join(", "));
                ExitCode::from(2)
            }
            Some(Err(e)) => fail(CliError::Runtime(e)),
            Some(Ok(checks)) => {
                for c in &checks {
                    println!("{c}");
                }
                if checks.iter().all(|c| c.passed) {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                }
            }
        },
    }
}
