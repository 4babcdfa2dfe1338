use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use broyden_lab::runner::{self, sweep, verify};

/// Quasi-Newton convergence experiments checked against their theoretical
/// envelopes.
#[derive(Parser)]
#[command(name = "broyden-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiments of a JSON config (one object or an array).
    Run {
        config: PathBuf,
        /// Maximum number of experiments run at once.
        #[arg(long)]
        jobs: Option<usize>,
        /// Output root; each experiment writes into a subdirectory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Randomized checks of the update identities and one-step inequalities.
    Verify {
        #[arg(long, default_value_t = 8)]
        n_max: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sweep a grid of quadratic instances and write sweep.csv.
    Sweep {
        grid: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { runner::EXIT_MALFORMED } else { runner::EXIT_PASS });
        }
    };
    let code = match cli.command {
        Command::Run { config, jobs, out } => runner::cmd_run(&config, jobs, out.as_deref()),
        Command::Verify { n_max, trials, seed } => verify::cmd_verify(n_max, trials, seed),
        Command::Sweep { grid, out, jobs } => sweep::cmd_sweep(&grid, out.as_deref(), jobs),
    };
    ExitCode::from(code)
}
