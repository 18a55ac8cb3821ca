mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dfshift::{Fault, Level};

use crate::error::CliError;

/// Environment variable holding the worker thread count.
const THREADS_ENV: &str = "DFSHIFT_NUM_THREADS";

#[derive(Parser)]
#[command(name = "dfshift", version, about = "Symmetry-shifted double factorization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Fast,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    ShiftSignFlip,
}

#[derive(Subcommand)]
enum Command {
    /// Standard double factorization of an FCIDUMP file.
    Factorize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long = "rank")]
        rank: usize,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Joint optimization of the shift and the factors.
    Optimize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long = "rank")]
        rank: usize,
        /// OptimizationConfig as JSON; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Dense-operator invariant suites.
    Verify {
        #[arg(long, value_enum, default_value = "fast")]
        level: LevelArg,
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<FaultArg>,
    },
    /// Prints the run table of a summary or report JSON file.
    Report {
        #[arg(long)]
        input: PathBuf,
    },
}

fn init_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Input(format!("{THREADS_ENV} must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Input(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Factorize { input, rank, out } => commands::factorize(&input, rank, &out),
        Command::Optimize {
            input,
            rank,
            config,
            out,
            seed,
        } => {
            let cfg = commands::load_config(config.as_deref(), seed)?;
            commands::optimize(&input, rank, cfg, &out)
        }
        Command::Verify { level, inject_fault } => {
            let level = match level {
                LevelArg::Fast => Level::Fast,
                LevelArg::Full => Level::Full,
            };
            let fault = inject_fault.map(|FaultArg::ShiftSignFlip| Fault::ShiftSignFlip);
            commands::verify(level, fault)
        }
        Command::Report { input } => commands::report(&input),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
