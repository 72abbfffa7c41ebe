use anyhow::Result;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "cotrack",
    version,
    about = "Multi-robot dynamic object tracking simulator"
)]
struct Cli {
    /// Worker threads for sweeps (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its log and summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario's rng_seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run every mode × level × seed cell of a sweep spec.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the base scenario's rng_seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Recompute metrics from an existing run log directory.
    Eval {
        log_dir: PathBuf,
        /// Write summary tables here instead of only printing them.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        d_match: Option<f64>,
        #[arg(long)]
        window: Option<f64>,
    },
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Run { config, out, seed } => {
            cotrack_cli::cmd_run(&config, &out, seed, &mut stdout)?;
        }
        Command::Sweep { config, out, seed } => {
            cotrack_cli::cmd_sweep(&config, &out, seed, &mut stdout)?;
        }
        Command::Eval {
            log_dir,
            out,
            d_match,
            window,
        } => {
            cotrack_cli::cmd_eval(&log_dir, out.as_deref(), d_match, window, &mut stdout)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
