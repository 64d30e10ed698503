use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use convolve_hf::cli::{self, Command, ExitCode, RunOptions};

#[derive(Clone, Copy, ValueEnum)]
enum Cmd {
    Scf,
    ExtendSweep,
    Residuals,
    Expand,
    Verify,
}

/// Grid Hartree-Fock and Poisson-kernel convolution studies.
#[derive(Parser)]
#[command(name = "convolve-hf", version)]
struct Args {
    #[arg(value_enum)]
    command: Cmd,
    /// Path to a `key = value` run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; falls back to $CONVOLVE_HF_OUT, then `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `grid.n`.
    #[arg(long)]
    grid_n: Option<usize>,
    /// Errors only on stderr, nothing on stdout.
    #[arg(long)]
    quiet: bool,
}

fn main() -> std::process::ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { ExitCode::Config as u8 } else { 0 };
            let _ = e.print();
            return std::process::ExitCode::from(code);
        }
    };
    let level = if args.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let command = match args.command {
        Cmd::Scf => Command::Scf,
        Cmd::ExtendSweep => Command::ExtendSweep,
        Cmd::Residuals => Command::Residuals,
        Cmd::Expand => Command::Expand,
        Cmd::Verify => Command::Verify,
    };
    let opts = RunOptions { out: args.out, grid_n: args.grid_n, quiet: args.quiet };
    std::process::ExitCode::from(cli::run(command, &args.config, &opts) as u8)
}
