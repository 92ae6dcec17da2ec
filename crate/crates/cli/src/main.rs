//! `causal-sphere`: batch driver for minimization, τ sweeps, certificate
//! diagnostics and kernel verification.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 non-convergence,
//! 4 certificate failure, 5 I/O error.

mod checks;
mod commands;
mod config;
mod failure;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Optional rayon pool size. Results do not depend on it.
const THREADS_ENV: &str = "CAUSAL_SPHERE_THREADS";

#[derive(Parser, Debug)]
#[command(name = "causal-sphere", version, about = "Causal variational principle on the 2-sphere")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Only log errors.
    #[arg(short, long, global = true)]
    quiet: bool,
}

#[derive(Args, Debug, Default)]
pub struct Overrides {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Grid resolution (optimizer grid, or residual grid for `diagnose`).
    #[arg(long)]
    pub grid: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub restarts: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Fault {
    /// Perturb the degree-2 harmonic coefficient.
    Nu2,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Minimize the action at one τ.
    Optimize(Overrides),
    /// Minimize over a list of τ values, warm-starting each from the last.
    Sweep {
        #[command(flatten)]
        overrides: Overrides,
        /// Comma-separated τ values.
        #[arg(long, value_delimiter = ',')]
        taus: Option<Vec<f64>>,
    },
    /// Run the certificate suite on a saved measure.
    Diagnose {
        /// Measure file (JSON).
        measure: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        /// Evaluate at this τ even if the file records another.
        #[arg(long)]
        override_tau: Option<f64>,
    },
    /// Check the kernel identities and sign lemmas.
    VerifyKernel {
        #[command(flatten)]
        overrides: Overrides,
        /// Comma-separated τ values.
        #[arg(long, value_delimiter = ',')]
        taus: Option<Vec<f64>>,
        /// Deliberately corrupt the kernel (the suite must then fail).
        #[arg(long, value_enum)]
        inject_fault: Option<Fault>,
    },
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = if quiet {
        "error"
    } else {
        match verbose {
            0 => "warn",
            1 => "info",
            _ => "debug",
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
}

fn init_threads() {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return;
    };
    match value.parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("{THREADS_ENV}: {e}");
            }
        }
        _ => log::warn!("ignoring {THREADS_ENV}={value:?}: expected a positive integer"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose, cli.quiet);
    init_threads();
    let result = match cli.command {
        Command::Optimize(o) => commands::optimize(&o),
        Command::Sweep { overrides, taus } => commands::sweep(&overrides, taus),
        Command::Diagnose { measure, overrides, override_tau } => {
            commands::diagnose(measure, &overrides, override_tau)
        }
        Command::VerifyKernel { overrides, taus, inject_fault } => {
            commands::verify_kernel(&overrides, taus, inject_fault)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
