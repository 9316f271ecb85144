//! `momnet`: simulate measurements, train refiners, reconstruct, diagnose and compare solvers.

mod commands;
mod config;
mod error;
mod output;
mod problem;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::SolverOverrides;
use config::{PhantomKind, SolverKind};
use error::CliError;

#[derive(Parser)]
#[command(name = "momnet", version, about = "Momentum-Net image reconstruction toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SolverFlags {
    /// Solver to run.
    #[arg(long, value_enum)]
    solver: Option<SolverKind>,
    /// Disable extrapolation (same as `--solver momentum-noextrap`).
    #[arg(long)]
    no_extrapolation: bool,
    /// Inner proximal-gradient iterations per BCD-Net layer.
    #[arg(long)]
    inner_iters: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    chi: Option<f64>,
    #[arg(long)]
    n_iter: Option<usize>,
}

impl SolverFlags {
    fn overrides(&self) -> SolverOverrides {
        SolverOverrides {
            solver: self.solver,
            no_extrapolation: self.no_extrapolation,
            inner_iters: self.inner_iters,
            rho: self.rho,
            chi: self.chi,
            n_iter: self.n_iter,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a phantom image as a 16-bit PGM.
    Phantom {
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, value_enum, default_value = "shepp-logan")]
        kind: PhantomArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate measurements for every listed sample.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        noiseless: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one refiner per iteration, greedily.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        solver: SolverFlags,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct every listed sample.
    Reconstruct {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory of `refiner_*.txt` files, overriding `[refiner]`.
        #[arg(long)]
        refiners: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverFlags,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the per-iteration refiner diagnostics (κ, ε, Δ).
    Diagnose {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        refiners: Option<PathBuf>,
        /// Sample pairs per iteration.
        #[arg(long)]
        pairs: Option<usize>,
        #[command(flatten)]
        solver: SolverFlags,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run several configurations side by side and summarize them.
    Compare {
        #[arg(long = "config", required = true)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum PhantomArg {
    SheppLogan,
    Random,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Phantom { size, kind, seed, out } => {
            let kind = match kind {
                PhantomArg::SheppLogan => PhantomKind::SheppLogan,
                PhantomArg::Random => PhantomKind::Random,
            };
            commands::phantom_cmd(size, kind, seed, &out)
        }
        Command::Simulate {
            config,
            seed,
            noiseless,
            out,
        } => commands::simulate_cmd(&config, seed, noiseless, &out),
        Command::Train {
            config,
            seed,
            solver,
            out,
        } => commands::train_cmd(&config, seed, &solver.overrides(), &out),
        Command::Reconstruct {
            config,
            seed,
            refiners,
            solver,
            out,
        } => commands::reconstruct_cmd(&config, seed, &solver.overrides(), refiners.as_deref(), &out),
        Command::Diagnose {
            config,
            seed,
            refiners,
            pairs,
            solver,
            out,
        } => commands::diagnose_cmd(&config, seed, &solver.overrides(), refiners.as_deref(), pairs, &out),
        Command::Compare { configs, out } => commands::compare_cmd(&configs, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error[{}]: {err}", err.kind());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
