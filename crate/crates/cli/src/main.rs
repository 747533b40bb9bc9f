//! `moran-lab`: runs Moran-process, replicator-diffusion and dominance
//! experiments and writes CSV tables plus a JSON run summary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod output;
mod params;

#[derive(Parser, Debug)]
#[command(name = "moran-lab", version, about = "Moran process and replicator-diffusion experiment runner")]
pub struct Cli {
    /// Output directory for CSV tables and the JSON summary.
    #[arg(long, global = true, env = "MORAN_LAB_OUT", default_value = "moran-lab-out")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GameArgs {
    /// Payoffs A,B,C,D.
    #[arg(long, allow_hyphen_values = true)]
    pub payoffs: Option<String>,
    /// Constant relative fitness instead of --payoffs.
    #[arg(long)]
    pub r: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct IncrementArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    /// alpha - beta.
    #[arg(long, allow_hyphen_values = true)]
    pub eta: Option<f64>,
    /// Weak-selection increments a,b,c,d (alpha = a - c, beta = b - d).
    #[arg(long, allow_hyphen_values = true)]
    pub increments: Option<String>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum VariantArg {
    /// Death/birth: a random individual dies, the replacement is fitness-weighted.
    Db,
    /// Birth/death: a fitness-weighted individual reproduces, a random one dies.
    Bd,
}

#[derive(Copy, Clone, Debug, PartialEq, ValueEnum)]
pub enum MethodArg {
    Table,
    Numeric,
    Both,
}

#[derive(Copy, Clone, Debug, PartialEq, ValueEnum)]
pub enum KernelArg {
    /// Only Psi(0) and Psi'(0); enough for the continuum pipeline.
    Scales,
    /// Logistic kernel with the given Psi(0) and Psi'(0).
    Fermi,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fixation probabilities by recursion, linear solve, matrix limit and closed form.
    Fixation {
        #[arg(long = "N")]
        n: usize,
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, value_enum, default_value = "db")]
        variant: VariantArg,
    },
    /// Iterates the distribution of the number of A individuals.
    Evolve {
        #[arg(long = "N")]
        n: usize,
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, value_enum, default_value = "db")]
        variant: VariantArg,
        /// Initial number of A individuals.
        #[arg(long)]
        n0: usize,
        #[arg(long, default_value_t = 10_000)]
        steps: u64,
        /// Snapshot interval in steps.
        #[arg(long, default_value_t = 100)]
        every: u64,
    },
    /// Replicator-diffusion evolution.
    Pde {
        #[command(flatten)]
        inc: IncrementArgs,
        #[arg(long, default_value_t = 200)]
        grid: usize,
        #[arg(long, default_value = "delta:0.5")]
        init: String,
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
        /// Snapshot interval in time units.
        #[arg(long, default_value_t = 0.01)]
        every: f64,
    },
    /// Dominance between mixed strategies on a (q1, q2) grid.
    Dominance {
        #[command(flatten)]
        inc: IncrementArgs,
        /// Grid q = (k + 1/2) / points.
        #[arg(long, default_value_t = 20)]
        points: usize,
        #[arg(long, value_enum, default_value = "both")]
        method: MethodArg,
    },
    /// Replicator ODE trajectory.
    Ode {
        #[command(flatten)]
        inc: IncrementArgs,
        #[arg(long, default_value_t = 0.5)]
        x0: f64,
        #[arg(long, default_value_t = 20.0)]
        t_end: f64,
        #[arg(long, default_value_t = 0.1)]
        every: f64,
    },
    /// Asymptotic masses of the pure-drift limit, with a characteristics check.
    Drift {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, default_value = "uniform")]
        init: String,
        #[arg(long, default_value_t = 4000)]
        cells: usize,
        #[arg(long, default_value_t = 100.0)]
        t_end: f64,
        #[arg(long, default_value_t = 0.05)]
        dt: f64,
    },
    /// Eigenvalues of the decay operator.
    Spectral {
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, allow_hyphen_values = true)]
        beta: f64,
        #[arg(long, default_value_t = 32)]
        modes: usize,
        /// Fixed grid; refined automatically when omitted.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Imitation dynamics through its diffusion limit.
    Imitate {
        #[command(flatten)]
        inc: IncrementArgs,
        #[arg(long, value_enum, default_value = "scales")]
        kernel: KernelArg,
        /// Psi(0).
        #[arg(long, default_value_t = 1.0)]
        psi0: f64,
        /// Psi'(0).
        #[arg(long, default_value_t = 0.5)]
        dpsi0: f64,
        #[arg(long, default_value_t = 200)]
        grid: usize,
        #[arg(long, default_value = "delta:0.5")]
        init: String,
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
        #[arg(long, default_value_t = 0.01)]
        every: f64,
        /// Also tabulate finite-population fixation for this N.
        #[arg(long = "N")]
        n: Option<usize>,
    },
    /// Discrete-to-continuum convergence table.
    Converge {
        #[command(flatten)]
        inc: IncrementArgs,
        #[arg(long, default_value = "delta:0.5")]
        init: String,
        #[arg(long, default_value = "50,100,200,400")]
        grids: String,
        #[arg(long, default_value_t = 500.0)]
        t_max: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(violations) if violations.is_empty() => ExitCode::SUCCESS,
        Ok(violations) => {
            eprintln!("moran-lab: invariant violation: {}", violations.join("; "));
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("moran-lab: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
