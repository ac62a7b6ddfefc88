//! `wop`: WOP distances, geodesics, barycenters, flows and HK comparisons on
//! measure files.
//!
//! Exit codes: 0 ok, 2 input, 3 solver, 4 config.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "wop", version, about = "WOP metric toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub config: RunConfig,
    #[command(subcommand)]
    pub command: Command,
}

/// Settings shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct RunConfig {
    /// Reference point, comma separated (default: origin)
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    /// Transport exponent for `dist`
    #[arg(long, global = true, default_value_t = 2.0)]
    pub p: f64,
    /// Entropic regularization for `compare`
    #[arg(long, global = true, default_value_t = 1e-3)]
    pub eps: f64,
    /// Number of time steps
    #[arg(long, global = true, default_value_t = 100)]
    pub steps: usize,
    /// Time step for `flow` (default: stable step for the chosen flow)
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Output file
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for generated inputs
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// WOP distance between two measures
    Dist { mu: PathBuf, nu: PathBuf },
    /// Geodesic frames on a uniform time grid
    Geodesic { mu0: PathBuf, mu1: PathBuf },
    /// Barycenter of a JSON list of {"lambda", "measure_file"} entries
    Barycenter { spec: PathBuf },
    /// Gradient flow of a functional
    Flow {
        #[arg(long, value_enum, default_value_t = FlowKind::Boltzmann)]
        functional: FlowKind,
        /// Initial measure, for particle flows
        #[arg(long)]
        input: Option<PathBuf>,
        /// Mass of the initial grid density
        #[arg(long, default_value_t = 2.0)]
        mass: f64,
        /// Grid cells
        #[arg(long, default_value_t = 256)]
        cells: usize,
        /// Also write every frame as JSON to this file
        #[arg(long)]
        frames: Option<PathBuf>,
    },
    /// WOP and HK mass profiles along the geodesics
    Compare {
        mu: Option<PathBuf>,
        nu: Option<PathBuf>,
        /// Atoms per generated Gaussian when no inputs are given
        #[arg(long, default_value_t = 500)]
        atoms: usize,
    },
    /// Dual certificate of the WOP distance
    Certify { mu: PathBuf, nu: PathBuf },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowKind {
    /// Extended Boltzmann entropy on a 1-d grid
    Boltzmann,
    /// Half squared distance to the null measure
    HalfNorm,
    /// Second moment energy
    Moment,
    /// Extended quadratic potential centered at x0
    Potential,
    /// Total mass
    Mass,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { commands::EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
