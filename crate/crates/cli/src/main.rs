mod commands;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "kd", version, about = "Kernel dynamics of deep random networks")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Hermite truncation order.
    #[arg(long = "K", global = true, default_value_t = kerneldyn::DEFAULT_TRUNCATION)]
    pub truncation: usize,
    /// Directory for output files and run manifests.
    #[arg(long, global = true, env = "KD_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    /// Emit JSON.
    #[arg(long, global = true, conflicts_with = "csv")]
    pub json: bool,
    /// Emit CSV.
    #[arg(long, global = true)]
    pub csv: bool,
    /// Also render SVG plots next to the CSV files (needs --out-dir).
    #[arg(long, global = true)]
    pub svg: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fixed point, convergence case and rate of one activation.
    Analyze { activation: String },
    /// Summary row for every nonlinear catalog activation.
    Table,
    /// Exact kernel sequence with the matching contraction bound.
    Iterate {
        activation: String,
        #[command(flatten)]
        start: StartArgs,
        #[arg(long, default_value_t = 50)]
        depth: usize,
        #[command(flatten)]
        transform: TransformArgs,
    },
    /// Pairs (rho, kappa(rho)) along the iteration.
    Cobweb {
        activation: String,
        #[command(flatten)]
        start: StartArgs,
        #[arg(long, default_value_t = 20)]
        steps: usize,
        #[command(flatten)]
        transform: TransformArgs,
    },
    /// Integrate d rho / dt = kappa(rho) - rho.
    Ode {
        activation: String,
        #[command(flatten)]
        start: StartArgs,
        #[arg(long, default_value_t = kerneldyn::dynamics::DEFAULT_T_MAX)]
        t_max: f64,
        #[arg(long, default_value_t = kerneldyn::dynamics::DEFAULT_DT)]
        dt: f64,
        #[command(flatten)]
        transform: TransformArgs,
    },
    /// Monte-Carlo finite-width network against the mean-field sequence.
    Simulate {
        activation: String,
        #[command(flatten)]
        start: StartArgs,
        #[arg(long, default_value_t = 1024)]
        width: usize,
        #[arg(long, default_value_t = 10)]
        depth: usize,
        #[arg(long, default_value_t = 32)]
        trials: usize,
        /// gaussian, uniform_unit_var or rademacher.
        #[arg(long, default_value = "gaussian")]
        weights: String,
        #[command(flatten)]
        transform: TransformArgs,
    },
    /// Depth after which two inputs are indistinguishable at precision epsilon.
    DepthThreshold {
        activation: String,
        /// Defaults to 2^-128.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Data behind the four panels of a convergence figure.
    Figure {
        activation: String,
        #[command(flatten)]
        start: StartArgs,
        #[arg(long, default_value_t = 50)]
        depth: usize,
    },
}

#[derive(Debug, Clone, Args)]
pub struct StartArgs {
    /// Initial kernel value.
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub rho0: f64,
}

#[derive(Debug, Clone, Args)]
pub struct TransformArgs {
    /// Residual strength r in [0, 1].
    #[arg(long)]
    pub residual: Option<f64>,
    /// ln_before, rn_before, ln_after or rn_after.
    #[arg(long)]
    pub norm: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kd: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
