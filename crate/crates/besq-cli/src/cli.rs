//! Command-line grammar. Every subcommand flag is optional at the clap
//! level; required parameters are enforced after merging with the config
//! file, so `parameter from file, override by flag` works uniformly.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "besq", version, about = "Small-noise laboratory for the complex squared Bessel flow")]
pub struct Cli {
    /// Base RNG seed; each sample path derives its own stream from it.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,

    /// Worker thread count (defaults to all cores). Results are identical
    /// for any value.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Output directory for artifacts and the run manifest.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// key=value config file; flags override file values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

/// Resolved globals handed to every subcommand.
pub struct Globals {
    pub seed: u64,
    pub out: PathBuf,
}

#[derive(Subcommand)]
pub enum Command {
    /// Sample SDE paths (optionally tilted by a control, or SLE tips with --kappa)
    Simulate(SimulateArgs),
    /// Integrate the controlled ODE and report diagnostics
    SolveOde(SolveOdeArgs),
    /// Evaluate the rate functional I on a path CSV
    Rate(RateArgs),
    /// Maximize the variational dual J over a hat-function field
    SupJ(SupJArgs),
    /// Minimal-energy control steering the flow to a target point
    Geodesic(GeodesicArgs),
    /// Ball probability around a target path, direct or tilted
    BallProb(BallProbArgs),
    /// Slope table eps^2 log p versus -I over a noise schedule
    LdpSlope(LdpSlopeArgs),
    /// Fluctuation covariance against the 2 min(s^2, t^2) limit
    Clt(CltArgs),
    /// Sup-distance quantiles of the tilted process to its ODE limit
    Converge(ConvergeArgs),
    /// Pathwise envelope check on sqrt(Z)
    Bounds(BoundsArgs),
    /// Holder-seminorm tail table
    Tails(TailsArgs),
    /// Exponential supermartingale mean and two-route log-M identity
    Supermg(SupermgArgs),
}

impl Command {
    /// Config-file keys each subcommand accepts; anything else in the
    /// file is rejected.
    pub fn allowed_keys(&self) -> &'static [&'static str] {
        match self {
            Command::Simulate(_) => &["eps", "T", "N", "gamma", "paths", "control", "kappa"],
            Command::SolveOde(_) => &["T", "N", "gamma", "control", "hdot-const"],
            Command::Rate(_) => &["path"],
            Command::SupJ(_) => &["path", "m"],
            Command::Geodesic(_) => &["arg-z", "abs-z", "T", "m", "N"],
            Command::BallProb(_) => &["target", "eps", "r", "n", "mode", "control"],
            Command::LdpSlope(_) => {
                &["T", "N", "gamma", "r", "n", "mode", "eps-list", "control", "hdot-const"]
            }
            Command::Clt(_) => &["eps", "T", "N", "n", "times"],
            Command::Converge(_) => &["T", "N", "gamma", "n", "eps-list", "control", "hdot-const"],
            Command::Bounds(_) => {
                &["eps", "T", "N", "gamma", "n", "slack", "control", "hdot-const"]
            }
            Command::Tails(_) => &["alpha", "T", "N", "gamma", "n", "eps-list", "r-list"],
            Command::Supermg(_) => &["eps", "T", "N", "gamma", "n", "f0", "g0"],
        }
    }
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Noise scale (>= 0; 0 gives the deterministic flow)
    #[arg(long)]
    pub eps: Option<f64>,
    /// Time horizon
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    /// Number of grid steps
    #[arg(long = "N")]
    pub steps: Option<usize>,
    /// Grid grading exponent (1 = uniform)
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Number of independent paths
    #[arg(long)]
    pub paths: Option<u64>,
    /// Control CSV (t,h,hdot) to tilt the drift
    #[arg(long)]
    pub control: Option<PathBuf>,
    /// SLE parameter in (0, 4): emit tip samples instead of paths
    #[arg(long)]
    pub kappa: Option<f64>,
}

#[derive(Args)]
pub struct SolveOdeArgs {
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    #[arg(long = "N")]
    pub steps: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Control CSV (t,h,hdot)
    #[arg(long)]
    pub control: Option<PathBuf>,
    /// Constant hdot shortcut when no control file is given
    #[arg(long)]
    pub hdot_const: Option<f64>,
}

#[derive(Args)]
pub struct RateArgs {
    /// Path CSV (t,re,im) to evaluate
    #[arg(long)]
    pub path: Option<PathBuf>,
}

#[derive(Args)]
pub struct SupJArgs {
    /// Path CSV (t,re,im) to evaluate
    #[arg(long)]
    pub path: Option<PathBuf>,
    /// Hat-function count per component
    #[arg(long)]
    pub m: Option<usize>,
}

#[derive(Args)]
pub struct GeodesicArgs {
    /// Target argument in (0, pi)
    #[arg(long)]
    pub arg_z: Option<f64>,
    /// Target modulus (> 0)
    #[arg(long)]
    pub abs_z: Option<f64>,
    /// Horizon (defaults to |z|^2)
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    /// Control basis dimension
    #[arg(long)]
    pub m: Option<usize>,
    /// ODE grid steps used inside the optimizer
    #[arg(long = "N")]
    pub steps: Option<usize>,
}

#[derive(Args)]
pub struct BallProbArgs {
    /// Target path CSV (t,re,im)
    #[arg(long)]
    pub target: Option<PathBuf>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Ball radius in sup norm
    #[arg(long)]
    pub r: Option<f64>,
    /// Sample count
    #[arg(long)]
    pub n: Option<u64>,
    /// direct | tilted
    #[arg(long)]
    pub mode: Option<String>,
    /// Tilt control CSV (required in tilted mode)
    #[arg(long)]
    pub control: Option<PathBuf>,
}

#[derive(Args)]
pub struct LdpSlopeArgs {
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    #[arg(long = "N")]
    pub steps: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Ball radius
    #[arg(long)]
    pub r: Option<f64>,
    /// Samples per noise scale
    #[arg(long)]
    pub n: Option<u64>,
    /// direct | tilted
    #[arg(long)]
    pub mode: Option<String>,
    /// Decreasing comma-separated noise schedule
    #[arg(long)]
    pub eps_list: Option<String>,
    /// Control CSV defining the target (and the tilt in tilted mode)
    #[arg(long)]
    pub control: Option<PathBuf>,
    #[arg(long)]
    pub hdot_const: Option<f64>,
}

#[derive(Args)]
pub struct CltArgs {
    /// Noise scale (> 0)
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    #[arg(long = "N")]
    pub steps: Option<usize>,
    #[arg(long)]
    pub n: Option<u64>,
    /// Comma-separated evaluation times
    #[arg(long)]
    pub times: Option<String>,
}

#[derive(Args)]
pub struct ConvergeArgs {
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    #[arg(long = "N")]
    pub steps: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub eps_list: Option<String>,
    #[arg(long)]
    pub control: Option<PathBuf>,
    #[arg(long)]
    pub hdot_const: Option<f64>,
}

#[derive(Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    #[arg(long = "N")]
    pub steps: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub n: Option<u64>,
    /// Envelope slack (defaults to the grid modulus)
    #[arg(long)]
    pub slack: Option<f64>,
    #[arg(long)]
    pub control: Option<PathBuf>,
    #[arg(long)]
    pub hdot_const: Option<f64>,
}

#[derive(Args)]
pub struct TailsArgs {
    /// Holder exponent in (0, 1/2)
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    #[arg(long = "N")]
    pub steps: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub eps_list: Option<String>,
    /// Comma-separated tail thresholds
    #[arg(long)]
    pub r_list: Option<String>,
}

#[derive(Args)]
pub struct SupermgArgs {
    /// Noise scale (>= 0.1)
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    #[arg(long = "N")]
    pub steps: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub n: Option<u64>,
    /// Constant f-component of the test field
    #[arg(long)]
    pub f0: Option<f64>,
    /// Constant g-component of the test field
    #[arg(long)]
    pub g0: Option<f64>,
}
