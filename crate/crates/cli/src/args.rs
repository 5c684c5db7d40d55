use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "conefol", version, about = "Leaf construction and verification for foliations of cones over S^k x S^l")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the structural hypotheses on both profiles.
    Certify(CertifyArgs),
    /// Integrate the unit leaf and write its tables.
    Solve(SolveArgs),
    /// Write dilated leaves and run the reduced-energy perturbation test.
    Foliate(FoliateArgs),
    /// Divergence of the calibration field built from a leaf file.
    Calibrate(CalibrateArgs),
    /// Tail rate of a leaf file.
    Asymptote(AsymptoteArgs),
    /// Certification and tail rates over a parameter grid.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    Phi,
    Psi,
}

impl SideArg {
    pub fn name(self) -> &'static str {
        match self {
            SideArg::Phi => "phi",
            SideArg::Psi => "psi",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ProfileArgs {
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub l: Option<u32>,
    /// Exponent of phi.
    #[arg(long, conflicts_with = "area")]
    pub p: Option<f64>,
    /// Exponent of psi (default: the compatible exponent).
    #[arg(long, conflicts_with = "area")]
    pub q: Option<f64>,
    /// Quadratic coefficient of phi.
    #[arg(long, default_value_t = 0.0, conflicts_with = "area")]
    pub b: f64,
    /// Quadratic coefficient of psi (default: matched to phi).
    #[arg(long, conflicts_with = "area")]
    pub b_psi: Option<f64>,
    /// Glue phi to the reflected psi across the diagonal with this width.
    #[arg(long, conflicts_with = "area")]
    pub delta: Option<f64>,
    /// Replace the integrand by its corrected Fourier truncation.
    #[arg(long = "fourier-N", value_name = "N")]
    pub fourier_n: Option<usize>,
    /// Use the area integrand.
    #[arg(long)]
    pub area: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long)]
    pub t_switch: Option<f64>,
    #[arg(long)]
    pub rk_tol: Option<f64>,
    #[arg(long)]
    pub converge_tol: Option<f64>,
    #[arg(long)]
    pub region_tol: Option<f64>,
    #[arg(long)]
    pub tau_max: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Output directory.
    #[arg(long, env = "FOLIATION_OUT", default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// File of `key = value` lines using the long flag names.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Also build the psi-side leaf.
    #[arg(long)]
    pub both_sides: bool,
    /// Skip the certification gate.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Args)]
pub struct FoliateArgs {
    #[command(flatten)]
    pub solve: SolveArgs,
    /// Points per leaf, log-spaced in the leaf parameter.
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    /// Dilation factors.
    #[arg(long, default_value = "0.25,0.5,1,2,4")]
    pub scales: String,
    /// Parameter range `t_min,t_max` of the sampled curves.
    #[arg(long, default_value = "1e-3,10")]
    pub range: String,
    /// Interval `a,b` of the perturbation test.
    #[arg(long, default_value = "0.1,10")]
    pub interval: String,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Leaf table (default: `leaf_<side>.csv` in the output directory).
    #[arg(long)]
    pub leaf: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SideArg::Phi)]
    pub side: SideArg,
    /// `u_min,u_max,v_min,v_max,h`.
    #[arg(long)]
    pub grid: Option<String>,
    /// Grid points per axis.
    #[arg(long, default_value_t = 41)]
    pub nodes: usize,
}

#[derive(Debug, Clone, Args)]
pub struct AsymptoteArgs {
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub leaf: Option<PathBuf>,
    /// Phase trajectory for the phase-space rate (default: `phase_<side>.csv`
    /// next to the leaf, if present).
    #[arg(long)]
    pub phase: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SideArg::Phi)]
    pub side: SideArg,
    /// `t_lo,t_hi`.
    #[arg(long, default_value = "1e2,1e4")]
    pub window: String,
    /// Allowed relative error of the fitted rate.
    #[arg(long, default_value_t = 0.02)]
    pub rate_tol: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Range `a..b` or list `a,b,c`.
    #[arg(long)]
    pub k: String,
    #[arg(long)]
    pub l: String,
    #[arg(long)]
    pub p: String,
    #[arg(long, default_value_t = 0.0)]
    pub b: f64,
    #[arg(long, default_value = "1e2,1e4")]
    pub window: String,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub run: RunArgs,
}
