use std::path::PathBuf;

use clap::{Args, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    /// One curve-bounded hysteron (exact).
    Gamma,
    /// Hierarchical ramp stack, or a single trapezoid with `--trapezoid`.
    Nonlinear,
    /// Untruncated plays; needs a convex right curve.
    Linear,
    /// Relays; ramp regularized when `--eps` is given.
    Preisach,
    /// Erf relays.
    PreisachSmooth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GraphArg {
    /// Methane isotherm pair.
    Methane,
    /// Convex right curve and its point reflection on [1, 3].
    Convex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Uniform,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PinArg {
    Left,
    Right,
}

/// Initial internal state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    /// Upper end of every band (desorption side).
    Left,
    /// Lower end of every band (adsorption side).
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Newton,
    Bracket,
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Fig2,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
    Fig9,
    Fig10,
    Fig11,
    Table3,
    Table4,
    Table5,
    Intro,
    All,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct CalibrateArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    /// Two Langmuir isotherms `Vl,Bl,Vr,Br` (left = desorption).
    #[arg(long, value_delimiter = ',', value_name = "VL,BL,VR,BR")]
    pub langmuir: Option<Vec<f64>>,
    /// Built-in graph.
    #[arg(long, value_enum)]
    pub graph: Option<GraphArg>,
    /// Left curve samples, CSV `u,w`.
    #[arg(long, value_name = "FILE")]
    pub left: Option<PathBuf>,
    /// Right curve samples, CSV `u,w`.
    #[arg(long, value_name = "FILE")]
    pub right: Option<PathBuf>,
    /// Straight trapezoid `alpha,beta,A,B,w_min,w_max`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, value_name = "LIST")]
    pub trapezoid: Option<Vec<f64>>,
    /// Hysteron count for the linear and relay families.
    #[arg(long = "K", default_value_t = 100)]
    pub k: usize,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Slab count of the hierarchical fit.
    #[arg(long = "I", visible_alias = "slabs", default_value_t = 7)]
    pub slabs: usize,
    #[arg(long, value_enum, default_value = "uniform")]
    pub strategy: StrategyArg,
    /// Per-slab budget `m n <= kmax` [default: 9 uniform, 96 adaptive, 100 for --trapezoid].
    #[arg(long)]
    pub kmax: Option<usize>,
    /// Refinement passes that multiply the budget.
    #[arg(long, default_value_t = 1)]
    pub qmax: usize,
    /// Boundary error to reach; failing that is an error.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, value_enum, default_value = "left")]
    pub pin: PinArg,
    /// Model file to write [default: stdout].
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct ScanArgs {
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Input turning points, starting value first.
    #[arg(long, required = true, value_delimiter = ',', allow_negative_numbers = true, value_name = "LIST")]
    pub peaks: Vec<f64>,
    /// Steps per segment.
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, value_enum, default_value = "left")]
    pub init: InitArg,
    /// Explicit initial state `v_1,...,v_K`; overrides `--init`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, value_name = "LIST")]
    pub state: Option<Vec<f64>>,
    /// CSV `u,w` [default: stdout].
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct SignatureArgs {
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// CSV `alpha,beta,mu` [default: stdout].
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OdeProblemArgs {
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// `identity` or a CSV `u,a` of a strictly increasing curve.
    #[arg(long, default_value = "identity")]
    pub a: String,
    /// `fcont`, `fdisc`, `intro`, `const V` or `csv FILE` (columns `t,f`).
    #[arg(long, num_args = 1..=2, default_value = "fcont", allow_negative_numbers = true)]
    pub source: Vec<String>,
    #[arg(long = "T", default_value_t = 10.0)]
    pub t_final: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub u0: f64,
    #[arg(long, value_enum, default_value = "left")]
    pub init: InitArg,
    #[arg(long, value_enum, default_value = "fallback")]
    pub solver: SolverArg,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct OdeRunArgs {
    #[command(flatten)]
    pub problem: OdeProblemArgs,
    #[arg(long, default_value_t = 0.01)]
    pub tau: f64,
    /// CSV `t,u,w,iterations` [default: stdout].
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct OdeConvergenceArgs {
    #[command(flatten)]
    pub problem: OdeProblemArgs,
    /// Step sizes; the last one is the reference.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.01,0.001,0.0001")]
    pub taus: Vec<f64>,
    /// CSV `tau,e_u,e_w` [default: stdout].
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PdeProblemArgs {
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// `identity` or a CSV `u,flux` of a nondecreasing curve.
    #[arg(long, default_value = "identity")]
    pub flux: String,
    /// `identity` or a CSV `u,a` of a strictly increasing curve.
    #[arg(long, default_value = "identity")]
    pub a: String,
    #[arg(long, default_value_t = 0.01)]
    pub h: f64,
    /// `tau / h`.
    #[arg(long, default_value_t = 0.9)]
    pub lambda: f64,
    #[arg(long = "T", default_value_t = 0.5)]
    pub t_final: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub x_min: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub x_max: f64,
    /// `box`, `linear`, `constant V` or `csv FILE` (columns `x,u`).
    #[arg(long, num_args = 1..=2, default_value = "box", allow_negative_numbers = true)]
    pub init: Vec<String>,
    /// `ramp`, `zero` (zero gradient), `const V` or `csv FILE` (columns `t,u`).
    #[arg(long, num_args = 1..=2, default_value = "zero", allow_negative_numbers = true)]
    pub inflow: Vec<String>,
    #[arg(long, value_enum, default_value = "right")]
    pub cell_init: InitArg,
    #[arg(long, value_enum, default_value = "fallback")]
    pub solver: SolverArg,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct PdeRunArgs {
    #[command(flatten)]
    pub problem: PdeProblemArgs,
    /// Output times; the final time is always written.
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    pub snapshots: Vec<f64>,
    /// Writes `{prefix}_t{t}.csv` (`x,u,w`) and `{prefix}_trace.csv` (`u,w`).
    #[arg(long, default_value = "pde")]
    pub out_prefix: String,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct PdeConvergenceArgs {
    #[command(flatten)]
    pub problem: PdeProblemArgs,
    /// Mesh sizes; the last one is the reference.
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.005,0.001,0.0001")]
    pub hs: Vec<f64>,
    /// CSV `h,e_u,e_w` [default: stdout].
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct ReproduceArgs {
    #[arg(value_enum)]
    pub target: Target,
    #[arg(long, default_value = "repro")]
    pub out_dir: PathBuf,
}
