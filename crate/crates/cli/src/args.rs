use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::{Serialize, Serializer};

#[derive(Debug, Parser)]
#[command(
    name = "ksat",
    version,
    about = "Belief-propagation counting for random k-SAT"
)]
pub struct Cli {
    /// Worker threads (default: available parallelism). Outputs do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Generate a random k-SAT formula in DIMACS format.
    Gen(GenArgs),
    /// Interpolation estimate Φ(β, F) of ln Z.
    Phi(PhiArgs),
    /// Estimate of ln Ξ(Nε, F), the number of assignments violating at most Nε clauses.
    Xi(XiArgs),
    /// Exact partition function and energy statistics by enumeration.
    Exact(ExactArgs),
    /// Correlation decay E tanh Δ^(d) on the random tree ensemble.
    TreeDecay(TreeDecayArgs),
    /// Smallest root of κ(α) = 1.
    AlphaStar(AlphaStarArgs),
    /// Threshold of the zero-temperature ρ recursion.
    RhoThreshold(RhoThresholdArgs),
    /// Population-dynamics fixed point and the limiting free energy φ(β).
    De(DeArgs),
    /// Compare a finite difference of φ(β) with −α E g.
    PhiDerivativeCheck(PhiDerivativeCheckArgs),
}

/// Inverse temperature; `inf` is accepted by the parser.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Beta(pub f64);

impl FromStr for Beta {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let v = match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "+inf" | "infinity" => f64::INFINITY,
            other => other
                .parse::<f64>()
                .map_err(|e| format!("invalid beta {s:?}: {e}"))?,
        };
        if v.is_nan() || v < 0.0 {
            return Err(format!("beta must be >= 0 (got {s})"));
        }
        Ok(Beta(v))
    }
}

impl fmt::Display for Beta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for Beta {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args, Serialize)]
#[command(group(ArgGroup::new("size").required(true).args(["alpha", "m"])))]
pub struct GenArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    /// Clause density; the formula gets round(α·n) clauses.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Number of clauses.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, env = "KSAT_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PhiArgs {
    #[arg(long)]
    pub cnf: PathBuf,
    #[arg(long)]
    pub beta: Beta,
    /// Number of grid steps (default N²).
    #[arg(long, conflicts_with = "adaptive")]
    pub steps: Option<usize>,
    /// Choose the step count as max(⌈β²α²N/τ⌉, 64).
    #[arg(long)]
    pub adaptive: bool,
    #[arg(long, default_value_t = 0.01)]
    pub tau: f64,
    /// BP iterations per grid point (default: factor-graph diameter).
    #[arg(long)]
    pub t_max: Option<usize>,
    /// Start each grid point from the previous point's messages.
    #[arg(long)]
    pub warm_start: bool,
    /// Include ⟨E⟩_BP at every grid point.
    #[arg(long)]
    pub per_step: bool,
    /// Recorded in the output when the CNF carries no generation comment.
    #[arg(long, env = "KSAT_SEED")]
    pub seed: Option<u64>,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct XiArgs {
    #[arg(long)]
    pub cnf: PathBuf,
    #[arg(long)]
    pub epsilon: f64,
    /// A in β = A ln(1/ε).
    #[arg(long, default_value_t = 2.0)]
    pub scale: f64,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub t_max: Option<usize>,
    #[arg(long, env = "KSAT_SEED")]
    pub seed: Option<u64>,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ExactArgs {
    #[arg(long)]
    pub cnf: PathBuf,
    /// Inverse temperature; `inf` counts satisfying assignments.
    #[arg(long)]
    pub beta: Beta,
    /// Also report Ξ(ζ) (at most ζ violated clauses) and the strict count.
    #[arg(long)]
    pub zeta: Option<usize>,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct TreeDecayArgs {
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub beta: Beta,
    /// Largest depth d; rows are produced for d = 0…depth.
    #[arg(long)]
    pub depth: usize,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, env = "KSAT_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct AlphaStarArgs {
    /// One or more clause widths, comma separated.
    #[arg(long, required = true, value_delimiter = ',')]
    pub k: Vec<usize>,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct RhoThresholdArgs {
    #[arg(long, required = true, value_delimiter = ',')]
    pub k: Vec<usize>,
    /// Only `inf` is supported: the recursion describes the zero-temperature limit.
    #[arg(long, default_value = "inf")]
    pub beta: Beta,
    /// ρ is deemed to vanish when ρ_depth < tol.
    #[arg(long, default_value_t = 200)]
    pub depth: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Width of the final bisection bracket.
    #[arg(long, default_value_t = 1e-6)]
    pub precision: f64,
    /// Include every bisection probe.
    #[arg(long)]
    pub trace: bool,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PopulationArgs {
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub beta: Beta,
    #[arg(long, default_value_t = 100_000)]
    pub pop_size: usize,
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    /// Monte-Carlo samples for the expectations (default 10 × pop-size).
    #[arg(long)]
    pub eval_samples: Option<usize>,
    #[arg(long, env = "KSAT_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct DeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub pop: PopulationArgs,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PhiDerivativeCheckArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub pop: PopulationArgs,
    #[arg(long, default_value_t = 1e-2)]
    pub dbeta: f64,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}
