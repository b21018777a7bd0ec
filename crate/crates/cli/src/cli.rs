use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Parser, Serialize, Deserialize)]
#[command(name = "rsmdp", version, about = "Risk-sensitive MDP solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Directory for output files and the run manifest.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Format of the main result on standard output.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    /// Bundled example id (ex1..ex4) or path to a model JSON file.
    pub model: String,
    /// Perturbation of ex4, in [0, 0.1].
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Rescale rows whose sums miss 1 instead of rejecting the model.
    #[arg(long)]
    pub renormalize: bool,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
pub enum Command {
    /// Check the ergodicity assumptions.
    Check {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Solve the averaged Bellman equation.
    #[command(allow_negative_numbers = true)]
    Solve {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 1_000_000)]
        max_iter: usize,
        /// Anchor state label (default: first state).
        #[arg(long)]
        anchor: Option<String>,
    },
    /// Sweep λ^u(γ) over a window and decompose it into optimality regions.
    #[command(allow_negative_numbers = true)]
    Sweep {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = -3.0)]
        from: f64,
        #[arg(long, default_value_t = 3.0)]
        to: f64,
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol_root: f64,
    },
    /// Optimal rule classes around γ = 0.
    Neutral {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Discounted recursion: values and per-level rules.
    #[command(allow_negative_numbers = true)]
    Discount {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Number of leading levels to report.
        #[arg(long, default_value_t = 8)]
        levels: usize,
        #[arg(long)]
        anchor: Option<String>,
    },
    /// Blackwell evidence for one level over a grid of discount factors.
    #[command(allow_negative_numbers = true)]
    Blackwell {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 0)]
        level: usize,
        /// Comma-separated ascending grid (default 1 − 2^-j, j = 1..14).
        #[arg(long, value_delimiter = ',')]
        betas: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Distances between centred discounted levels and the averaged solution.
    #[command(allow_negative_numbers = true)]
    Vanish {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        gamma: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        betas: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        n_max: usize,
        #[arg(long)]
        anchor: Option<String>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Monte Carlo estimate of the averaged or discounted criterion.
    #[command(allow_negative_numbers = true)]
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        /// Policy, e.g. `a3`, `1/2/3`, `tilde-u>u`.
        #[arg(long)]
        policy: String,
        #[arg(long)]
        gamma: f64,
        /// Estimate the averaged criterion over `--n` steps.
        #[arg(long, conflicts_with = "beta", requires = "n")]
        avg: bool,
        #[arg(long, required_unless_present = "avg")]
        beta: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 10_000)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Start state label (default: first state).
        #[arg(long)]
        x0: Option<String>,
        /// Truncation tolerance for the discounted sum.
        #[arg(long, default_value_t = 1e-9)]
        trunc_tol: f64,
    },
    /// Re-run a recorded manifest and compare its outputs byte for byte.
    Replay { manifest: PathBuf },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Check { .. } => "check",
            Command::Solve { .. } => "solve",
            Command::Sweep { .. } => "sweep",
            Command::Neutral { .. } => "neutral",
            Command::Discount { .. } => "discount",
            Command::Blackwell { .. } => "blackwell",
            Command::Vanish { .. } => "vanish",
            Command::Simulate { .. } => "simulate",
            Command::Replay { .. } => "replay",
        }
    }

    pub fn model(&self) -> Option<&ModelArgs> {
        match self {
            Command::Check { model }
            | Command::Solve { model, .. }
            | Command::Sweep { model, .. }
            | Command::Neutral { model }
            | Command::Discount { model, .. }
            | Command::Blackwell { model, .. }
            | Command::Vanish { model, .. }
            | Command::Simulate { model, .. } => Some(model),
            Command::Replay { .. } => None,
        }
    }
}
