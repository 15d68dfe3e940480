//! Command-line surface. Every value is optional here so that unset flags
//! fall through to the config file and then to the defaults in
//! [`crate::commands`].

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "foctl", version, about = "Fractional-order LTI systems: generation, simulation, identification, control and sample-complexity experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Ls,
    Lagrange,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverArg {
    Dense,
    Iterative,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GlobalArgs {
    /// Seed for every random draw.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true, env = "FOCTL_WORKERS")]
    #[serde(skip)]
    pub workers: Option<usize>,
    /// LQR solver route.
    #[arg(long, global = true, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodArg>,
    /// Linear solver for the Lagrange system.
    #[arg(long, global = true, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverArg>,
    /// Relative residual tolerance of the iterative solver.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Report errors as JSON on standard error.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub json_errors: bool,
    /// JSON config file; flags take precedence over its values.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Gen(GenCli),
    /// Simulate one trajectory of a model.
    Simulate(SimulateCli),
    /// Solve the finite-horizon LQR problem.
    Control(ControlCli),
    /// Identify A + diag(α) and B from a dataset.
    Identify(IdentifyCli),
    /// Run the sample-complexity experiment.
    Complexity(ComplexityCli),
    /// Compare the FOLTI estimator with an integer-order LTI fit.
    Baseline(BaselineCli),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Gen(_) => "gen",
            Command::Simulate(_) => "simulate",
            Command::Control(_) => "control",
            Command::Identify(_) => "identify",
            Command::Complexity(_) => "complexity",
            Command::Baseline(_) => "baseline",
        }
    }
}

/// Model given as a file or inline (`--a "0.1,0;0,0.2" --b "1;0" --alpha 0.5,0.5`).
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct ModelCli {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<String>,
    /// `difference` (A_0 = A + diag α) or `reflected-order` (A_0 = A − diag α).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convention: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenCli {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[arg(long = "T", visible_alias = "horizon")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub traj: Option<usize>,
    /// gaussian, cauchy, gamma, sinc_squared, uniform or poisson.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Fixed orders, comma separated; overrides `--alpha-mode`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<String>,
    /// commensurate or componentwise.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_mode: Option<String>,
    /// spectral-radius or memory-bounded.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stability: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convention: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateCli {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelCli,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<String>,
    #[arg(long = "T", visible_alias = "horizon")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    /// `zero`, `random` (uniform on [−1, 1]) or a CSV file with `u_*` columns.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inputs: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Truncate the memory sum to this many past states.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub memory: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ControlCli {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelCli,
    /// Cost file with `q`, `r` and optional `q_f`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qf: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<String>,
    #[arg(long = "T", visible_alias = "horizon")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct IdentifyCli {
    /// Dataset directory or manifest.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    /// Known diagonal of A, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub known_diag: Option<String>,
    /// Model file to score the estimate against.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_model: Option<PathBuf>,
    /// Score against the model recorded in the dataset manifest.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub truth_from_dataset: bool,
    /// Per-component noise std; adds the predicted estimator covariance.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_std: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ComplexityCli {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelCli,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[arg(long = "T", visible_alias = "horizon")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    /// Samples per batch.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Batch counts N, comma separated.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_values: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BaselineCli {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub known_diag: Option<String>,
    /// Number of leading trajectories used for fitting; the rest are held out.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<usize>,
    /// Prediction horizon on held-out trajectories.
    #[arg(long = "T", visible_alias = "horizon")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
}
