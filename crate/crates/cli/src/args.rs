use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Clone, Parser)]
#[command(name = "nibr", version, about = "Bayesian linear regression with 1/sigma^q priors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Options,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Closed-form posterior and marginals under a 1/sigma^q prior.
    Fit,
    /// Bayesian predictive intervals at new design points.
    Predict,
    /// Laplace log-evidence with the grid quadrature cross-check.
    Evidence,
    /// Fitting and predictive evidence over a list of exponents.
    ComparePriors,
    /// Metropolis sampling checked against the closed-form marginals.
    McmcCheck,
    /// Least-squares bands next to the Bayesian predictive bands.
    LsCompare,
    /// Strain-life fit and lives at a probability of failure.
    Fatigue,
    /// Numerical Fisher information, KL and prior exponent checks.
    VerifyInfo,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Fit => "fit",
            Command::Predict => "predict",
            Command::Evidence => "evidence",
            Command::ComparePriors => "compare-priors",
            Command::McmcCheck => "mcmc-check",
            Command::LsCompare => "ls-compare",
            Command::Fatigue => "fatigue",
            Command::VerifyInfo => "verify-info",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Predictive {
    Observation,
    MeanResponse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    Variance,
    Scale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct Options {
    /// Input CSV: regressor columns then the response, or `strain_amplitude,cycles` for `fatigue`.
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// 1-based rows to use, e.g. `1-6` or `1,3,5-8` (default: all).
    #[arg(long, global = true)]
    pub rows: Option<String>,
    /// Prepend a column of ones to the design.
    #[arg(long, global = true, default_value_t = true, action = ArgAction::Set)]
    pub intercept: bool,
    /// Prior exponent q in 1/sigma^q.
    #[arg(long, global = true, default_value_t = 2.0, allow_negative_numbers = true)]
    pub q: f64,
    /// Comma-separated exponents for prior comparison.
    #[arg(long, global = true, value_delimiter = ',', default_values_t = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0], allow_negative_numbers = true)]
    pub q_list: Vec<f64>,
    /// Lower end of the sigma support (default: 1e-4 times the residual standard error).
    #[arg(long, global = true, requires = "sigma_max")]
    pub sigma_min: Option<f64>,
    /// Upper end of the sigma support (default: 1e3 times the residual standard error).
    #[arg(long, global = true, requires = "sigma_min")]
    pub sigma_max: Option<f64>,
    /// Interval level 1 - gamma.
    #[arg(long, global = true, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Total Metropolis sweeps including burn-in (mcmc-check default 205000, verify-info uses it as Monte Carlo draws).
    #[arg(long, global = true)]
    pub draws: Option<usize>,
    #[arg(long, global = true, default_value_t = 5000)]
    pub burn_in: usize,
    /// 1-based rows held out as future data (fatigue default: 6; empty string for none).
    #[arg(long, global = true)]
    pub holdout: Option<String>,
    /// Probability of failure for fatigue lives.
    #[arg(long, global = true, default_value_t = 1e-5)]
    pub pof: f64,
    /// Bayesian predictive (predict default: observation, fatigue default: mean-response).
    #[arg(long, global = true, value_enum)]
    pub predictive: Option<Predictive>,
    /// Axis along which the prior density is normalized for evidence.
    #[arg(long, global = true, value_enum, default_value_t = Normalization::Variance)]
    pub normalization: Normalization,
    /// Prediction points: regressor values, comma-separated within a point, `;` between points.
    #[arg(long, global = true)]
    pub at: Option<String>,
    /// Number of sweep points for default prediction grids and fatigue strain sweeps.
    #[arg(long, global = true, default_value_t = 50)]
    pub points: usize,
    /// Nodes per axis of the evidence quadrature grid.
    #[arg(long, global = true, default_value_t = 128)]
    pub grid_resolution: usize,
    #[arg(long, global = true, default_value_t = 1e-4)]
    pub strain_min: f64,
    #[arg(long, global = true, default_value_t = 1e-1)]
    pub strain_max: f64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write plot data (CSV) to this path.
    #[arg(long, global = true)]
    pub emit_plot: Option<PathBuf>,
    /// Write the report to this path instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
}
