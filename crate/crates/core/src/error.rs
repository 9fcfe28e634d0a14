use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("design matrix is rank deficient (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("linear algebra error: {0}")]
    LinAlg(String),

    #[error("improper posterior: alpha* = {alpha_star} <= 0, need at least {min_n} observations")]
    ImproperPosterior { alpha_star: f64, min_n: usize },

    #[error("degenerate posterior: {0}")]
    DegeneratePosterior(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("optimizer did not converge after {iterations} iterations (last iterate {last:?})")]
    Convergence { iterations: usize, last: Vec<f64> },

    #[error("curvature error: {0}")]
    Curvature(String),

    #[error("initialization error: {0}")]
    Initialization(String),

    #[error("shape error: {0}")]
    Shape(String),
}

impl Error {
    /// Short machine-readable tag, used by report writers.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Singular { .. } => "singular",
            Error::LinAlg(_) => "linalg",
            Error::ImproperPosterior { .. } => "improper_posterior",
            Error::DegeneratePosterior(_) => "degenerate_posterior",
            Error::Numeric(_) => "numeric",
            Error::Convergence { .. } => "convergence",
            Error::Curvature(_) => "curvature",
            Error::Initialization(_) => "initialization",
            Error::Shape(_) => "shape",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
