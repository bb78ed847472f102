use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Arguments outside an operation's domain (lengths, signs, sizes).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("Sobol' dimension {requested} exceeds the direction-number table (max {max})")]
    UnsupportedDimension { requested: usize, max: usize },

    #[error("{solver} solver failed at step {step}: {detail}")]
    SolverFailure {
        solver: &'static str,
        step: usize,
        detail: String,
    },

    #[error("least-squares failure: {0}")]
    LeastSquares(String),

    #[error("degenerate statistics: {0}")]
    DegenerateStatistics(String),

    #[error(
        "pilot statistics{} violate the correlation/cost-ratio ordering at levels {violations:?}; \
         enable a perturbed low-fidelity model (kind = \"zerod_perturbed\", phi > 0) and rerun the pilot",
        qoi.as_deref().map(|q| format!(" for `{q}`")).unwrap_or_default()
    )]
    Inadmissible {
        violations: Vec<usize>,
        qoi: Option<String>,
    },

    #[error("model `{model}` failed at z = {point:?}: {source}")]
    Evaluation {
        model: String,
        point: Vec<f64>,
        source: Box<Error>,
    },

    #[error("budget {budget} too small: high-fidelity allocation m1 = {m1} < 2")]
    BudgetTooSmall { budget: f64, m1: usize },

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("stage ordering: {0}")]
    Ordering(String),

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
