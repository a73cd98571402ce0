use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("safety level {delta} is unattainable: best achievable constraint value is {best}")]
    SafetyInfeasible { delta: f64, best: f64 },

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("simplex iteration limit of {0} reached")]
    IterationLimit(usize),

    #[error("singular basis matrix")]
    Singular,

    #[error("policy has no support at state {0}")]
    EmptySupport(usize),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
