use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time {t} outside valid interval [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("underdetermined problem: {have} constraints, need at least {need}")]
    Underdetermined { have: usize, need: usize },

    #[error("ill-conditioned problem: condition estimate {0:.3e}")]
    IllConditioned(f64),

    #[error("insufficient motion: {surviving} motion pairs survive the rotation filter, need {required}")]
    InsufficientMotion { surviving: usize, required: usize },

    #[error("no convergence after {iterations} iterations (final cost {cost:.6e})")]
    NonConvergence { iterations: usize, cost: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures caused by the numbers rather than by the inputs' shape.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Degenerate(_)
                | Error::Underdetermined { .. }
                | Error::IllConditioned(_)
                | Error::InsufficientMotion { .. }
                | Error::NonConvergence { .. }
                | Error::Numerical(_)
        )
    }
}
