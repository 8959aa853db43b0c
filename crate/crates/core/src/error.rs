use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("anchor r must be positive, got {0}")]
    NonPositiveAnchor(f64),

    #[error("posterior undefined at r = 0: point coincides with {0} cloud points")]
    UndefinedPosterior(usize),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("loss is not finite")]
    NonFiniteLoss,

    #[error("loss became non-finite at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("drift evaluation failed at step {step}: {source}")]
    Drift {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed csv at row {row}, column {column}: {message}")]
    MalformedCsv {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn ensure_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

pub(crate) fn ensure_positive_anchor(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveAnchor(r))
    }
}
