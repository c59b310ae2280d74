//! Error type shared by every module of the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BssError {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("degenerate graph: {0}")]
    DegenerateGraph(String),

    #[error("whitening failed: sample covariance eigenvalue {eigenvalue:e} is below {threshold:e}")]
    Whitening { eigenvalue: f64, threshold: f64 },

    #[error("matrix is rank deficient: smallest singular value {0:e}")]
    RankDeficient(f64),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("sources {0} and {1} are not identifiable (Fisher information is singular)")]
    NonIdentifiable(usize, usize),

    #[error("source {0} has vanishing information deficit zeta; bound does not exist")]
    DegenerateZeta(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, BssError>;

impl BssError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        BssError::Parameter(msg.into())
    }
}
