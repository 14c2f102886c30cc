use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("degenerate law: {0}")]
    Degenerate(String),

    #[error("observation {t} has zero probability under the model")]
    InvalidLikelihood { t: usize },

    #[error("category {0} is never observed")]
    Separation(u32),

    #[error("rank deficient design: {0}")]
    RankDeficient(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("estimation did not converge: {0}")]
    NonConvergence(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad input rather than numerical trouble.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::NonConvergence(_) | Error::InvalidLikelihood { .. } | Error::Degenerate(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
