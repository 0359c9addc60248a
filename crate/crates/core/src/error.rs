use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("quadrature failure: {0}")]
    Quadrature(String),

    #[error("covariance factorization failed; smallest eigenvalue estimate {min_eig:.3e}")]
    Factorization { min_eig: f64 },

    #[error(
        "circulant embedding has negative eigenvalue mass {neg_mass:.3e} after {attempts} \
         padding attempts; use the Cholesky sampler for this model/grid"
    )]
    Embedding { neg_mass: f64, attempts: u32 },

    #[error("config error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
