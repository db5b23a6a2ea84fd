use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge ({context}): achieved error {achieved:.3e}, requested {requested:.3e}")]
    Quadrature {
        context: String,
        achieved: f64,
        requested: f64,
    },

    #[error("size limit exceeded for {what}: {dims:?} ({entries} entries, budget {budget})")]
    Size {
        what: String,
        dims: Vec<usize>,
        entries: usize,
        budget: usize,
    },

    #[error("truncation too small: tail mass {tail:.3e} exceeds {limit:.1e}")]
    TailMass { tail: f64, limit: f64 },

    #[error("non-finite field value at replica {replica}, step {step}")]
    NonFinite { replica: usize, step: usize },

    #[error("{0}")]
    Usage(String),

    #[error("cache format error: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures of a numerical method (quadrature, blow-up) as
    /// opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Quadrature { .. } | Error::NonFinite { .. } | Error::TailMass { .. }
        )
    }
}
