use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside its mathematical domain (ring too small, trap count too large, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A trap configuration is inconsistent with its arrangement.
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was handed an input that violates its contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The shifted QR iteration did not deflate within its iteration budget.
    #[error("eigensolver failed to converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    /// Left/right eigenvectors of a cluster cannot be biorthonormalized.
    #[error("ill-conditioned eigenvector cluster {cluster:?} (bilinear overlap {overlap:.3e})")]
    IllConditioned { cluster: Vec<usize>, overlap: f64 },

    /// A least-squares fit could not be carried out.
    #[error("fit error: {0}")]
    Fit(String),
}

impl Error {
    /// True for failures raised by the numerical kernels rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. } | Error::IllConditioned { .. } | Error::Fit(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
