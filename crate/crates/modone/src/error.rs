use thiserror::Error;

/// Everything that can go wrong inside the library.
///
/// Statistical *test failures* are not errors; they are reported through
/// [`crate::stats::TestReport::pass`]. `Error` covers contract violations,
/// numerical breakdown and bad configuration.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("phi is singular at t = {at}")]
    Singular { at: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("quadrature did not converge: estimate {estimate:e}, error bound {error:e} after {panels} panels")]
    QuadratureFailed {
        estimate: f64,
        error: f64,
        panels: usize,
    },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
