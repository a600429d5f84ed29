use thiserror::Error;

/// Errors raised by the simulation kernels and experiment drivers.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inputs are inconsistent with each other (lengths, index sets, modes).
    #[error("invalid input: {0}")]
    Input(String),

    /// The requested computation exceeds a memory or enumeration budget.
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// An exponential weight would leave the double-precision range.
    #[error("exponent {exponent} overflows at site {site}")]
    Overflow { site: u64, exponent: f64 },

    /// Adaptive quadrature stopped before meeting its tolerance.
    #[error("quadrature did not converge: achieved {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    /// A scan grid does not bracket the target level.
    #[error("bracketing failed: {0}")]
    Bracketing(String),

    /// A configuration field failed validation.
    #[error("invalid configuration at `{path}`: {message}")]
    Validation { path: String, message: String },
}

impl Error {
    pub fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
