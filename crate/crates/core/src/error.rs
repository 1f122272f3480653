use thiserror::Error;

/// Errors raised by the numerical routines and the sampler.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{what}: argument {value} outside the domain ({expected})")]
    Domain {
        what: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("cannot parse density spec `{spec}`: offending token `{token}` ({reason})")]
    Parse {
        spec: String,
        token: String,
        reason: String,
    },

    #[error("quadrature did not converge: estimate {estimate}, error {error} after {intervals} intervals")]
    Quadrature {
        estimate: f64,
        error: f64,
        intervals: usize,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid chain state: {0}")]
    InvalidState(String),

    #[error("invalid data at index {index}: {value} (data must be positive and finite)")]
    InvalidDatum { index: usize, value: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_positive(what: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value,
            expected: "finite and > 0",
        })
    }
}
