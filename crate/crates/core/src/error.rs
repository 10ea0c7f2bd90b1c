//! Error kinds shared by every module.

use thiserror::Error;

/// Failures reported by the numerical kernels, the process layer and the CLI.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("series does not terminate: no numerator parameter of the form q^-N")]
    NonTerminating,
    #[error("denominator factor vanishes at term {term}")]
    DivergentTerm { term: usize },
    #[error("degenerate parameter: {0}")]
    DegenerateParameter(String),
    #[error("pole hit: {0}")]
    PoleHit(String),
    #[error("index {index} out of range 0..={max}")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("illegal move {from} -> {to}")]
    IllegalMove { from: usize, to: usize },
    #[error("negative rate {rate} at site {site}")]
    NegativeRate { rate: f64, site: usize },
    #[error("division by zero: {0}")]
    DivisionByZero(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for the numerical failures that map to CLI exit code 3.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::PoleHit(_)
                | Error::NegativeRate { .. }
                | Error::DivergentTerm { .. }
                | Error::DegenerateParameter(_)
                | Error::DivisionByZero(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
