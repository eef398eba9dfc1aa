use thiserror::Error;

/// Errors raised anywhere in the crate.
///
/// The CLI maps [`Error::is_validation`] errors to exit code 1 and everything
/// else to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unconfined potential: no box up to half-width {cap} keeps V >= {level} on its boundary")]
    Unconfined { cap: f64, level: f64 },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("not a DPP kernel at this discretization: eigenvalue {eigenvalue} outside [0, 1]")]
    NotADppKernel { eigenvalue: f64 },

    #[error("probe point {point:?} lies outside the grid box [-{half_width}, {half_width}]")]
    ProbeOutsideBox { point: Vec<f64>, half_width: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Syntax { .. }
                | Error::UnknownIdentifier { .. }
                | Error::InvalidArgument(_)
                | Error::ProbeOutsideBox { .. }
                | Error::Unconfined { .. }
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
