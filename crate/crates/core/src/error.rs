use thiserror::Error;

/// Errors raised by the simulation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("step rejected: CFL number {cfl:.6} exceeds limit {limit}")]
    CflViolation { cfl: f64, limit: f64 },

    #[error("numerical blow-up in field `{field}` at cell {cell} (t = {time})")]
    NumericalBlowup { field: String, cell: usize, time: f64 },

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Strips any step wrapper.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStep { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for errors caused by the numerics rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self.root(), Error::CflViolation { .. } | Error::NumericalBlowup { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
