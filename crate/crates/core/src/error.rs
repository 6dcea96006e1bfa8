use thiserror::Error;

/// Errors raised by the simulator, sensing pipeline and controller.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{quantity} = {value} is outside the model range [{min}, {max}]")]
    OutOfModelRange {
        quantity: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("quasi-static solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    SolverFailure { iterations: usize, residual: f64 },

    #[error("no ground contact: the body twist is undetermined")]
    DegenerateSupport,

    #[error("cycle {cycle}, step {step}: {source}")]
    Trial {
        cycle: usize,
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("controller is not calibrated (tau0 unset)")]
    Uncalibrated,

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("decision structure: {0}")]
    Structure(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
