use thiserror::Error;

use crate::calibrate::CalibrationResult;
use crate::specfun::SpecFunError;

/// Failures surfaced by the library and the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    /// Input data violates the schema or a model invariant. Every violation is listed.
    #[error("invalid input:\n  - {}", .0.join("\n  - "))]
    Schema(Vec<String>),
    /// The model is not applicable at these parameters (for instance a non-positive
    /// default boundary that would enter a logarithm).
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
    #[error("eigenmode series not converged after {n_max} modes (tail estimate {tail:.3e})")]
    SeriesNotConverged { n_max: usize, tail: f64 },
    #[error("boundary reconstruction mismatch: {what} off by {gap:.3e}")]
    BoundaryMismatch { what: String, gap: f64 },
    #[error("did not converge: {0}")]
    NonConvergence(String),
    #[error("calibration stopped before convergence at sigma = {:?}, rho = {} (objective {:.3e})", .0.sigma, .0.rho, .0.objective)]
    CalibrationNotConverged(Box<CalibrationResult>),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for this failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Schema(_) | Error::Io(_) => 2,
            Error::Domain(_) | Error::Numerical(_) | Error::SpecFun(_) | Error::BoundaryMismatch { .. } => 3,
            Error::SeriesNotConverged { .. } | Error::NonConvergence(_) | Error::CalibrationNotConverged(_) => 4,
        }
    }

    pub(crate) fn schema(msg: impl Into<String>) -> Self {
        Error::Schema(vec![msg.into()])
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Keeps the first error raised inside a quadrature integrand, which must return a
/// plain `f64`.
#[derive(Debug, Default)]
pub(crate) struct ErrorSlot(std::cell::RefCell<Option<Error>>);

impl ErrorSlot {
    pub(crate) fn new() -> Self {
        Self::default()
    }

    pub(crate) fn take(&self, r: Result<f64>) -> f64 {
        match r {
            Ok(v) => v,
            Err(e) => {
                self.0.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    }

    pub(crate) fn check<T>(self, value: T) -> Result<T> {
        match self.0.into_inner() {
            Some(e) => Err(e),
            None => Ok(value),
        }
    }
}
