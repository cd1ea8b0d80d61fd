//! Special functions used by the closed-form survival and pricing formulas.
//!
//! Everything here is implemented in-crate: the normal distribution, the log-gamma
//! function, modified Bessel functions of real order and the two hypergeometric
//! series needed by the quadrant integral.

mod bessel;
mod gamma;
mod hyper;
mod normal;

use thiserror::Error;

pub use bessel::{bessel_i, bessel_i_scaled, bessel_i_scaled_pair};
pub use gamma::{gamma, ln_gamma};
pub use hyper::{hyp2f1, hyp3f3};
pub use normal::{erf, erfc, erfcx, exp_norm_cdf, ln_norm_cdf, norm_cdf, norm_pdf};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecFunError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("result overflows f64 (natural log of value is {log_value:.1}); use the scaled variant")]
    Overflow { log_value: f64 },
    #[error("series did not reach the requested tolerance within {terms} terms")]
    NotConverged { terms: usize },
    #[error("series does not terminate and |z| = {abs_z} lies outside the unit disc")]
    NonTerminating { abs_z: f64 },
    #[error("cancellation in the series left an estimated relative error of {estimate:.3e}")]
    PrecisionLoss { estimate: f64 },
}

/// Truncation policy shared by the series evaluators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesControl {
    pub rel_tol: f64,
    pub max_terms: usize,
}

impl SeriesControl {
    pub fn new(rel_tol: f64, max_terms: usize) -> Result<Self, SpecFunError> {
        if !(rel_tol > 0.0) || !rel_tol.is_finite() {
            return Err(SpecFunError::InvalidArgument(format!("rel_tol must be positive and finite, got {rel_tol}")));
        }
        if max_terms == 0 {
            return Err(SpecFunError::InvalidArgument("max_terms must be at least 1".into()));
        }
        Ok(Self { rel_tol, max_terms })
    }
}

impl Default for SeriesControl {
    fn default() -> Self {
        Self { rel_tol: 1e-15, max_terms: 10_000 }
    }
}
