//! Numerical integration: plain Monte Carlo, VEGAS adaptive importance
//! sampling, and static/adaptive Gauss-Kronrod (G7/K15) quadrature.

use thiserror::Error;

use crate::functor::FunctorError;
use crate::sampling::SamplingError;

mod plain;
mod quadrature;
mod vegas;

pub use plain::plain_mc;
pub use quadrature::{gk15_static, gk_adaptive};
pub use vegas::{vegas, vegas_refine, vegas_with_grid, VegasConfig, VegasGrid, VegasRun};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("integrand is not finite ({value}) at {point:?}")]
    NonFinite { point: Vec<f64>, value: f64 },
    #[error("integrand has arity {expr}, domain has {domain} dimensions")]
    ArityMismatch { expr: usize, domain: usize },
    #[error("degenerate VEGAS grid in dimension {dim}: {detail}")]
    DegenerateGrid { dim: usize, detail: String },
    #[error(transparent)]
    Functor(#[from] FunctorError),
    #[error(transparent)]
    Region(#[from] SamplingError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationResult {
    pub value: f64,
    /// One standard deviation, or the Gauss-Kronrod discrepancy estimate for quadrature.
    pub error: f64,
    pub iterations: usize,
    /// Inter-iteration consistency for VEGAS; zero for the other methods.
    pub chi2_per_dof: f64,
    pub calls_used: u64,
    /// False when an adaptive method stopped at its interval budget.
    pub converged: bool,
}

pub(crate) fn checked(value: f64, point: &[f64]) -> Result<f64, IntegrationError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(IntegrationError::NonFinite {
            point: point.to_vec(),
            value,
        })
    }
}
