//! Normalized p.d.f.s, extended unbinned likelihoods and a bounded minimizer.

use thiserror::Error;

use crate::functor::FunctorError;
use crate::integration::IntegrationError;
use crate::param::ParamError;
use crate::sampling::SamplingError;
use crate::store::StoreError;

mod fit;
mod minimizer;
mod model;
mod pdf;
mod toys;

pub use fit::{fit, FitConfig};
pub use minimizer::{minimize, FitResult, FitStatus, MinimizerConfig};
pub use model::{add_pdfs, nll, ExtendedModel};
pub use pdf::{make_pdf, AnalyticIntegral, Normalizer, NumericMethod, Pdf};
pub use toys::{generate_toy, SPECIES_COLUMN};

pub(crate) use model::{observables, yield_sums};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("{0}")]
    Config(String),
    #[error("no events to fit")]
    EmptyData,
    #[error("normalization of {shape} is {norm}; it must be positive and finite")]
    InvalidNorm { shape: String, norm: f64 },
    #[error("model density {density} is not positive at event {event}")]
    NonPositiveDensity { event: usize, density: f64 },
    #[error(transparent)]
    Functor(#[from] FunctorError),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
}
