use std::fmt;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use libm::erf;

use crate::functor::FunctorExpr;
use crate::integration::{gk_adaptive, plain_mc, vegas, VegasConfig};
use crate::param::Parameter;
use crate::parallel::WorkerPool;
use crate::rng::RngKey;
use crate::sampling::BoundedRegion;

use super::FitError;

/// Closed-form integral of a shape over a region, given the shape's parameter values in order.
pub type AnalyticIntegral = dyn Fn(&[f64], &BoundedRegion) -> f64 + Send + Sync;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NumericMethod {
    /// Adaptive Gauss-Kronrod; one-dimensional ranges only.
    GaussKronrod { rel_tol: f64, max_intervals: usize },
    PlainMc { calls: u64, key: RngKey },
    Vegas { config: VegasConfig, key: RngKey },
}

#[derive(Clone)]
pub enum Normalizer {
    Analytic(Arc<AnalyticIntegral>),
    Numeric(NumericMethod),
}

impl Normalizer {
    pub fn analytic<F>(f: F) -> Self
    where
        F: Fn(&[f64], &BoundedRegion) -> f64 + Send + Sync + 'static,
    {
        Normalizer::Analytic(Arc::new(f))
    }

    /// Integral of a unit-normalized Gaussian with parameters `[mean, sigma]` over a 1-D range.
    pub fn gaussian() -> Self {
        Self::analytic(|p, r| {
            let (mean, sigma) = (p[0], p[1]);
            let z = |x: f64| (x - mean) / (sigma * std::f64::consts::SQRT_2);
            0.5 * (erf(z(r.upper(0))) - erf(z(r.lower(0))))
        })
    }

    /// Integral of `exp(−x/τ)` with parameters `[tau]` over a 1-D range.
    pub fn exponential() -> Self {
        Self::analytic(|p, r| {
            let tau = p[0];
            tau * ((-r.lower(0) / tau).exp() - (-r.upper(0) / tau).exp())
        })
    }

    pub fn gauss_kronrod() -> Self {
        Normalizer::Numeric(NumericMethod::GaussKronrod {
            rel_tol: 1e-10,
            max_intervals: 200,
        })
    }
}

impl fmt::Debug for Normalizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Normalizer::Analytic(_) => f.write_str("Analytic"),
            Normalizer::Numeric(m) => write!(f, "Numeric({m:?})"),
        }
    }
}

struct PdfInner {
    shape: FunctorExpr,
    normalizer: Normalizer,
    range: BoundedRegion,
    cache: Mutex<Option<(Vec<u64>, f64)>>,
    cache_enabled: AtomicBool,
    computations: AtomicU64,
}

/// A shape normalized to unit integral over `range`; zero outside it.
///
/// The normalization is cached against the exact bit patterns of the shape's
/// parameter values and recomputed only when one of them changes.
#[derive(Clone)]
pub struct Pdf(Arc<PdfInner>);

impl fmt::Debug for Pdf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Pdf")
            .field("shape", &format!("{:?}", self.0.shape))
            .field("normalizer", &self.0.normalizer)
            .field("range", &self.0.range)
            .finish()
    }
}

pub fn make_pdf(shape: FunctorExpr, normalizer: Normalizer, range: BoundedRegion) -> Result<Pdf, FitError> {
    if shape.arity() != range.dims() {
        return Err(FitError::Config(format!(
            "shape arity {} does not match range dimension {}",
            shape.arity(),
            range.dims()
        )));
    }
    if matches!(normalizer, Normalizer::Numeric(NumericMethod::GaussKronrod { .. })) && range.dims() != 1 {
        return Err(FitError::Config("Gauss-Kronrod normalization needs a 1-D range".into()));
    }
    Ok(Pdf(Arc::new(PdfInner {
        shape,
        normalizer,
        range,
        cache: Mutex::new(None),
        cache_enabled: AtomicBool::new(true),
        computations: AtomicU64::new(0),
    })))
}

impl Pdf {
    /// Gaussian p.d.f. on a 1-D range with analytic normalization.
    pub fn gaussian(mean: Parameter, sigma: Parameter, range: BoundedRegion) -> Result<Pdf, FitError> {
        make_pdf(FunctorExpr::gaussian(mean, sigma)?, Normalizer::gaussian(), range)
    }

    /// `exp(−x/τ)` p.d.f. on a 1-D range with analytic normalization.
    pub fn exponential(tau: Parameter, range: BoundedRegion) -> Result<Pdf, FitError> {
        make_pdf(FunctorExpr::exponential(tau), Normalizer::exponential(), range)
    }

    pub fn shape(&self) -> &FunctorExpr {
        &self.0.shape
    }

    pub fn range(&self) -> &BoundedRegion {
        &self.0.range
    }

    pub fn arity(&self) -> usize {
        self.0.shape.arity()
    }

    /// Number of times the normalization integral has actually been computed.
    pub fn normalizations(&self) -> u64 {
        self.0.computations.load(Ordering::Relaxed)
    }

    pub fn set_cache_enabled(&self, enabled: bool) {
        self.0.cache_enabled.store(enabled, Ordering::Relaxed);
        if !enabled {
            *self.0.cache.lock().expect("cache lock") = None;
        }
    }

    /// Integral of the shape over the range at the current parameter values.
    pub fn norm(&self, pool: &WorkerPool) -> Result<f64, FitError> {
        let values = self.0.shape.params().values();
        let key: Vec<u64> = values.iter().map(|v| v.to_bits()).collect();
        let use_cache = self.0.cache_enabled.load(Ordering::Relaxed);
        if use_cache {
            if let Some((k, n)) = &*self.0.cache.lock().expect("cache lock") {
                if *k == key {
                    return Ok(*n);
                }
            }
        }
        let n = self.compute_norm(&values, pool)?;
        self.0.computations.fetch_add(1, Ordering::Relaxed);
        if !(n > 0.0 && n.is_finite()) {
            return Err(FitError::InvalidNorm {
                shape: format!("{:?}", self.0.shape),
                norm: n,
            });
        }
        if use_cache {
            *self.0.cache.lock().expect("cache lock") = Some((key, n));
        }
        Ok(n)
    }

    fn compute_norm(&self, values: &[f64], pool: &WorkerPool) -> Result<f64, FitError> {
        let range = &self.0.range;
        let shape = &self.0.shape;
        Ok(match &self.0.normalizer {
            Normalizer::Analytic(f) => f(values, range),
            Normalizer::Numeric(NumericMethod::GaussKronrod { rel_tol, max_intervals }) => {
                gk_adaptive(shape, range.lower(0), range.upper(0), *rel_tol, *max_intervals)?.value
            }
            Normalizer::Numeric(NumericMethod::PlainMc { calls, key }) => {
                plain_mc(shape, range, *calls, *key, pool)?.value
            }
            Normalizer::Numeric(NumericMethod::Vegas { config, key }) => {
                vegas(shape, range, config, *key, pool)?.result.value
            }
        })
    }

    pub(crate) fn contains(&self, x: &[f64]) -> bool {
        self.0
            .range
            .bounds()
            .iter()
            .zip(x)
            .all(|(&(lo, hi), &v)| v >= lo && v <= hi)
    }

    /// Shape value divided by `norm`, zero outside the range.
    #[inline]
    pub(crate) fn value_with_norm(&self, x: &[f64], norm: f64) -> Result<f64, FitError> {
        if !self.contains(x) {
            return Ok(0.0);
        }
        Ok(self.0.shape.eval_unchecked(x)? / norm)
    }

    pub fn pdf_value(&self, x: &[f64]) -> Result<f64, FitError> {
        if x.len() != self.arity() {
            return Err(FitError::Config(format!(
                "point has {} coordinates, p.d.f. takes {}",
                x.len(),
                self.arity()
            )));
        }
        let norm = self.norm(&WorkerPool::serial())?;
        self.value_with_norm(x, norm)
    }
}
