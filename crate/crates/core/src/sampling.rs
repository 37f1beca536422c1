//! Accept-reject sampling of multidimensional densities.

use thiserror::Error;

use crate::functor::{FunctorError, FunctorExpr};
use crate::parallel::{WorkerPool, CHUNK_SIZE};
use crate::rng::RngKey;
use crate::store::{Column, ColumnSchema, ColumnKind, ColumnStore};

/// Proposals tried for a single event before giving up.
pub const MAX_PROPOSALS_PER_EVENT: u64 = 10_000_000;

/// Points in the quasi-random scan that estimates a missing ceiling.
pub const CEILING_SCAN_POINTS: usize = 10_000;

/// Safety factor applied to the scanned maximum.
pub const CEILING_MARGIN: f64 = 1.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplingError {
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("density has arity {expr}, region has {region} dimensions")]
    ArityMismatch { expr: usize, region: usize },
    #[error("density {value} exceeds ceiling {ceiling} at {point:?}")]
    CeilingViolated {
        point: Vec<f64>,
        value: f64,
        ceiling: f64,
    },
    #[error("density {value} is negative or not finite at {point:?}")]
    InvalidDensity { point: Vec<f64>, value: f64 },
    #[error("ceiling must be positive and finite, got {0}")]
    InvalidCeiling(f64),
    #[error("event {event}: no proposal accepted after {attempts} attempts")]
    NoAcceptance { event: u64, attempts: u64 },
    #[error(transparent)]
    Functor(#[from] FunctorError),
}

/// Axis-aligned box `Π [lowerᵢ, upperᵢ]`, any number of dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedRegion {
    bounds: Vec<(f64, f64)>,
}

impl BoundedRegion {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self, SamplingError> {
        if bounds.is_empty() {
            return Err(SamplingError::InvalidRegion("no dimensions".into()));
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(SamplingError::InvalidRegion(format!(
                    "dimension {i}: [{lo}, {hi}] is not a finite interval with lower < upper"
                )));
            }
        }
        Ok(Self { bounds })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self, SamplingError> {
        Self::new(vec![(lo, hi)])
    }

    /// `[lo, hi]` in each of `dims` dimensions.
    pub fn cube(dims: usize, lo: f64, hi: f64) -> Result<Self, SamplingError> {
        Self::new(vec![(lo, hi); dims])
    }

    pub fn dims(&self) -> usize {
        self.bounds.len()
    }

    pub fn lower(&self, dim: usize) -> f64 {
        self.bounds[dim].0
    }

    pub fn upper(&self, dim: usize) -> f64 {
        self.bounds[dim].1
    }

    pub fn width(&self, dim: usize) -> f64 {
        self.bounds[dim].1 - self.bounds[dim].0
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn volume(&self) -> f64 {
        self.bounds.iter().map(|(lo, hi)| hi - lo).product()
    }

    /// Maps a point of the unit cube into the region.
    #[inline]
    pub fn from_unit(&self, unit: &[f64], out: &mut [f64]) {
        for ((o, &u), &(lo, hi)) in out.iter_mut().zip(unit).zip(&self.bounds) {
            *o = lo + u * (hi - lo);
        }
    }
}

/// `1.1 ×` the maximum of `expr` over a quasi-random scan of `region`.
pub fn estimate_ceiling(expr: &FunctorExpr, region: &BoundedRegion) -> Result<f64, SamplingError> {
    let d = region.dims();
    if expr.arity() != d {
        return Err(SamplingError::ArityMismatch {
            expr: expr.arity(),
            region: d,
        });
    }
    // Kronecker sequence with the generalized golden ratio (the R_d sequence).
    let mut phi = 2.0f64;
    for _ in 0..64 {
        phi = (1.0 + phi).powf(1.0 / (d as f64 + 1.0));
    }
    let alpha: Vec<f64> = (1..=d).map(|j| phi.powi(-(j as i32)).fract()).collect();
    let mut unit = vec![0.0; d];
    let mut point = vec![0.0; d];
    let mut max = f64::NEG_INFINITY;
    for k in 0..CEILING_SCAN_POINTS {
        for (u, a) in unit.iter_mut().zip(&alpha) {
            *u = (0.5 + (k as f64 + 1.0) * a).fract();
        }
        region.from_unit(&unit, &mut point);
        let f = expr.eval(&point)?;
        if !f.is_finite() || f < 0.0 {
            return Err(SamplingError::InvalidDensity {
                point: point.clone(),
                value: f,
            });
        }
        max = max.max(f);
    }
    let ceiling = CEILING_MARGIN * max;
    if !(ceiling > 0.0) {
        return Err(SamplingError::InvalidCeiling(ceiling));
    }
    Ok(ceiling)
}

/// Draws `n` points distributed as `expr` restricted to `region`.
///
/// Output columns are `x0, x1, …`. Event `i` consumes proposals from its own
/// key `key.at(i)` until one is accepted, so the result is identical for any
/// worker count. When `ceiling` is `None` it is estimated by
/// [`estimate_ceiling`]; a proposal above the ceiling aborts the run.
pub fn sample_pdf(
    expr: &FunctorExpr,
    region: &BoundedRegion,
    n: usize,
    ceiling: Option<f64>,
    key: RngKey,
    pool: &WorkerPool,
) -> Result<ColumnStore, SamplingError> {
    sample_pdf_counted(expr, region, n, ceiling, key, pool).map(|(store, _)| store)
}

/// [`sample_pdf`] that also returns the total number of proposals made.
pub fn sample_pdf_counted(
    expr: &FunctorExpr,
    region: &BoundedRegion,
    n: usize,
    ceiling: Option<f64>,
    key: RngKey,
    pool: &WorkerPool,
) -> Result<(ColumnStore, u64), SamplingError> {
    let d = region.dims();
    if expr.arity() != d {
        return Err(SamplingError::ArityMismatch {
            expr: expr.arity(),
            region: d,
        });
    }
    let ceiling = match ceiling {
        Some(c) if c > 0.0 && c.is_finite() => c,
        Some(c) => return Err(SamplingError::InvalidCeiling(c)),
        None => estimate_ceiling(expr, region)?,
    };
    let _frozen = expr.params().freeze();
    let chunks = pool.try_map_chunks(n, CHUNK_SIZE, |rows| {
        let mut values = vec![0.0; rows.len() * d];
        let mut proposals = 0u64;
        let mut unit = vec![0.0; d];
        let mut point = vec![0.0; d];
        for (slot, i) in rows.enumerate() {
            let mut rng = key.at(i as u64).rng();
            let mut attempts = 0u64;
            loop {
                if attempts == MAX_PROPOSALS_PER_EVENT {
                    return Err(SamplingError::NoAcceptance {
                        event: i as u64,
                        attempts,
                    });
                }
                attempts += 1;
                for u in unit.iter_mut() {
                    *u = rng.uniform();
                }
                region.from_unit(&unit, &mut point);
                let f = expr.eval_unchecked(&point)?;
                if !(f >= 0.0) || !f.is_finite() {
                    return Err(SamplingError::InvalidDensity {
                        point: point.clone(),
                        value: f,
                    });
                }
                if f > ceiling {
                    return Err(SamplingError::CeilingViolated {
                        point: point.clone(),
                        value: f,
                        ceiling,
                    });
                }
                if rng.uniform() * ceiling < f {
                    break;
                }
            }
            proposals += attempts;
            values[slot * d..(slot + 1) * d].copy_from_slice(&point);
        }
        Ok((values, proposals))
    })?;
    let mut columns = vec![Vec::with_capacity(n); d];
    let mut proposals = 0;
    for (values, p) in chunks {
        proposals += p;
        for row in values.chunks_exact(d) {
            for (c, &v) in columns.iter_mut().zip(row) {
                c.push(v);
            }
        }
    }
    let schema = ColumnSchema::homogeneous((0..d).map(|j| format!("x{j}")), ColumnKind::Real64)
        .expect("generated names are unique identifiers");
    let store = ColumnStore::from_columns(schema, columns.into_iter().map(Column::Real64).collect())
        .expect("columns built with equal lengths");
    Ok((store, proposals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::param::{ParamSet, Parameter};

    fn std_gauss() -> FunctorExpr {
        FunctorExpr::gaussian(
            Parameter::new("mu", 0.0).unwrap(),
            Parameter::new("sigma", 1.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn region_validation() {
        assert!(BoundedRegion::new(vec![]).is_err());
        assert!(BoundedRegion::interval(1.0, 1.0).is_err());
        assert!(BoundedRegion::interval(0.0, f64::INFINITY).is_err());
        let r = BoundedRegion::new(vec![(0.0, 2.0), (-1.0, 1.0)]).unwrap();
        assert_eq!(r.volume(), 4.0);
        let big = BoundedRegion::cube(64, 0.0, 1.0).unwrap();
        assert_eq!(big.dims(), 64);
    }

    #[test]
    fn constant_density_accepts_everything() {
        let one = FunctorExpr::constant(1, 1.0);
        let region = BoundedRegion::interval(0.0, 1.0).unwrap();
        let (store, proposals) =
            sample_pdf_counted(&one, &region, 10_000, Some(1.0), RngKey::new(5, 0, 0), &WorkerPool::serial())
                .unwrap();
        assert_eq!(proposals, 10_000);
        let xs = store.real_column("x0").unwrap();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - 0.5).abs() < 4.0 * (1.0 / 12.0 / 1e4f64).sqrt());
    }

    #[test]
    fn gaussian_sample_mean() {
        let region = BoundedRegion::interval(-6.0, 6.0).unwrap();
        let store = sample_pdf(&std_gauss(), &region, 1_000_000, None, RngKey::new(11, 0, 0), &WorkerPool::new(4))
            .unwrap();
        let xs = store.real_column("x0").unwrap();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        // σ of the mean is 1e-3; 0.004 is 4σ.
        assert!(mean.abs() < 0.004, "{mean}");
    }

    #[test]
    fn low_ceiling_is_reported() {
        let region = BoundedRegion::interval(-6.0, 6.0).unwrap();
        let err = sample_pdf(&std_gauss(), &region, 1000, Some(0.1), RngKey::new(1, 0, 0), &WorkerPool::serial())
            .unwrap_err();
        match err {
            SamplingError::CeilingViolated { point, value, ceiling } => {
                assert!(value > ceiling);
                assert_eq!(point.len(), 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn estimated_ceiling_bounds_the_peak() {
        let region = BoundedRegion::interval(-6.0, 6.0).unwrap();
        let c = estimate_ceiling(&std_gauss(), &region).unwrap();
        assert!((0.3989422804014327..1.1 * 0.3989422804014327 + 1e-12).contains(&c));
    }

    #[test]
    fn worker_count_invariant() {
        let f = FunctorExpr::wrap(2, ParamSet::new(), |x, _| (x[0] * x[1]).cos().powi(2));
        let region = BoundedRegion::cube(2, -2.0, 2.0).unwrap();
        let key = RngKey::new(99, 0, 0);
        let a = sample_pdf(&f, &region, 20_000, Some(1.0), key, &WorkerPool::new(1)).unwrap();
        let b = sample_pdf(&f, &region, 20_000, Some(1.0), key, &WorkerPool::new(8)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ks_distance_against_normal_cdf() {
        let n = 100_000;
        let region = BoundedRegion::interval(-10.0, 10.0).unwrap();
        let store = sample_pdf(&std_gauss(), &region, n, None, RngKey::new(2024, 0, 0), &WorkerPool::new(2)).unwrap();
        let mut xs = store.real_column("x0").unwrap().to_vec();
        xs.sort_by(f64::total_cmp);
        let cdf = |x: f64| 0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2));
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < 1.63 / (n as f64).sqrt(), "KS distance {d}");
    }
}
