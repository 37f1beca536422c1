use crate::functor::FunctorExpr;
use crate::parallel::{Moments, WorkerPool, CHUNK_SIZE};
use crate::rng::RngKey;
use crate::sampling::BoundedRegion;

use super::{checked, IntegrationError, IntegrationResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VegasConfig {
    pub calls_per_iteration: u64,
    pub iterations: usize,
    /// Grid stiffness; 0 freezes the grid, larger values adapt faster.
    pub alpha: f64,
    pub bins: usize,
    /// Refine the grid after each iteration.
    pub adapt: bool,
}

impl Default for VegasConfig {
    fn default() -> Self {
        Self {
            calls_per_iteration: 10_000,
            iterations: 5,
            alpha: 1.5,
            bins: 50,
            adapt: true,
        }
    }
}

/// Separable importance grid: per dimension, `bins + 1` strictly increasing
/// edges whose first and last entries are the region bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct VegasGrid {
    edges: Vec<Vec<f64>>,
}

impl VegasGrid {
    /// Equal-width bins over `region`.
    pub fn uniform(region: &BoundedRegion, bins: usize) -> Result<Self, IntegrationError> {
        if bins == 0 {
            return Err(IntegrationError::InvalidInput("bins must be positive".into()));
        }
        let edges = region
            .bounds()
            .iter()
            .map(|&(lo, hi)| {
                (0..=bins)
                    .map(|k| match k {
                        0 => lo,
                        k if k == bins => hi,
                        k => lo + (hi - lo) * (k as f64 / bins as f64),
                    })
                    .collect()
            })
            .collect();
        Ok(Self { edges })
    }

    pub fn from_edges(edges: Vec<Vec<f64>>) -> Result<Self, IntegrationError> {
        if edges.is_empty() {
            return Err(IntegrationError::InvalidInput("grid has no dimensions".into()));
        }
        let bins = edges[0].len().saturating_sub(1);
        for (dim, e) in edges.iter().enumerate() {
            if e.len() != bins + 1 || bins == 0 {
                return Err(IntegrationError::InvalidInput(format!(
                    "dimension {dim} has {} edges, expected {}",
                    e.len(),
                    bins + 1
                )));
            }
            check_monotone(dim, e)?;
        }
        Ok(Self { edges })
    }

    pub fn dims(&self) -> usize {
        self.edges.len()
    }

    pub fn bins(&self) -> usize {
        self.edges[0].len() - 1
    }

    pub fn edges(&self, dim: usize) -> &[f64] {
        &self.edges[dim]
    }

    pub fn region(&self) -> BoundedRegion {
        BoundedRegion::new(
            self.edges
                .iter()
                .map(|e| (e[0], e[e.len() - 1]))
                .collect(),
        )
        .expect("grid edges span a valid box")
    }

    /// Maps a unit-cube point through the grid; returns the Jacobian and
    /// records each coordinate's bin.
    #[inline]
    fn map(&self, unit: &[f64], x: &mut [f64], bin: &mut [usize]) -> f64 {
        let bins = self.bins();
        let nb = bins as f64;
        let mut jac = 1.0;
        for (d, e) in self.edges.iter().enumerate() {
            let y = unit[d] * nb;
            let k = (y as usize).min(bins - 1);
            let width = e[k + 1] - e[k];
            x[d] = e[k] + (y - k as f64) * width;
            jac *= nb * width;
            bin[d] = k;
        }
        jac
    }
}

fn check_monotone(dim: usize, e: &[f64]) -> Result<(), IntegrationError> {
    match e.windows(2).position(|w| !(w[0] < w[1])) {
        None => Ok(()),
        Some(k) => Err(IntegrationError::DegenerateGrid {
            dim,
            detail: format!("edges {k} and {} are {} and {}", k + 1, e[k], e[k + 1]),
        }),
    }
}

/// Damped VEGAS rebinning.
///
/// Per dimension the accumulated weights are smoothed with their neighbours,
/// each bin's share `r` is damped to `((r − 1)/ln r)^alpha`, and new edges
/// are placed so that every new bin carries an equal amount of damped weight.
/// A dimension whose weights are all zero keeps its edges.
pub fn vegas_refine(grid: &VegasGrid, weights: &[Vec<f64>], alpha: f64) -> Result<VegasGrid, IntegrationError> {
    let bins = grid.bins();
    if weights.len() != grid.dims() || weights.iter().any(|w| w.len() != bins) {
        return Err(IntegrationError::InvalidInput(format!(
            "weights must be {} × {bins}",
            grid.dims()
        )));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(IntegrationError::InvalidInput(format!("alpha must be ≥ 0, got {alpha}")));
    }
    let mut out = grid.clone();
    for (dim, (w, edges)) in weights.iter().zip(&mut out.edges).enumerate() {
        if w.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(IntegrationError::InvalidInput(format!(
                "dimension {dim}: weights must be finite and non-negative"
            )));
        }
        if bins < 2 {
            continue;
        }
        let mut smooth = vec![0.0; bins];
        smooth[0] = 0.5 * (w[0] + w[1]);
        for k in 1..bins - 1 {
            smooth[k] = (w[k - 1] + w[k] + w[k + 1]) / 3.0;
        }
        smooth[bins - 1] = 0.5 * (w[bins - 2] + w[bins - 1]);
        let total: f64 = smooth.iter().sum();
        if total <= 0.0 {
            continue;
        }
        let damped: Vec<f64> = smooth
            .iter()
            .map(|&s| {
                if s <= 0.0 {
                    0.0
                } else {
                    let r = s / total;
                    if r >= 1.0 {
                        1.0
                    } else {
                        ((r - 1.0) / r.ln()).powf(alpha)
                    }
                }
            })
            .collect();
        let total: f64 = damped.iter().sum();
        let per_bin = total / bins as f64;
        let old = edges.clone();
        let mut acc = 0.0;
        let mut next = 1;
        for k in 0..bins {
            acc += damped[k];
            while acc > per_bin && next < bins {
                acc -= per_bin;
                edges[next] = old[k + 1] - (old[k + 1] - old[k]) * acc / damped[k];
                next += 1;
            }
        }
        // Rounding can leave the last interior edge unplaced.
        for e in edges.iter_mut().take(bins).skip(next) {
            *e = old[bins];
        }
        check_monotone(dim, edges)?;
    }
    Ok(out)
}

/// Result of a VEGAS run together with the grid after the last iteration.
#[derive(Debug, Clone)]
pub struct VegasRun {
    pub result: IntegrationResult,
    pub grid: VegasGrid,
    /// The integrand was negative somewhere; refinement used `|f|`.
    pub negative_values: bool,
}

/// VEGAS on `region` starting from a uniform grid.
pub fn vegas(
    expr: &FunctorExpr,
    region: &BoundedRegion,
    config: &VegasConfig,
    key: RngKey,
    pool: &WorkerPool,
) -> Result<VegasRun, IntegrationError> {
    let grid = VegasGrid::uniform(region, config.bins)?;
    vegas_with_grid(expr, grid, config, key, pool)
}

/// Relative spread of `f·jacobian` attributable to rounding alone.
const ROUNDOFF_SPREAD: f64 = 64.0 * f64::EPSILON;

struct ChunkAccumulator {
    moments: Moments,
    bin_weights: Vec<f64>,
    negative: bool,
}

/// VEGAS starting from `grid`; `config.bins` is ignored in favour of the grid's own.
///
/// Call `c` of iteration `i` draws from `key.at(i·calls_per_iteration + c)`.
/// Iterations are combined by inverse-variance weighting and
/// `chi2_per_dof` measures their mutual consistency.
pub fn vegas_with_grid(
    expr: &FunctorExpr,
    mut grid: VegasGrid,
    config: &VegasConfig,
    key: RngKey,
    pool: &WorkerPool,
) -> Result<VegasRun, IntegrationError> {
    let dims = grid.dims();
    let bins = grid.bins();
    if expr.arity() != dims {
        return Err(IntegrationError::ArityMismatch {
            expr: expr.arity(),
            domain: dims,
        });
    }
    let calls = config.calls_per_iteration;
    if calls < (2 * bins * dims) as u64 || calls < 2 {
        return Err(IntegrationError::InvalidInput(format!(
            "calls_per_iteration {calls} is below 2·bins·dims = {}",
            2 * bins * dims
        )));
    }
    if config.iterations == 0 {
        return Err(IntegrationError::InvalidInput("iterations must be positive".into()));
    }
    let _frozen = expr.params().freeze();
    let mut estimates = Vec::with_capacity(config.iterations);
    let mut negative_values = false;
    for it in 0..config.iterations {
        let base = key.at(it as u64 * calls);
        let grid_ref = &grid;
        let chunks = pool.try_map_chunks(calls as usize, CHUNK_SIZE, |range| {
            let mut unit = vec![0.0; dims];
            let mut x = vec![0.0; dims];
            let mut bin = vec![0usize; dims];
            let mut acc = ChunkAccumulator {
                moments: Moments::default(),
                bin_weights: vec![0.0; dims * bins],
                negative: false,
            };
            for c in range {
                let mut rng = base.at(c as u64).rng();
                for u in unit.iter_mut() {
                    *u = rng.uniform();
                }
                let jac = grid_ref.map(&unit, &mut x, &mut bin);
                let f = checked(expr.eval_unchecked(&x)?, &x)?;
                acc.negative |= f < 0.0;
                let fval = f * jac;
                acc.moments.push(fval);
                let sq = fval * fval;
                for (d, &k) in bin.iter().enumerate() {
                    acc.bin_weights[d * bins + k] += sq;
                }
            }
            Ok::<_, IntegrationError>(acc)
        })?;
        let mut moments = Moments::default();
        let mut weights = vec![vec![0.0; bins]; dims];
        for chunk in chunks {
            moments = moments.merge(chunk.moments);
            negative_values |= chunk.negative;
            for (d, w) in weights.iter_mut().enumerate() {
                for (k, v) in w.iter_mut().enumerate() {
                    *v += chunk.bin_weights[d * bins + k];
                }
            }
        }
        let mut variance = moments.variance();
        if variance.sqrt() <= ROUNDOFF_SPREAD * moments.mean.abs() {
            variance = 0.0;
        }
        estimates.push((moments.mean, variance / moments.n));
        if config.adapt && config.alpha > 0.0 {
            grid = vegas_refine(&grid, &weights, config.alpha)?;
        }
    }
    let (value, error, chi2_per_dof) = combine(&estimates);
    Ok(VegasRun {
        result: IntegrationResult {
            value,
            error,
            iterations: config.iterations,
            chi2_per_dof,
            calls_used: calls * config.iterations as u64,
            converged: true,
        },
        grid,
        negative_values,
    })
}

/// Inverse-variance mean of `(value, variance)` pairs with its error and χ²/dof.
fn combine(estimates: &[(f64, f64)]) -> (f64, f64, f64) {
    let exact: Vec<f64> = estimates
        .iter()
        .filter(|(_, v)| *v == 0.0)
        .map(|(m, _)| *m)
        .collect();
    if !exact.is_empty() {
        return (exact.iter().sum::<f64>() / exact.len() as f64, 0.0, 0.0);
    }
    let sum_w: f64 = estimates.iter().map(|(_, v)| 1.0 / v).sum();
    let value = estimates.iter().map(|(m, v)| m / v).sum::<f64>() / sum_w;
    let chi2_per_dof = if estimates.len() > 1 {
        estimates.iter().map(|(m, v)| (m - value).powi(2) / v).sum::<f64>()
            / (estimates.len() - 1) as f64
    } else {
        0.0
    };
    (value, (1.0 / sum_w).sqrt(), chi2_per_dof)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::param::ParamSet;

    fn unit_grid(bins: usize) -> VegasGrid {
        VegasGrid::uniform(&BoundedRegion::interval(0.0, 1.0).unwrap(), bins).unwrap()
    }

    #[test]
    fn constant_integrand() {
        let one = FunctorExpr::constant(2, 1.0);
        let region = BoundedRegion::cube(2, 0.0, 1.0).unwrap();
        let cfg = VegasConfig { calls_per_iteration: 1000, iterations: 3, ..Default::default() };
        let run = vegas(&one, &region, &cfg, RngKey::new(1, 0, 0), &WorkerPool::serial()).unwrap();
        assert!((run.result.value - 1.0).abs() < 1e-13, "{:?}", run.result);
        assert!(run.result.error < 1e-12);
        assert!(run.result.chi2_per_dof < 1e-6);
        assert_eq!(run.result.calls_used, 3000);
    }

    #[test]
    fn uniform_weights_are_a_fixed_point() {
        let g = unit_grid(10);
        let r = vegas_refine(&g, &[vec![2.0; 10]], 1.5).unwrap();
        for (a, b) in g.edges(0).iter().zip(r.edges(0)) {
            assert!((a - b).abs() < 1e-14, "{a} {b}");
        }
    }

    #[test]
    fn single_heavy_bin_is_subdivided() {
        let g = unit_grid(10);
        let mut w = vec![0.0; 10];
        w[4] = 1.0;
        let r = vegas_refine(&g, &[w], 1.5).unwrap();
        let e = r.edges(0);
        assert_eq!(e[0], 0.0);
        assert_eq!(e[10], 1.0);
        assert!(e.windows(2).all(|p| p[0] < p[1]));
        let inside = e.iter().filter(|&&x| x > 0.4 && x < 0.5).count();
        assert!(inside >= 2, "{e:?}");
        assert!(e[1] > 0.1);
    }

    #[test]
    fn zero_weight_dimension_unchanged() {
        let g = VegasGrid::uniform(&BoundedRegion::cube(2, 0.0, 1.0).unwrap(), 5).unwrap();
        let r = vegas_refine(&g, &[vec![0.0; 5], vec![1.0, 0.0, 0.0, 0.0, 5.0]], 1.5).unwrap();
        assert_eq!(r.edges(0), g.edges(0));
        assert_ne!(r.edges(1), g.edges(1));
    }

    #[test]
    fn refinement_concentrates_on_gaussian_peak() {
        let sigma = 0.05;
        let f = FunctorExpr::wrap(1, ParamSet::new(), move |x, _| {
            (-0.5 * ((x[0] - 0.5) / sigma).powi(2)).exp()
        });
        let region = BoundedRegion::interval(0.0, 1.0).unwrap();
        let cfg = VegasConfig { calls_per_iteration: 20_000, iterations: 2, ..Default::default() };
        let run = vegas(&f, &region, &cfg, RngKey::new(5, 0, 0), &WorkerPool::serial()).unwrap();
        let e = run.grid.edges(0);
        let centres_inside = e
            .windows(2)
            .filter(|w| (0.5 * (w[0] + w[1]) - 0.5).abs() <= 2.0 * sigma)
            .count();
        assert!(centres_inside as f64 >= 0.6 * 50.0, "{centres_inside} of 50");
    }

    #[test]
    fn agrees_with_analytic_gaussian() {
        let sigma = 0.1;
        let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        let f = FunctorExpr::wrap(3, ParamSet::new(), move |x, _| {
            x.iter().map(|xi| norm * (-0.5 * ((xi - 0.5) / sigma).powi(2)).exp()).product()
        });
        let truth = libm::erf(0.5 / (sigma * 2f64.sqrt())).powi(3);
        let region = BoundedRegion::cube(3, 0.0, 1.0).unwrap();
        let cfg = VegasConfig { calls_per_iteration: 50_000, iterations: 6, ..Default::default() };
        let run = vegas(&f, &region, &cfg, RngKey::new(11, 0, 0), &WorkerPool::new(2)).unwrap();
        let r = run.result;
        assert!((r.value - truth).abs() < 3.0 * r.error, "{r:?} vs {truth}");
        assert!(r.error / r.value < 0.01);
        assert!(!run.negative_values);
    }

    #[test]
    fn worker_invariant() {
        let f = FunctorExpr::wrap(2, ParamSet::new(), |x, _| (-(x[0] * x[0] + 3.0 * x[1])).exp());
        let region = BoundedRegion::cube(2, 0.0, 2.0).unwrap();
        let cfg = VegasConfig { calls_per_iteration: 20_000, iterations: 3, ..Default::default() };
        let key = RngKey::new(2, 0, 0);
        let a = vegas(&f, &region, &cfg, key, &WorkerPool::new(1)).unwrap();
        let b = vegas(&f, &region, &cfg, key, &WorkerPool::new(8)).unwrap();
        assert_eq!(a.result.value.to_bits(), b.result.value.to_bits());
        assert_eq!(a.result.error.to_bits(), b.result.error.to_bits());
        assert_eq!(a.grid, b.grid);
    }

    #[test]
    fn frozen_grid_is_unbiased() {
        let f = FunctorExpr::wrap(2, ParamSet::new(), |x, _| (-4.0 * (x[0] + x[1])).exp());
        // (1 − e⁻⁴)² / 16
        let truth = (1.0 - (-4.0f64).exp()).powi(2) / 16.0;
        let region = BoundedRegion::cube(2, 0.0, 1.0).unwrap();
        let warm = VegasConfig { calls_per_iteration: 10_000, iterations: 3, bins: 20, ..Default::default() };
        let pool = WorkerPool::serial();
        let grid = vegas(&f, &region, &warm, RngKey::new(99, 0, 0), &pool).unwrap().grid;
        let frozen = VegasConfig { calls_per_iteration: 2_000, iterations: 1, bins: 20, adapt: false, ..Default::default() };
        let pulls: Vec<f64> = (0..100)
            .map(|s| {
                let r = vegas_with_grid(&f, grid.clone(), &frozen, RngKey::new(s, 0, 0), &pool).unwrap().result;
                (r.value - truth) / r.error
            })
            .collect();
        let mean = pulls.iter().sum::<f64>() / pulls.len() as f64;
        assert!(mean.abs() < 0.3, "{mean}");
    }

    #[test]
    fn negative_integrand_is_flagged() {
        let f = FunctorExpr::variable(1, 0);
        let region = BoundedRegion::interval(-1.0, 2.0).unwrap();
        let cfg = VegasConfig { calls_per_iteration: 10_000, iterations: 2, bins: 10, ..Default::default() };
        let run = vegas(&f, &region, &cfg, RngKey::new(4, 0, 0), &WorkerPool::serial()).unwrap();
        assert!(run.negative_values);
        assert!((run.result.value - 1.5).abs() < 4.0 * run.result.error);
    }

    #[test]
    fn rejects_bad_input() {
        let f = FunctorExpr::constant(2, 1.0);
        let region = BoundedRegion::cube(2, 0.0, 1.0).unwrap();
        let small = VegasConfig { calls_per_iteration: 199, ..Default::default() };
        assert!(vegas(&f, &region, &small, RngKey::default(), &WorkerPool::serial()).is_err());
        assert!(VegasGrid::from_edges(vec![vec![0.0, 0.5, 0.5, 1.0]]).is_err());
        assert!(vegas_refine(&unit_grid(4), &[vec![1.0, -1.0, 0.0, 0.0]], 1.5).is_err());
    }
}
