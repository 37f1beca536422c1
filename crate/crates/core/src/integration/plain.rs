use crate::functor::FunctorExpr;
use crate::parallel::{Moments, WorkerPool, CHUNK_SIZE};
use crate::rng::RngKey;
use crate::sampling::BoundedRegion;

use super::{checked, IntegrationError, IntegrationResult};

/// Plain Monte Carlo: `V·mean(f) ± V·stddev(f)/sqrt(calls)` with call `c`
/// drawn from `key.at(c)`.
pub fn plain_mc(
    expr: &FunctorExpr,
    region: &BoundedRegion,
    calls: u64,
    key: RngKey,
    pool: &WorkerPool,
) -> Result<IntegrationResult, IntegrationError> {
    if calls < 2 {
        return Err(IntegrationError::InvalidInput(format!(
            "plain Monte Carlo needs at least 2 calls, got {calls}"
        )));
    }
    let d = region.dims();
    if expr.arity() != d {
        return Err(IntegrationError::ArityMismatch {
            expr: expr.arity(),
            domain: d,
        });
    }
    let _frozen = expr.params().freeze();
    let chunks = pool.try_map_chunks(calls as usize, CHUNK_SIZE, |range| {
        let mut unit = vec![0.0; d];
        let mut point = vec![0.0; d];
        let mut m = Moments::default();
        for c in range {
            let mut rng = key.at(c as u64).rng();
            for u in unit.iter_mut() {
                *u = rng.uniform();
            }
            region.from_unit(&unit, &mut point);
            m.push(checked(expr.eval_unchecked(&point)?, &point)?);
        }
        Ok::<_, IntegrationError>(m)
    })?;
    let m = chunks.into_iter().fold(Moments::default(), Moments::merge);
    let volume = region.volume();
    Ok(IntegrationResult {
        value: volume * m.mean,
        error: volume * (m.variance() / m.n).sqrt(),
        iterations: 1,
        chi2_per_dof: 0.0,
        calls_used: calls,
        converged: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::param::ParamSet;

    #[test]
    fn constant_has_zero_error() {
        let one = FunctorExpr::constant(3, 1.0);
        let region = BoundedRegion::cube(3, 0.0, 1.0).unwrap();
        let r = plain_mc(&one, &region, 10_000, RngKey::new(1, 0, 0), &WorkerPool::serial()).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.error, 0.0);
    }

    #[test]
    fn linear_integrand() {
        let x = FunctorExpr::variable(1, 0);
        let region = BoundedRegion::interval(0.0, 2.0).unwrap();
        let r = plain_mc(&x, &region, 1_000_000, RngKey::new(3, 0, 0), &WorkerPool::new(2)).unwrap();
        assert!((r.value - 2.0).abs() < 3.0 * r.error, "{r:?}");
        // σ = 2·sqrt(1/3)/1000
        assert!((r.error - 2.0 * (1.0f64 / 3.0).sqrt() / 1000.0).abs() < 1e-5);
    }

    #[test]
    fn worker_invariant() {
        let f = FunctorExpr::wrap(2, ParamSet::new(), |x, _| (x[0] + x[1]).sin().exp());
        let region = BoundedRegion::cube(2, -1.0, 1.0).unwrap();
        let key = RngKey::new(8, 0, 0);
        let a = plain_mc(&f, &region, 100_000, key, &WorkerPool::new(1)).unwrap();
        let b = plain_mc(&f, &region, 100_000, key, &WorkerPool::new(8)).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.error.to_bits(), b.error.to_bits());
    }

    #[test]
    fn rejects_bad_input() {
        let x = FunctorExpr::variable(1, 0);
        let region = BoundedRegion::interval(0.0, 1.0).unwrap();
        assert!(plain_mc(&x, &region, 1, RngKey::default(), &WorkerPool::serial()).is_err());
        let inv = &FunctorExpr::constant(1, 1.0) / &FunctorExpr::constant(1, 0.0);
        assert!(plain_mc(&inv, &region, 10, RngKey::default(), &WorkerPool::serial()).is_err());
        let nan = FunctorExpr::wrap(1, ParamSet::new(), |_, _| f64::NAN);
        assert!(matches!(
            plain_mc(&nan, &region, 10, RngKey::default(), &WorkerPool::serial()),
            Err(IntegrationError::NonFinite { .. })
        ));
    }
}
