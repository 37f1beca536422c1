use nalgebra::{DMatrix, DVector};

use crate::param::Parameter;
use crate::parallel::WorkerPool;
use crate::store::ColumnStore;

use super::minimizer::{minimize_problem, FitResult, MinimizerConfig, Problem};
use super::model::{nll_columns, observables, yield_sums, ExtendedModel};
use super::FitError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub minimizer: MinimizerConfig,
    /// Newton-iterate the free yields to exact stationarity after the simplex,
    /// holding shape parameters fixed.
    pub polish_yields: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            minimizer: MinimizerConfig::default(),
            polish_yields: true,
        }
    }
}

const MAX_NEWTON_STEPS: usize = 50;

/// Extended unbinned maximum-likelihood fit of `model` to `columns` of `store`.
///
/// The reported `nll_min` is the full extended NLL at the optimum.
pub fn fit(
    model: &ExtendedModel,
    store: &ColumnStore,
    columns: &[&str],
    config: &FitConfig,
    pool: &WorkerPool,
) -> Result<FitResult, FitError> {
    let cols = observables(model, store, columns)?;
    let offset = nll_columns(model, &cols, pool)?;
    let objective = |_: &crate::param::ParamSet| Ok(nll_columns(model, &cols, pool)? - offset);
    let mut problem = Problem::new(objective, model.params());
    let polish = |problem: &mut Problem<'_, _>| {
        if config.polish_yields {
            polish_yields(model, &cols, pool, problem)
        } else {
            Ok(())
        }
    };
    let mut result = minimize_problem(&mut problem, &config.minimizer, polish)?;
    result.nll_min += offset;
    Ok(result)
}

fn polish_yields<F>(
    model: &ExtendedModel,
    cols: &[&[f64]],
    pool: &WorkerPool,
    problem: &mut Problem<'_, F>,
) -> Result<(), FitError>
where
    F: FnMut(&crate::param::ParamSet) -> Result<f64, FitError>,
{
    let free: Vec<(usize, &Parameter)> = model
        .yields()
        .iter()
        .enumerate()
        .filter(|(_, y)| !y.is_fixed())
        .collect();
    if free.is_empty() {
        return Ok(());
    }
    let k = model.n_components();
    let mut current = nll_columns(model, cols, pool)?;
    for _ in 0..MAX_NEWTON_STEPS {
        let (score, info) = yield_sums(model, cols, pool)?;
        let m = free.len();
        let g = DVector::from_iterator(m, free.iter().map(|&(a, _)| 1.0 - score[a]));
        let h = DMatrix::from_fn(m, m, |r, c| info[free[r].0 * k + free[c].0]);
        let Some(step) = h.cholesky().map(|ch| ch.solve(&(-g))) else {
            return Ok(());
        };
        let old: Vec<f64> = free.iter().map(|(_, y)| y.value()).collect();
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = old.iter().zip(step.iter()).map(|(v, s)| v + scale * s).collect();
            let inside = free.iter().zip(&trial).all(|((_, y), &v)| {
                y.lower().is_none_or(|lo| v >= lo) && y.upper().is_none_or(|hi| v <= hi)
            });
            if inside {
                for ((_, y), &v) in free.iter().zip(&trial) {
                    y.set_value(v)?;
                }
                let f = nll_columns(model, cols, pool)?;
                if f <= current {
                    current = f;
                    accepted = true;
                    break;
                }
            }
            scale *= 0.5;
        }
        if !accepted {
            for ((_, y), &v) in free.iter().zip(&old) {
                y.set_value(v)?;
            }
            return Ok(());
        }
        let converged = step
            .iter()
            .zip(&old)
            .all(|(s, v)| (scale * s).abs() <= 1e-13 * (1.0 + v.abs()));
        if converged {
            break;
        }
    }
    // Keep the problem's view of the optimum in sync with the handles.
    let x = problem.external();
    problem.set_external(&x)
}
