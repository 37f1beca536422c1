use rand_distr::{Distribution, Poisson};

use crate::parallel::WorkerPool;
use crate::rng::RngKey;
use crate::sampling::sample_pdf;
use crate::store::{Column, ColumnKind, ColumnSchema, ColumnStore};

use super::model::ExtendedModel;
use super::FitError;

/// Name of the integer column holding each toy event's component index.
pub const SPECIES_COLUMN: &str = "species";

/// Toy dataset drawn from `model` at its current parameter values.
///
/// Component `k` contributes `Poisson(Nₖ)` events (exactly `round(Nₖ)` when
/// `fluctuate` is false) sampled from its shape with `key.derive(2k)`; the
/// count is drawn with `key.derive(2k + 1)`. Components appear in order,
/// followed by a `species` column.
pub fn generate_toy(
    model: &ExtendedModel,
    names: &[&str],
    fluctuate: bool,
    key: RngKey,
    pool: &WorkerPool,
) -> Result<ColumnStore, FitError> {
    if names.len() != model.arity() {
        return Err(FitError::Config(format!(
            "model takes {} observables, {} names given",
            model.arity(),
            names.len()
        )));
    }
    let d = names.len();
    let mut data: Vec<Vec<f64>> = vec![Vec::new(); d];
    let mut species = Vec::new();
    for (k, (pdf, y)) in model.pdfs().iter().zip(model.yields()).enumerate() {
        let mean = y.value();
        let n = if !fluctuate {
            mean.round().max(0.0) as usize
        } else if mean > 0.0 {
            let poisson = Poisson::new(mean).map_err(|e| FitError::Config(format!("yield {mean}: {e}")))?;
            poisson.sample(&mut key.derive(2 * k as u64 + 1).rng()) as usize
        } else {
            0
        };
        let sample = sample_pdf(pdf.shape(), pdf.range(), n, None, key.derive(2 * k as u64), pool)?;
        for (j, col) in data.iter_mut().enumerate() {
            col.extend_from_slice(sample.real_column(&format!("x{j}"))?);
        }
        species.extend(std::iter::repeat_n(k as i64, n));
    }
    let schema = ColumnSchema::new(
        names
            .iter()
            .map(|n| (n.to_string(), ColumnKind::Real64))
            .chain([(SPECIES_COLUMN.to_string(), ColumnKind::Integer64)]),
    )?;
    let columns = data
        .into_iter()
        .map(Column::Real64)
        .chain([Column::Integer64(species)])
        .collect();
    Ok(ColumnStore::from_columns(schema, columns)?)
}
