//! sPlot unfolding: per-event species weights from a fitted extended model.

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

use crate::fitting::{observables, yield_sums, ExtendedModel, FitError};
use crate::parallel::{WorkerPool, CHUNK_SIZE};
use crate::store::{ColumnStore, StoreError};

/// Largest accepted condition number of the inverse covariance.
pub const MAX_CONDITION: f64 = 1e12;

/// Largest accepted `|1 − Σₑ pdfₖ/D|`, i.e. yield-gradient of the NLL.
pub const STATIONARITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SplotError {
    #[error(
        "yields are not at the likelihood optimum: d(NLL)/d(N_{species}) = {gradient:e}; \
         refit with all yields free before computing sWeights"
    )]
    NotAtOptimum { species: String, gradient: f64 },
    #[error(
        "sWeight matrix is singular (condition number {condition:e}); \
         two or more species have indistinguishable shapes"
    )]
    Singular { condition: f64 },
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Covariance matrix `V` of the yields used to build sWeights.
#[derive(Debug, Clone, PartialEq)]
pub struct SWeightMatrix {
    pub species: Vec<String>,
    pub v: DMatrix<f64>,
    /// The accumulated inverse `Σₑ pdfₙ·pdfⱼ / D²`.
    pub v_inverse: DMatrix<f64>,
}

/// Accumulates `(V⁻¹)ₙⱼ = Σₑ pdfₙ(xₑ)·pdfⱼ(xₑ) / D(xₑ)²` and inverts it.
///
/// Fails if the model's yields are not stationary points of the extended
/// NLL on this data, since the sWeight identities hold only there.
pub fn splot_matrix(
    model: &ExtendedModel,
    store: &ColumnStore,
    columns: &[&str],
    pool: &WorkerPool,
) -> Result<SWeightMatrix, SplotError> {
    let cols = observables(model, store, columns)?;
    let (score, info) = yield_sums(model, &cols, pool)?;
    let species = model.species();
    for (name, s) in species.iter().zip(&score) {
        let gradient = 1.0 - s;
        if !(gradient.abs() <= STATIONARITY_TOLERANCE) {
            return Err(SplotError::NotAtOptimum {
                species: name.clone(),
                gradient,
            });
        }
    }
    let k = species.len();
    let v_inverse = DMatrix::from_row_slice(k, k, &info);
    let eig = SymmetricEigen::new(v_inverse.clone());
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e.abs())));
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(SplotError::Singular { condition });
    }
    let v = v_inverse
        .clone()
        .cholesky()
        .ok_or(SplotError::Singular { condition })?
        .inverse();
    Ok(SWeightMatrix {
        species,
        v,
        v_inverse,
    })
}

/// Per-event sWeights `sₙ(e) = Σⱼ Vₙⱼ·pdfⱼ(xₑ) / Σₖ Nₖ·pdfₖ(xₑ)`, one
/// `sw_<species>` column per species, aligned with `store`.
pub fn splot_weights(
    model: &ExtendedModel,
    store: &ColumnStore,
    columns: &[&str],
    matrix: &SWeightMatrix,
    pool: &WorkerPool,
) -> Result<ColumnStore, SplotError> {
    let cols = observables(model, store, columns)?;
    let k = model.n_components();
    if matrix.v.nrows() != k {
        return Err(FitError::Config(format!("matrix is {0}×{0}, model has {k} species", matrix.v.nrows())).into());
    }
    let norms: Vec<f64> = model
        .pdfs()
        .iter()
        .map(|p| p.norm(pool))
        .collect::<Result<_, _>>()?;
    let yields: Vec<f64> = model.yields().iter().map(|y| y.value()).collect();
    let _frozen = model.params().freeze();
    let len = store.len();
    let chunks = pool.try_map_chunks(len, CHUNK_SIZE, |range| {
        let mut out = vec![Vec::with_capacity(range.len()); k];
        let mut x = vec![0.0; cols.len()];
        let mut comp = vec![0.0; k];
        for e in range {
            for (xi, c) in x.iter_mut().zip(&cols) {
                *xi = c[e];
            }
            for ((v, pdf), n) in comp.iter_mut().zip(model.pdfs()).zip(&norms) {
                *v = pdf.value_with_norm(&x, *n)?;
            }
            let d: f64 = comp.iter().zip(&yields).map(|(p, n)| n * p).sum();
            if !(d > 0.0 && d.is_finite()) {
                return Err(FitError::NonPositiveDensity { event: e, density: d });
            }
            for (n, col) in out.iter_mut().enumerate() {
                let s: f64 = (0..k).map(|j| matrix.v[(n, j)] * comp[j]).sum();
                col.push(s / d);
            }
        }
        Ok::<_, FitError>(out)
    })?;
    let mut data: Vec<Vec<f64>> = vec![Vec::with_capacity(len); k];
    for chunk in chunks {
        for (dst, src) in data.iter_mut().zip(chunk) {
            dst.extend(src);
        }
    }
    let names = matrix.species.iter().map(|s| format!("sw_{s}"));
    Ok(ColumnStore::from_real_columns(names, data)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitting::{add_pdfs, fit, generate_toy, FitConfig, Pdf};
    use crate::param::Parameter;
    use crate::rng::RngKey;
    use crate::sampling::BoundedRegion;

    fn range() -> BoundedRegion {
        BoundedRegion::interval(0.0, 10.0).unwrap()
    }

    fn two_species() -> (ExtendedModel, Vec<Parameter>) {
        let p = vec![
            Parameter::bounded("mean", 5.0, 0.0, 10.0).unwrap(),
            Parameter::bounded("sigma", 0.6, 0.05, 5.0).unwrap(),
            Parameter::bounded("tau", 4.0, 0.1, 50.0).unwrap(),
            Parameter::bounded("n_sig", 1500.0, 0.0, 1e7).unwrap(),
            Parameter::bounded("n_bkg", 3500.0, 0.0, 1e7).unwrap(),
        ];
        let model = add_pdfs(
            vec![p[3].clone(), p[4].clone()],
            vec![
                Pdf::gaussian(p[0].clone(), p[1].clone(), range()).unwrap(),
                Pdf::exponential(p[2].clone(), range()).unwrap(),
            ],
        )
        .unwrap();
        (model, p)
    }

    #[test]
    fn single_species_weights_are_one() {
        let n = Parameter::lower_bounded("n_sig", 50.0, 0.0).unwrap();
        let tau = Parameter::new("tau", 2.0).unwrap().fixed();
        let model = add_pdfs(vec![n.clone()], vec![Pdf::exponential(tau, range()).unwrap()]).unwrap();
        let pool = WorkerPool::serial();
        let data = generate_toy(&model, &["x"], false, RngKey::new(1, 2, 0), &pool).unwrap();
        n.set_value(data.len() as f64).unwrap();
        let m = splot_matrix(&model, &data, &["x"], &pool).unwrap();
        assert!((m.v[(0, 0)] - 50.0).abs() < 1e-9);
        let w = splot_weights(&model, &data, &["x"], &m, &pool).unwrap();
        assert!(w.real_column("sw_sig").unwrap().iter().all(|&s| (s - 1.0).abs() < 1e-12));
    }

    #[test]
    fn identities_at_fitted_optimum() {
        let (model, _) = two_species();
        let pool = WorkerPool::new(3);
        let data = generate_toy(&model, &["x"], true, RngKey::new(2, 2, 0), &pool).unwrap();
        let r = fit(&model, &data, &["x"], &FitConfig::default(), &pool).unwrap();
        let m = splot_matrix(&model, &data, &["x"], &pool).unwrap();
        assert!((m.v[(0, 1)] - m.v[(1, 0)]).abs() <= 1e-10 * m.v[(0, 1)].abs());
        let w = splot_weights(&model, &data, &["x"], &m, &pool).unwrap();
        let (sig, bkg) = (w.real_column("sw_sig").unwrap(), w.real_column("sw_bkg").unwrap());
        for (a, b) in sig.iter().zip(bkg) {
            assert!((a + b - 1.0).abs() < 1e-9);
        }
        let sums = [sig.iter().sum::<f64>(), bkg.iter().sum::<f64>()];
        for (s, y) in sums.iter().zip([r.values[3], r.values[4]]) {
            assert!((s - y).abs() < 1e-6 * y, "{s} vs {y}");
        }
        let serial_pool = WorkerPool::serial();
        assert_eq!(splot_matrix(&model, &data, &["x"], &serial_pool).unwrap(), m);
        let serial = splot_weights(&model, &data, &["x"], &m, &serial_pool).unwrap();
        assert_eq!(serial, w);
    }

    #[test]
    fn rejects_points_away_from_optimum() {
        let (model, p) = two_species();
        let pool = WorkerPool::serial();
        let data = generate_toy(&model, &["x"], true, RngKey::new(3, 2, 0), &pool).unwrap();
        p[3].set_value(900.0).unwrap();
        assert!(matches!(
            splot_matrix(&model, &data, &["x"], &pool),
            Err(SplotError::NotAtOptimum { .. })
        ));
    }

    #[test]
    fn identical_shapes_are_singular() {
        let tau = Parameter::new("tau", 3.0).unwrap().fixed();
        let pdf = Pdf::exponential(tau, range()).unwrap();
        let (a, b) = (Parameter::new("n_a", 60.0).unwrap(), Parameter::new("n_b", 40.0).unwrap());
        let model = add_pdfs(vec![a, b], vec![pdf.clone(), pdf]).unwrap();
        let pool = WorkerPool::serial();
        let data = generate_toy(&model, &["x"], false, RngKey::new(4, 2, 0), &pool).unwrap();
        assert!(matches!(
            splot_matrix(&model, &data, &["x"], &pool),
            Err(SplotError::Singular { .. })
        ));
    }
}
