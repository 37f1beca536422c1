use crate::param::{ParamSet, Parameter};
use crate::parallel::{WorkerPool, CHUNK_SIZE};
use crate::store::ColumnStore;

use super::pdf::Pdf;
use super::FitError;

/// Mixture `Σₖ Nₖ·pdfₖ(x)` with yields as parameters.
#[derive(Debug, Clone)]
pub struct ExtendedModel {
    yields: Vec<Parameter>,
    pdfs: Vec<Pdf>,
    params: ParamSet,
}

pub fn add_pdfs(yields: Vec<Parameter>, pdfs: Vec<Pdf>) -> Result<ExtendedModel, FitError> {
    if yields.is_empty() || yields.len() != pdfs.len() {
        return Err(FitError::Config(format!(
            "need matching non-empty yield and p.d.f. lists, got {} and {}",
            yields.len(),
            pdfs.len()
        )));
    }
    let (arity, range) = (pdfs[0].arity(), pdfs[0].range().clone());
    if pdfs.iter().any(|p| p.arity() != arity || *p.range() != range) {
        return Err(FitError::Config("component p.d.f.s must share arity and range".into()));
    }
    let mut params = ParamSet::new();
    for pdf in &pdfs {
        params = params.merged(pdf.shape().params())?;
    }
    for y in &yields {
        params.push(y.clone())?;
    }
    Ok(ExtendedModel {
        yields,
        pdfs,
        params,
    })
}

impl ExtendedModel {
    pub fn yields(&self) -> &[Parameter] {
        &self.yields
    }

    pub fn pdfs(&self) -> &[Pdf] {
        &self.pdfs
    }

    pub fn n_components(&self) -> usize {
        self.pdfs.len()
    }

    pub fn arity(&self) -> usize {
        self.pdfs[0].arity()
    }

    /// Shape parameters first, then yields.
    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    /// Species label of each component: the yield name without a leading `n_` or `N_`.
    pub fn species(&self) -> Vec<String> {
        self.yields
            .iter()
            .map(|y| {
                let n = y.name();
                n.strip_prefix("n_")
                    .or_else(|| n.strip_prefix("N_"))
                    .filter(|s| !s.is_empty())
                    .unwrap_or(n)
                    .to_string()
            })
            .collect()
    }

    pub fn expected_total(&self) -> f64 {
        self.yields.iter().map(Parameter::value).sum()
    }

    pub(crate) fn norms(&self, pool: &WorkerPool) -> Result<Vec<f64>, FitError> {
        self.pdfs.iter().map(|p| p.norm(pool)).collect()
    }

    pub fn density(&self, x: &[f64]) -> Result<f64, FitError> {
        let norms = self.norms(&WorkerPool::serial())?;
        let mut d = 0.0;
        for ((pdf, y), n) in self.pdfs.iter().zip(&self.yields).zip(&norms) {
            d += y.value() * pdf.value_with_norm(x, *n)?;
        }
        Ok(d)
    }
}

/// Observable columns of `store` as slices, checked against the model arity.
pub(crate) fn observables<'a>(
    model: &ExtendedModel,
    store: &'a ColumnStore,
    columns: &[&str],
) -> Result<Vec<&'a [f64]>, FitError> {
    if columns.len() != model.arity() {
        return Err(FitError::Config(format!(
            "model takes {} observables, {} columns given",
            model.arity(),
            columns.len()
        )));
    }
    if store.is_empty() {
        return Err(FitError::EmptyData);
    }
    Ok(store.real_columns(columns)?)
}

/// Per-event component p.d.f. values, visited in chunk order.
///
/// `f` receives the chunk's event range and, for each event, the component
/// values `pdfₖ(xₑ)` (not multiplied by yields).
pub(crate) fn map_component_chunks<T, F>(
    model: &ExtendedModel,
    cols: &[&[f64]],
    norms: &[f64],
    pool: &WorkerPool,
    f: F,
) -> Result<Vec<T>, FitError>
where
    T: Send,
    F: Fn(usize, &[f64], &mut T) -> Result<(), FitError> + Sync + Send,
    T: Default,
{
    let len = cols[0].len();
    let k = model.n_components();
    let _frozen = model.params().freeze();
    pool.try_map_chunks(len, CHUNK_SIZE, |range| {
        let mut acc = T::default();
        let mut x = vec![0.0; cols.len()];
        let mut comp = vec![0.0; k];
        for e in range {
            for (xi, c) in x.iter_mut().zip(cols) {
                *xi = c[e];
            }
            for ((v, pdf), n) in comp.iter_mut().zip(&model.pdfs).zip(norms) {
                *v = pdf.value_with_norm(&x, *n)?;
            }
            f(e, &comp, &mut acc)?;
        }
        Ok(acc)
    })
}

#[derive(Default)]
struct LogSum(f64);

/// Extended negative log-likelihood `Σₖ Nₖ − Σₑ ln Σₖ Nₖ·pdfₖ(xₑ)`.
pub fn nll(model: &ExtendedModel, store: &ColumnStore, columns: &[&str], pool: &WorkerPool) -> Result<f64, FitError> {
    let cols = observables(model, store, columns)?;
    nll_columns(model, &cols, pool)
}

pub(crate) fn nll_columns(model: &ExtendedModel, cols: &[&[f64]], pool: &WorkerPool) -> Result<f64, FitError> {
    let norms = model.norms(pool)?;
    let yields: Vec<f64> = model.yields.iter().map(Parameter::value).collect();
    let chunks = map_component_chunks(model, cols, &norms, pool, |e, comp, acc: &mut LogSum| {
        let d: f64 = comp.iter().zip(&yields).map(|(p, n)| n * p).sum();
        if !(d > 0.0 && d.is_finite()) {
            return Err(FitError::NonPositiveDensity { event: e, density: d });
        }
        acc.0 += d.ln();
        Ok(())
    })?;
    let log_sum: f64 = chunks.iter().map(|c| c.0).sum();
    Ok(yields.iter().sum::<f64>() - log_sum)
}

#[derive(Default)]
struct YieldSums {
    score: Vec<f64>,
    info: Vec<f64>,
}

/// `sₖ = Σₑ pdfₖ/D` and `Iₖⱼ = Σₑ pdfₖ·pdfⱼ/D²` with `D = Σₖ Nₖ·pdfₖ`.
///
/// `∂NLL/∂Nₖ = 1 − sₖ` and `∂²NLL/∂Nₖ∂Nⱼ = Iₖⱼ`; `I` is also the inverse
/// sWeight covariance.
pub(crate) fn yield_sums(
    model: &ExtendedModel,
    cols: &[&[f64]],
    pool: &WorkerPool,
) -> Result<(Vec<f64>, Vec<f64>), FitError> {
    let norms = model.norms(pool)?;
    let yields: Vec<f64> = model.yields.iter().map(Parameter::value).collect();
    let k = yields.len();
    let chunks = map_component_chunks(model, cols, &norms, pool, |e, comp, acc: &mut YieldSums| {
        if acc.score.is_empty() {
            acc.score = vec![0.0; k];
            acc.info = vec![0.0; k * k];
        }
        let d: f64 = comp.iter().zip(&yields).map(|(p, n)| n * p).sum();
        if !(d > 0.0 && d.is_finite()) {
            return Err(FitError::NonPositiveDensity { event: e, density: d });
        }
        for a in 0..k {
            let pa = comp[a] / d;
            acc.score[a] += pa;
            for b in 0..k {
                acc.info[a * k + b] += pa * comp[b] / d;
            }
        }
        Ok(())
    })?;
    let mut score = vec![0.0; k];
    let mut info = vec![0.0; k * k];
    for c in chunks.iter().filter(|c| !c.score.is_empty()) {
        score.iter_mut().zip(&c.score).for_each(|(t, v)| *t += v);
        info.iter_mut().zip(&c.info).for_each(|(t, v)| *t += v);
    }
    Ok((score, info))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::BoundedRegion;

    fn gauss_model(n: f64) -> ExtendedModel {
        let pdf = Pdf::gaussian(
            Parameter::new("mu", 0.0).unwrap(),
            Parameter::bounded("sigma", 1.0, 0.01, 10.0).unwrap(),
            BoundedRegion::interval(-10.0, 10.0).unwrap(),
        )
        .unwrap();
        add_pdfs(vec![Parameter::lower_bounded("n_sig", n, 0.0).unwrap()], vec![pdf]).unwrap()
    }

    fn store(xs: Vec<f64>) -> ColumnStore {
        ColumnStore::from_real_columns(["x"], vec![xs]).unwrap()
    }

    #[test]
    fn single_event_definition() {
        let m = gauss_model(1.0);
        let v = nll(&m, &store(vec![0.0]), &["x"], &WorkerPool::serial()).unwrap();
        assert_eq!(v, 1.0 - 0.3989422804014327f64.ln());
        let m = gauss_model(100.0);
        let v = nll(&m, &store(vec![0.5]), &["x"], &WorkerPool::serial()).unwrap();
        let pdf = (-0.125f64).exp() * 0.3989422804014327;
        assert!((v - (100.0 - (100.0 * pdf).ln())).abs() < 1e-12);
        assert_eq!(m.species(), vec!["sig"]);
    }

    #[test]
    fn identical_components_double_density() {
        let range = BoundedRegion::interval(-5.0, 5.0).unwrap();
        let mu = Parameter::new("mu", 0.0).unwrap();
        let s = Parameter::new("sigma", 1.0).unwrap();
        let pdf = Pdf::gaussian(mu, s, range).unwrap();
        let m = add_pdfs(
            vec![Parameter::new("n_a", 7.0).unwrap(), Parameter::new("n_b", 7.0).unwrap()],
            vec![pdf.clone(), pdf.clone()],
        )
        .unwrap();
        assert_eq!(m.density(&[0.3]).unwrap(), 14.0 * pdf.pdf_value(&[0.3]).unwrap());
        assert_eq!(m.params().names(), vec!["mu", "sigma", "n_a", "n_b"]);
    }

    #[test]
    fn duplicated_events_double_sum() {
        let m = gauss_model(10.0);
        let xs: Vec<f64> = (0..5000).map(|i| -3.0 + 6.0 * i as f64 / 5000.0).collect();
        let pool = WorkerPool::serial();
        let once = nll(&m, &store(xs.clone()), &["x"], &pool).unwrap() - 10.0;
        let twice = nll(&m, &store([xs.clone(), xs].concat()), &["x"], &pool).unwrap() - 10.0;
        assert!((twice - 2.0 * once).abs() <= 1e-12 * once.abs());
    }

    #[test]
    fn worker_invariant() {
        let m = gauss_model(10.0);
        let xs: Vec<f64> = (0..50_000).map(|i| ((i as f64) * 0.618).fract() * 8.0 - 4.0).collect();
        let s = store(xs);
        let a = nll(&m, &s, &["x"], &WorkerPool::new(1)).unwrap();
        for w in [2, 3, 8] {
            assert_eq!(a.to_bits(), nll(&m, &s, &["x"], &WorkerPool::new(w)).unwrap().to_bits());
        }
    }

    #[test]
    fn errors() {
        let m = gauss_model(10.0);
        let pool = WorkerPool::serial();
        assert!(matches!(
            nll(&m, &store(vec![0.0, 11.0]), &["x"], &pool),
            Err(FitError::NonPositiveDensity { event: 1, .. })
        ));
        assert!(matches!(nll(&m, &store(vec![]), &["x"], &pool), Err(FitError::EmptyData)));
        assert!(nll(&m, &store(vec![0.0]), &["y"], &pool).is_err());
        assert!(add_pdfs(vec![], vec![]).is_err());
    }
}
