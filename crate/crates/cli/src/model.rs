//! Built-in fit models and the fit-result CSV.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use hepflow::csv::format_real;
use hepflow::fitting::{add_pdfs, ExtendedModel, FitResult, FitStatus, Pdf};
use hepflow::param::Parameter;
use hepflow::sampling::BoundedRegion;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Gauss,
    Exp,
    GaussExp,
}

impl FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gauss" => Ok(ModelKind::Gauss),
            "exp" => Ok(ModelKind::Exp),
            "gauss+exp" => Ok(ModelKind::GaussExp),
            other => Err(format!("unknown model `{other}` (expected gauss, exp or gauss+exp)")),
        }
    }
}

impl ModelKind {
    /// Parameter names in model order: shapes first, then yields.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::Gauss => &["mean", "sigma", "n_sig"],
            ModelKind::Exp => &["tau", "n_bkg"],
            ModelKind::GaussExp => &["mean", "sigma", "tau", "n_sig", "n_bkg"],
        }
    }

    /// Default start values and bounds for an observable range and an
    /// expected total event count.
    fn defaults(self, name: &str, (lo, hi): (f64, f64), events: f64) -> (f64, f64, f64) {
        let w = hi - lo;
        let n_yields = if self == ModelKind::GaussExp { 2.0 } else { 1.0 };
        let ymax = (10.0 * events).max(1e3);
        match name {
            "mean" => (0.5 * (lo + hi), lo, hi),
            "sigma" => (0.1 * w, 1e-4 * w, w),
            "tau" => (0.5 * w, 1e-3 * w, 1e3 * w),
            _ => (events / n_yields, 0.0, ymax),
        }
    }
}

/// Builds `kind` on `range` with start values from `init` (defaults
/// elsewhere) and the named parameters fixed.
pub fn build_model(
    kind: ModelKind,
    range: (f64, f64),
    init: &BTreeMap<String, f64>,
    fix: &[String],
    events: f64,
) -> Result<ExtendedModel, CliError> {
    let names = kind.param_names();
    for name in init.keys().chain(fix) {
        if !names.contains(&name.as_str()) {
            return Err(CliError::usage(format!(
                "model has no parameter `{name}` (parameters: {})",
                names.join(",")
            )));
        }
    }
    let mut params = BTreeMap::new();
    for &name in names {
        let (start, lo, hi) = kind.defaults(name, range, events);
        let value = init.get(name).copied().unwrap_or(start);
        let hi = if name.starts_with("n_") { hi.max(10.0 * value) } else { hi };
        let p = Parameter::bounded(name, value, lo, hi).map_err(CliError::usage)?;
        params.insert(name, if fix.iter().any(|f| f == name) { p.fixed() } else { p });
    }
    let region = BoundedRegion::interval(range.0, range.1).map_err(CliError::usage)?;
    let gauss = || Pdf::gaussian(params["mean"].clone(), params["sigma"].clone(), region.clone());
    let exp = || Pdf::exponential(params["tau"].clone(), region.clone());
    let model = match kind {
        ModelKind::Gauss => add_pdfs(vec![params["n_sig"].clone()], vec![gauss()?]),
        ModelKind::Exp => add_pdfs(vec![params["n_bkg"].clone()], vec![exp()?]),
        ModelKind::GaussExp => add_pdfs(
            vec![params["n_sig"].clone(), params["n_bkg"].clone()],
            vec![gauss()?, exp()?],
        ),
    }?;
    Ok(model)
}

pub const FIT_HEADER: &str = "name,value,error,status";

/// Fit-result CSV: one row per parameter, then an `nll_min` row. Errors
/// are `nan` when the covariance is unavailable and 0 for fixed parameters.
pub fn write_fit_result(result: &FitResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{FIT_HEADER}");
    for (i, p) in result.params.iter().enumerate() {
        let err = result.errors.as_ref().map_or(f64::NAN, |e| e[i]);
        let _ = writeln!(
            out,
            "{},{},{},{}",
            p.name(),
            format_real(result.values[i]),
            format_real(err),
            result.status
        );
    }
    let _ = writeln!(out, "nll_min,{},nan,{}", format_real(result.nll_min), result.status);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitRecord {
    pub values: Vec<(String, f64)>,
    pub nll_min: Option<f64>,
    pub status: FitStatus,
}

/// Parses the output of [`write_fit_result`].
pub fn read_fit_result(text: &str) -> Result<FitRecord, String> {
    let mut lines = text.lines().map(|l| l.trim_end_matches('\r')).filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == FIT_HEADER => {}
        Some(h) => return Err(format!("fit result header must be `{FIT_HEADER}`, found `{h}`")),
        None => return Err("empty fit result".into()),
    }
    let mut values: Vec<(String, f64)> = Vec::new();
    let mut nll_min = None;
    let mut status = None;
    for line in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let &[name, value, _, st] = fields.as_slice() else {
            return Err(format!("expected 4 fields in `{line}`"));
        };
        let value: f64 = value.parse().map_err(|_| format!("bad value `{value}` for `{name}`"))?;
        let st: FitStatus = st.parse()?;
        if status.is_some_and(|s| s != st) {
            return Err(format!("inconsistent status `{st}` on `{name}`"));
        }
        status = Some(st);
        if name == "nll_min" {
            nll_min = Some(value);
            continue;
        }
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(format!("invalid parameter name `{name}`"));
        }
        if !value.is_finite() {
            return Err(format!("non-finite value for `{name}`"));
        }
        if values.iter().any(|(n, _)| n == name) {
            return Err(format!("parameter `{name}` listed twice"));
        }
        values.push((name.to_string(), value));
    }
    let status = status.ok_or("fit result has no rows")?;
    Ok(FitRecord { values, nll_min, status })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builds_models_with_defaults() {
        let init = BTreeMap::from([("sigma".to_string(), 0.5)]);
        let m = build_model(ModelKind::GaussExp, (0.0, 10.0), &init, &["tau".into()], 1000.0).unwrap();
        assert_eq!(m.params().names(), vec!["mean", "sigma", "tau", "n_sig", "n_bkg"]);
        assert_eq!(m.params().values(), vec![5.0, 0.5, 5.0, 500.0, 500.0]);
        assert!(m.params().by_name("tau").unwrap().is_fixed());
        assert_eq!(m.species(), vec!["sig", "bkg"]);
    }

    #[test]
    fn rejects_unknown_or_out_of_range_params() {
        let bad = BTreeMap::from([("tau".to_string(), 1.0)]);
        assert!(matches!(
            build_model(ModelKind::Gauss, (0.0, 1.0), &bad, &[], 10.0),
            Err(CliError::Usage(_))
        ));
        let outside = BTreeMap::from([("mean".to_string(), 3.0)]);
        assert!(build_model(ModelKind::Gauss, (0.0, 1.0), &outside, &[], 10.0).is_err());
        assert!("gauss*exp".parse::<ModelKind>().is_err());
    }

    #[test]
    fn fit_record_round_trip() {
        let text = "name,value,error,status\nmean,5.0000000000000009,0.012,converged\n\
                    n_sig,1000,nan,converged\nnll_min,-1234.5,nan,converged\n";
        let r = read_fit_result(text).unwrap();
        assert_eq!(r.values, vec![("mean".into(), 5.000_000_000_000_001), ("n_sig".into(), 1000.0)]);
        assert_eq!(r.nll_min, Some(-1234.5));
        assert_eq!(r.status, FitStatus::Converged);
        assert!(read_fit_result("name,value\n").is_err());
        assert!(read_fit_result("name,value,error,status\nmean,x,0,converged\n").is_err());
        assert!(read_fit_result("name,value,error,status\nmean,1,0,converged\ntau,1,0,max_iterations\n").is_err());
    }
}
