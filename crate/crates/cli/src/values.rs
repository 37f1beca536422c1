//! Parsers for structured flag values.

use std::collections::BTreeMap;

/// Comma-separated reals, e.g. `0.1,0.2,0.3`.
pub fn parse_reals(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|f| {
            let f = f.trim();
            f.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| format!("`{f}` is not a finite number"))
        })
        .collect()
}

/// Comma-separated positive counts, e.g. `1,2,4,8`.
pub fn parse_counts(text: &str) -> Result<Vec<usize>, String> {
    text.split(',')
        .map(|f| {
            let f = f.trim();
            f.parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| format!("`{f}` is not a positive integer"))
        })
        .collect()
}

/// `lo,hi` with `lo < hi`, both finite.
pub fn parse_range(text: &str) -> Result<(f64, f64), String> {
    match parse_reals(text)?.as_slice() {
        &[lo, hi] if lo < hi => Ok((lo, hi)),
        &[lo, hi] => Err(format!("range needs lo < hi, got {lo},{hi}")),
        v => Err(format!("range needs two values `lo,hi`, got {}", v.len())),
    }
}

/// `name=value,...` assignments; names must be distinct identifiers.
pub fn parse_assignments(text: &str) -> Result<BTreeMap<String, f64>, String> {
    let mut out = BTreeMap::new();
    if text.trim().is_empty() {
        return Ok(out);
    }
    for item in text.split(',') {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| format!("expected `name=value`, found `{}`", item.trim()))?;
        let name = check_name(name.trim())?;
        let value = value.trim();
        let x = value
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| format!("`{value}` is not a finite number"))?;
        if out.insert(name.to_string(), x).is_some() {
            return Err(format!("`{name}` assigned twice"));
        }
    }
    Ok(out)
}

/// Comma-separated identifiers, e.g. `mean,sigma`.
pub fn parse_names(text: &str) -> Result<Vec<String>, String> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',').map(|n| check_name(n.trim()).map(str::to_string)).collect()
}

fn check_name(name: &str) -> Result<&str, String> {
    if !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        Ok(name)
    } else {
        Err(format!("invalid name `{name}`"))
    }
}
