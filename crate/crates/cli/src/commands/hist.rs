use std::fmt::Write as _;

use hepflow::csv::format_real;

use super::read_store;
use crate::args::HistArgs;
use crate::error::CliError;
use crate::values::parse_range;
use crate::{Ctx, Output};

pub const HEADER: &str = "bin_center,value,error";

/// Bin contents with Poisson errors, or weight sums with `sqrt(Σw²)` errors.
pub fn histogram(values: &[f64], weights: Option<&[f64]>, bins: usize, (lo, hi): (f64, f64)) -> Vec<(f64, f64, f64)> {
    let width = (hi - lo) / bins as f64;
    let mut sum = vec![0.0; bins];
    let mut sum2 = vec![0.0; bins];
    for (i, &x) in values.iter().enumerate() {
        if !(lo..=hi).contains(&x) {
            continue;
        }
        let b = (((x - lo) / width) as usize).min(bins - 1);
        let w = weights.map_or(1.0, |w| w[i]);
        sum[b] += w;
        sum2[b] += w * w;
    }
    (0..bins)
        .map(|b| (lo + (b as f64 + 0.5) * width, sum[b], sum2[b].sqrt()))
        .collect()
}

pub fn run(args: &HistArgs, _ctx: &Ctx) -> Result<Output, CliError> {
    if args.bins == 0 {
        return Err(CliError::usage("--bins must be at least 1"));
    }
    let range = parse_range(&args.range).map_err(CliError::usage)?;
    let data = read_store(&args.input)?;
    let values = data.real_column(&args.column)?;
    let weights = args.weight.as_deref().map(|w| data.real_column(w)).transpose()?;
    let mut out = format!("{HEADER}\n");
    for (c, v, e) in histogram(values, weights, args.bins, range) {
        let _ = writeln!(out, "{},{},{}", format_real(c), format_real(v), format_real(e));
    }
    Ok(Output::Text(out))
}
