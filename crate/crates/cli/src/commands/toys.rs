use std::fmt::Write as _;

use hepflow::csv::format_real;
use hepflow::fitting::{fit, generate_toy};
use hepflow::rng::{RngKey, STREAM_TOYS};

use super::{fit_config, ModelChoice};
use crate::args::ToysArgs;
use crate::error::CliError;
use crate::model::build_model;
use crate::{Ctx, Output};

/// Toy `t` is generated from `RngKey::new(seed, STREAM_TOYS, 0).at(t)` at
/// the truth values and fitted starting from them. One row per toy with
/// value, error and pull `(value − truth)/error` of every free parameter.
pub fn run(args: &ToysArgs, ctx: &Ctx) -> Result<Output, CliError> {
    let choice = ModelChoice::parse(&args.model)?;
    let config = fit_config(args.max_iterations, args.tolerance)?;
    if !(args.events > 0.0 && args.events.is_finite()) {
        return Err(CliError::usage("--events must be positive"));
    }
    let model = build_model(choice.kind, choice.range, &choice.init, &choice.fix, args.events)?;
    let params = model.params();
    let truth = params.values();
    let free: Vec<usize> = (0..params.len()).filter(|&i| !params.get(i).unwrap().is_fixed()).collect();
    let mut out = String::from("toy,status,nll_min");
    for &i in &free {
        let name = params.get(i).unwrap().name();
        let _ = write!(out, ",{name},{name}_error,{name}_pull");
    }
    out.push('\n');
    let column = args.model.column.as_str();
    for t in 0..args.n {
        params.set_values(&truth)?;
        let key = RngKey::new(ctx.seed, STREAM_TOYS, 0).at(t as u64);
        let data = generate_toy(&model, &[column], !args.no_fluctuate, key, &ctx.pool)?;
        let r = fit(&model, &data, &[column], &config, &ctx.pool)?;
        let _ = write!(out, "{t},{},{}", r.status, format_real(r.nll_min));
        for &i in &free {
            let err = r.errors.as_ref().map_or(f64::NAN, |e| e[i]);
            let pull = (r.values[i] - truth[i]) / err;
            let _ = write!(out, ",{},{},{}", format_real(r.values[i]), format_real(err), format_real(pull));
        }
        out.push('\n');
    }
    params.set_values(&truth)?;
    Ok(Output::Text(out))
}
