use hepflow::fitting::{fit, FitStatus};
use hepflow::store::Value;

use super::{fit_config, read_store, ModelChoice};
use crate::args::FitArgs;
use crate::error::CliError;
use crate::model::{build_model, write_fit_result};
use crate::{Ctx, Output};

/// Fits rows whose observable lies inside the range; others are dropped.
pub fn run(args: &FitArgs, ctx: &Ctx) -> Result<Output, CliError> {
    let choice = ModelChoice::parse(&args.model)?;
    let config = fit_config(args.max_iterations, args.tolerance)?;
    let data = read_store(&args.input)?;
    let column = args.model.column.as_str();
    let index = data
        .schema()
        .index_of(column)
        .ok_or_else(|| CliError::domain(format!("input has no column `{column}`")))?;
    let (lo, hi) = choice.range;
    let total = data.len();
    let data = data.filter(|row| matches!(row[index], Value::Real64(x) if (lo..=hi).contains(&x)));
    if data.len() < total {
        eprintln!("{} of {total} rows outside [{lo}, {hi}] dropped", total - data.len());
    }
    let model = build_model(choice.kind, choice.range, &choice.init, &choice.fix, data.len() as f64)?;
    let result = fit(&model, &data, &[column], &config, &ctx.pool)?;
    if result.status != FitStatus::Converged {
        eprintln!("warning: fit status {}", result.status);
    }
    Ok(Output::Text(write_fit_result(&result)))
}
