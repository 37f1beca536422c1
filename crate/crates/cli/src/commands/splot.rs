use hepflow::splot::{splot_matrix, splot_weights};

use super::{read_store, ModelChoice};
use crate::args::SplotArgs;
use crate::error::CliError;
use crate::model::{build_model, read_fit_result};
use crate::{Ctx, Output};

/// sWeights at the parameter values of a fit-result file, one row per input row.
pub fn run(args: &SplotArgs, ctx: &Ctx) -> Result<Output, CliError> {
    let choice = ModelChoice::parse(&args.model)?;
    let data = read_store(&args.input)?;
    let text = std::fs::read_to_string(&args.fit_result)
        .map_err(|e| CliError::domain(format!("cannot read {}: {e}", args.fit_result.display())))?;
    let record = read_fit_result(&text).map_err(|e| CliError::domain(format!("{}: {e}", args.fit_result.display())))?;
    let model = build_model(choice.kind, choice.range, &choice.init, &choice.fix, data.len() as f64)?;
    let params = model.params();
    for name in params.names() {
        let (_, value) = record
            .values
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| CliError::domain(format!("fit result lacks parameter `{name}`")))?;
        params.set_value(&name, *value)?;
    }
    if let Some((extra, _)) = record.values.iter().find(|(n, _)| params.by_name(n).is_none()) {
        return Err(CliError::domain(format!("fit result parameter `{extra}` is not in the model")));
    }
    let column = args.model.column.as_str();
    let matrix = splot_matrix(&model, &data, &[column], &ctx.pool)?;
    let weights = splot_weights(&model, &data, &[column], &matrix, &ctx.pool)?;
    if !args.with_input {
        return Ok(Output::Store(weights));
    }
    let mut out = data;
    let (schema, columns) = weights.into_columns();
    for (name, col) in schema.names().zip(columns) {
        out.add_column(name, col)?;
    }
    Ok(Output::Store(out))
}
