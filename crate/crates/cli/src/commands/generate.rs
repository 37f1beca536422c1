use hepflow::fitting::generate_toy;
use hepflow::rng::{RngKey, STREAM_SAMPLING};

use super::ModelChoice;
use crate::args::GenerateArgs;
use crate::error::CliError;
use crate::model::build_model;
use crate::{Ctx, Output};

/// Observable column plus the integer `species` of every event.
pub fn run(args: &GenerateArgs, ctx: &Ctx) -> Result<Output, CliError> {
    let choice = ModelChoice::parse(&args.model)?;
    if !(args.events >= 0.0 && args.events.is_finite()) {
        return Err(CliError::usage("--events must be non-negative"));
    }
    let model = build_model(choice.kind, choice.range, &choice.init, &choice.fix, args.events)?;
    let key = RngKey::new(ctx.seed, STREAM_SAMPLING, 0);
    let data = generate_toy(&model, &[args.model.column.as_str()], args.fluctuate, key, &ctx.pool)?;
    Ok(Output::Store(data))
}
