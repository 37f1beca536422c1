use hepflow::kinematics::FourVector;
use hepflow::phasespace::{phsp_generate, phsp_max_weight, phsp_unweight, DecaySpec};
use hepflow::rng::{RngKey, STREAM_PHASE_SPACE};

use crate::args::PhspArgs;
use crate::error::CliError;
use crate::values::parse_reals;
use crate::{Ctx, Output};

/// Events of a mother at rest; the unweighting uniforms come from `key.derive(1)`.
pub fn run(args: &PhspArgs, ctx: &Ctx) -> Result<Output, CliError> {
    let masses = parse_reals(&args.masses).map_err(CliError::usage)?;
    let spec = DecaySpec::new(args.mother_mass, masses)?;
    let mother = FourVector::on_shell(args.mother_mass, [0.0; 3]);
    let key = RngKey::new(ctx.seed, STREAM_PHASE_SPACE, 0);
    let mut block = phsp_generate(&spec, &mother, args.events, key, &ctx.pool)?;
    if args.unweight {
        block = phsp_unweight(&block, phsp_max_weight(&spec)?, key.derive(1))?;
        eprintln!("unweighting kept {} of {} events", block.len(), args.events);
    }
    Ok(Output::Store(block.into_store()))
}
