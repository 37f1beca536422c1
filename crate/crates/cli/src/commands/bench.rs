use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::hint::black_box;
use std::time::Instant;

use hepflow::csv::format_real;
use hepflow::fitting::{generate_toy, nll};
use hepflow::kinematics::FourVector;
use hepflow::parallel::WorkerPool;
use hepflow::phasespace::{phsp_generate, DecaySpec};
use hepflow::rng::{RngKey, STREAM_PHASE_SPACE, STREAM_SAMPLING};

use crate::args::{BenchArgs, Kernel};
use crate::error::CliError;
use crate::model::{build_model, ModelKind};
use crate::values::parse_counts;
use crate::{Ctx, Output};

pub const HEADER: &str = "workers,wall_seconds,speedup";

/// Best-of-`repeat` wall time of `evals` kernel evaluations per worker
/// count. The speedup baseline is the 1-worker time, or the first listed
/// count when 1 is absent.
pub fn run(args: &BenchArgs, ctx: &Ctx) -> Result<Output, CliError> {
    let counts = parse_counts(&args.worker_counts).map_err(CliError::usage)?;
    if args.repeat == 0 || args.evals == 0 || args.events == 0 {
        return Err(CliError::usage("--repeat, --evals and --events must be positive"));
    }
    let mut kernel = kernel(args, ctx)?;
    let mut times = Vec::with_capacity(counts.len());
    for &w in &counts {
        let pool = WorkerPool::new(w);
        kernel(&pool)?;
        let mut best = f64::INFINITY;
        for _ in 0..args.repeat {
            let start = Instant::now();
            for _ in 0..args.evals {
                kernel(&pool)?;
            }
            best = best.min(start.elapsed().as_secs_f64());
        }
        eprintln!("workers {w}: {best:.3} s");
        times.push(best);
    }
    let base = counts.iter().position(|&w| w == 1).map_or(times[0], |i| times[i]);
    let mut out = format!("{HEADER}\n");
    for (w, t) in counts.iter().zip(&times) {
        let _ = writeln!(out, "{w},{},{}", format_real(*t), format_real(base / t));
    }
    Ok(Output::Text(out))
}

type BoxedKernel = Box<dyn FnMut(&WorkerPool) -> Result<(), CliError>>;

fn kernel(args: &BenchArgs, ctx: &Ctx) -> Result<BoxedKernel, CliError> {
    let events = args.events;
    match args.kernel {
        Kernel::Nll => {
            let truth = BTreeMap::from([
                ("mean".to_string(), 5.0),
                ("sigma".to_string(), 0.5),
                ("tau".to_string(), 3.0),
                ("n_sig".to_string(), 0.3 * events as f64),
                ("n_bkg".to_string(), 0.7 * events as f64),
            ]);
            let model = build_model(ModelKind::GaussExp, (0.0, 10.0), &truth, &[], events as f64)?;
            let key = RngKey::new(ctx.seed, STREAM_SAMPLING, 0);
            let data = generate_toy(&model, &["x"], false, key, &ctx.pool)?;
            Ok(Box::new(move |pool| {
                black_box(nll(&model, &data, &["x"], pool)?);
                Ok(())
            }))
        }
        Kernel::Phsp => {
            let spec = DecaySpec::new(1.0, vec![0.1, 0.2, 0.3])?;
            let mother = FourVector::on_shell(1.0, [0.0; 3]);
            let key = RngKey::new(ctx.seed, STREAM_PHASE_SPACE, 0);
            Ok(Box::new(move |pool| {
                black_box(phsp_generate(&spec, &mother, events, key, pool)?);
                Ok(())
            }))
        }
    }
}
