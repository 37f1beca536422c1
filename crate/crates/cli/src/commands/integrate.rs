use std::f64::consts::PI;

use hepflow::csv::format_real;
use hepflow::functor::FunctorExpr;
use hepflow::integration::{gk15_static, gk_adaptive, plain_mc, vegas, IntegrationResult, VegasConfig};
use hepflow::param::ParamSet;
use hepflow::rng::{RngKey, STREAM_SAMPLING};
use hepflow::sampling::BoundedRegion;

use crate::args::{IntegrateArgs, Integrand, Method};
use crate::error::CliError;
use crate::values::parse_range;
use crate::{Ctx, Output};

pub const HEADER: &str = "value,error,chi2_per_dof,calls_used";

fn integrand(args: &IntegrateArgs) -> Result<FunctorExpr, CliError> {
    let dim = args.dim;
    match args.integrand {
        Integrand::Gauss => {
            let (mu, s) = (args.mean, args.sigma);
            if !(s > 0.0 && s.is_finite() && mu.is_finite()) {
                return Err(CliError::usage("--sigma must be positive and --mean finite"));
            }
            let norm = 1.0 / (s * (2.0 * PI).sqrt());
            Ok(FunctorExpr::wrap_labeled("gauss", dim, ParamSet::new(), move |x, _| {
                x.iter().map(|xi| norm * (-0.5 * ((xi - mu) / s).powi(2)).exp()).product()
            }))
        }
        Integrand::Pow => {
            let p = args.exponent;
            if !p.is_finite() {
                return Err(CliError::usage("--exponent must be finite"));
            }
            Ok(FunctorExpr::wrap_labeled("pow", dim, ParamSet::new(), move |x, _| {
                x.iter().map(|xi| xi.powf(p)).product()
            }))
        }
    }
}

pub fn run(args: &IntegrateArgs, ctx: &Ctx) -> Result<Output, CliError> {
    if args.dim == 0 {
        return Err(CliError::usage("--dim must be at least 1"));
    }
    let (lo, hi) = parse_range(&args.range).map_err(CliError::usage)?;
    let expr = integrand(args)?;
    let key = RngKey::new(ctx.seed, STREAM_SAMPLING, 0);
    let one_dim = || {
        if args.dim == 1 {
            Ok(())
        } else {
            Err(CliError::usage("quadrature methods are one-dimensional; use --dim 1"))
        }
    };
    let result: IntegrationResult = match args.method {
        Method::Plain => {
            let region = BoundedRegion::cube(args.dim, lo, hi)?;
            plain_mc(&expr, &region, args.calls, key, &ctx.pool)?
        }
        Method::Vegas => {
            let region = BoundedRegion::cube(args.dim, lo, hi)?;
            let config = VegasConfig {
                calls_per_iteration: args.calls,
                iterations: args.iterations,
                alpha: args.alpha,
                bins: args.bins,
                adapt: true,
            };
            let run = vegas(&expr, &region, &config, key, &ctx.pool)?;
            if run.negative_values {
                eprintln!("warning: integrand is negative somewhere; the grid adapted to |f|");
            }
            run.result
        }
        Method::Gk => {
            one_dim()?;
            gk15_static(&expr, lo, hi)?
        }
        Method::GkAdaptive => {
            one_dim()?;
            let r = gk_adaptive(&expr, lo, hi, args.rel_tol, args.max_intervals)?;
            if !r.converged {
                eprintln!("warning: tolerance not reached with {} panels", r.iterations);
            }
            r
        }
    };
    Ok(Output::Text(format!(
        "{HEADER}\n{},{},{},{}\n",
        format_real(result.value),
        format_real(result.error),
        format_real(result.chi2_per_dof),
        result.calls_used
    )))
}
