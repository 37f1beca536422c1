use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::param::{ParamSet, Parameter};

use super::FitError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStatus {
    Converged,
    MaxIterations,
    HessianNotPosDef,
}

impl fmt::Display for FitStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitStatus::Converged => "converged",
            FitStatus::MaxIterations => "max_iterations",
            FitStatus::HessianNotPosDef => "hessian_not_pos_def",
        })
    }
}

impl FromStr for FitStatus {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "converged" => Ok(FitStatus::Converged),
            "max_iterations" => Ok(FitStatus::MaxIterations),
            "hessian_not_pos_def" => Ok(FitStatus::HessianNotPosDef),
            other => Err(format!("unknown fit status `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizerConfig {
    pub max_iterations: usize,
    /// Simplex spread tolerance, relative to `1 + |f_best|`.
    pub tolerance: f64,
    /// Fresh simplices built around the optimum after the first convergence.
    pub max_restarts: usize,
}

impl Default for MinimizerConfig {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            tolerance: 1e-8,
            max_restarts: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// The fitted parameters; their handles hold the final values.
    pub params: ParamSet,
    pub values: Vec<f64>,
    /// One-sigma errors aligned with `params` (zero for fixed ones); present
    /// only for a converged fit with a positive-definite Hessian.
    pub errors: Option<Vec<f64>>,
    /// Covariance of the free parameters, in the order of `free`.
    pub covariance: Option<DMatrix<f64>>,
    pub free: Vec<usize>,
    pub nll_min: f64,
    pub status: FitStatus,
    pub n_calls: u64,
}

impl FitResult {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.params.index_of(name).map(|i| self.values[i])
    }

    pub fn error(&self, name: &str) -> Option<f64> {
        let i = self.params.index_of(name)?;
        self.errors.as_ref().map(|e| e[i])
    }
}

#[derive(Debug, Clone, Copy)]
enum Bound {
    Free,
    Both(f64, f64),
    Lower(f64),
    Upper(f64),
}

impl Bound {
    fn of(p: &Parameter) -> Self {
        match (p.lower(), p.upper()) {
            (Some(a), Some(b)) => Bound::Both(a, b),
            (Some(a), None) => Bound::Lower(a),
            (None, Some(b)) => Bound::Upper(b),
            (None, None) => Bound::Free,
        }
    }

    fn to_external(self, u: f64) -> f64 {
        match self {
            Bound::Free => u,
            Bound::Both(a, b) => (a + 0.5 * (b - a) * (u.sin() + 1.0)).clamp(a, b),
            Bound::Lower(a) => (a - 1.0 + (u * u + 1.0).sqrt()).max(a),
            Bound::Upper(b) => (b + 1.0 - (u * u + 1.0).sqrt()).min(b),
        }
    }

    fn to_internal(self, x: f64) -> f64 {
        match self {
            Bound::Free => x,
            Bound::Both(a, b) => (2.0 * (x - a) / (b - a) - 1.0).clamp(-1.0, 1.0).asin(),
            Bound::Lower(a) => ((x - a + 1.0).powi(2) - 1.0).max(0.0).sqrt(),
            Bound::Upper(b) => ((b - x + 1.0).powi(2) - 1.0).max(0.0).sqrt(),
        }
    }

    fn clamp(self, x: f64) -> f64 {
        match self {
            Bound::Free => x,
            Bound::Both(a, b) => x.clamp(a, b),
            Bound::Lower(a) => x.max(a),
            Bound::Upper(b) => x.min(b),
        }
    }

    /// Largest symmetric step around `x` that stays inside the bounds.
    fn room(self, x: f64) -> f64 {
        match self {
            Bound::Free => f64::INFINITY,
            Bound::Both(a, b) => (x - a).min(b - x),
            Bound::Lower(a) => x - a,
            Bound::Upper(b) => b - x,
        }
    }
}

/// Objective evaluation over the free parameters, counting calls.
pub(crate) struct Problem<'a, F> {
    objective: F,
    pub(crate) params: &'a ParamSet,
    pub(crate) free: Vec<usize>,
    bounds: Vec<Bound>,
    pub(crate) calls: u64,
}

impl<'a, F> Problem<'a, F>
where
    F: FnMut(&ParamSet) -> Result<f64, FitError>,
{
    pub(crate) fn new(objective: F, params: &'a ParamSet) -> Self {
        let free: Vec<usize> = (0..params.len())
            .filter(|&i| !params.get(i).expect("index in range").is_fixed())
            .collect();
        let bounds = free
            .iter()
            .map(|&i| Bound::of(params.get(i).expect("index in range")))
            .collect();
        Self {
            objective,
            params,
            free,
            bounds,
            calls: 0,
        }
    }

    fn param(&self, j: usize) -> &Parameter {
        self.params.get(self.free[j]).expect("free index in range")
    }

    pub(crate) fn external(&self) -> Vec<f64> {
        (0..self.free.len()).map(|j| self.param(j).value()).collect()
    }

    pub(crate) fn eval_external(&mut self, x: &[f64]) -> Result<f64, FitError> {
        for (j, &v) in x.iter().enumerate() {
            let v = self.bounds[j].clamp(v);
            self.param(j).set_value(v)?;
        }
        self.calls += 1;
        (self.objective)(self.params)
    }

    fn eval_internal(&mut self, u: &[f64]) -> f64 {
        let x: Vec<f64> = u
            .iter()
            .zip(&self.bounds)
            .map(|(&ui, b)| b.to_external(ui))
            .collect();
        match self.eval_external(&x) {
            Ok(f) if f.is_finite() => f,
            _ => f64::INFINITY,
        }
    }

    fn to_internal(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.bounds).map(|(&v, b)| b.to_internal(v)).collect()
    }

    fn to_external(&self, u: &[f64]) -> Vec<f64> {
        u.iter().zip(&self.bounds).map(|(&v, b)| b.to_external(v)).collect()
    }

    /// Internal-coordinate simplex steps corresponding to each parameter's external step.
    fn internal_steps(&self, x: &[f64]) -> Vec<f64> {
        (0..self.free.len())
            .map(|j| {
                let b = self.bounds[j];
                let s = self.param(j).step();
                let u0 = b.to_internal(x[j]);
                let up = (b.to_internal(b.clamp(x[j] + s)) - u0).abs();
                let down = (b.to_internal(b.clamp(x[j] - s)) - u0).abs();
                let step = up.max(down);
                if step.is_finite() && step > 0.0 {
                    step
                } else {
                    0.1
                }
            })
            .collect()
    }

    /// Nelder-Mead from the current parameter values. Returns the best
    /// external point, its objective value, and whether the spread criterion was met.
    fn nelder_mead(&mut self, config: &MinimizerConfig) -> (Vec<f64>, f64, bool) {
        let n = self.free.len();
        let start = self.external();
        let steps = self.internal_steps(&start);
        let mut best_u = self.to_internal(&start);
        let mut best_f = self.eval_internal(&best_u);
        let mut iterations = 0;
        let mut restarts = 0;
        loop {
            let mut simplex = vec![(best_u.clone(), best_f)];
            for (j, step) in steps.iter().enumerate() {
                let mut u = best_u.clone();
                u[j] += step;
                let f = self.eval_internal(&u);
                simplex.push((u, f));
            }
            let converged = self.run_simplex(&mut simplex, n, config, &mut iterations);
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let (u, f) = simplex.swap_remove(0);
            let improvement = best_f - f;
            let tol = config.tolerance * (1.0 + f.abs());
            if f <= best_f {
                best_u = u;
                best_f = f;
            }
            if !converged {
                let x = self.to_external(&best_u);
                return (x, best_f, false);
            }
            if restarts >= config.max_restarts || (restarts > 0 && improvement <= tol) {
                let x = self.to_external(&best_u);
                return (x, best_f, true);
            }
            restarts += 1;
        }
    }

    fn run_simplex(
        &mut self,
        s: &mut [(Vec<f64>, f64)],
        n: usize,
        config: &MinimizerConfig,
        iterations: &mut usize,
    ) -> bool {
        loop {
            s.sort_by(|a, b| a.1.total_cmp(&b.1));
            let (f_best, f_worst) = (s[0].1, s[n].1);
            if f_worst - f_best <= config.tolerance * (1.0 + f_best.abs()) {
                return true;
            }
            if *iterations >= config.max_iterations {
                return false;
            }
            *iterations += 1;
            let mut centroid = vec![0.0; n];
            for (u, _) in &s[..n] {
                for (c, v) in centroid.iter_mut().zip(u) {
                    *c += v / n as f64;
                }
            }
            let along = |t: f64, worst: &[f64]| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(worst)
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };
            let worst = s[n].0.clone();
            let xr = along(1.0, &worst);
            let fr = self.eval_internal(&xr);
            if fr < f_best {
                let xe = along(2.0, &worst);
                let fe = self.eval_internal(&xe);
                s[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < s[n - 1].1 {
                s[n] = (xr, fr);
                continue;
            }
            let (xc, fc, accept) = if fr < f_worst {
                let xc = along(0.5, &worst);
                let fc = self.eval_internal(&xc);
                (xc, fc, fc <= fr)
            } else {
                let xc = along(-0.5, &worst);
                let fc = self.eval_internal(&xc);
                (xc, fc, fc < f_worst)
            };
            if accept {
                s[n] = (xc, fc);
                continue;
            }
            let best = s[0].0.clone();
            for vertex in s.iter_mut().skip(1) {
                let u: Vec<f64> = best
                    .iter()
                    .zip(&vertex.0)
                    .map(|(b, v)| b + 0.5 * (v - b))
                    .collect();
                let f = self.eval_internal(&u);
                *vertex = (u, f);
            }
        }
    }

    /// Central-difference Hessian in external coordinates at `x`.
    fn hessian(&mut self, x: &[f64], f0: f64) -> Option<DMatrix<f64>> {
        let n = x.len();
        let mut h = vec![0.0; n];
        for j in 0..n {
            let room = self.bounds[j].room(x[j]);
            h[j] = (1e-4 * x[j].abs()).max(1e-6);
            if room < h[j] {
                if !(room > 0.0) {
                    return None;
                }
                h[j] = 0.5 * room;
            }
        }
        let eval = |this: &mut Self, shifts: &[(usize, f64)]| -> Option<f64> {
            let mut y = x.to_vec();
            for &(j, s) in shifts {
                y[j] += s;
            }
            this.eval_external(&y).ok().filter(|f| f.is_finite())
        };
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            let fp = eval(self, &[(i, h[i])])?;
            let fm = eval(self, &[(i, -h[i])])?;
            m[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
            for j in 0..i {
                let fpp = eval(self, &[(i, h[i]), (j, h[j])])?;
                let fpm = eval(self, &[(i, h[i]), (j, -h[j])])?;
                let fmp = eval(self, &[(i, -h[i]), (j, h[j])])?;
                let fmm = eval(self, &[(i, -h[i]), (j, -h[j])])?;
                let v = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Some(m)
    }

    pub(crate) fn set_external(&self, x: &[f64]) -> Result<(), FitError> {
        for (j, &v) in x.iter().enumerate() {
            self.param(j).set_value(self.bounds[j].clamp(v))?;
        }
        Ok(())
    }
}

/// Minimizes `objective` over the free parameters of `params` with a
/// Nelder-Mead simplex in unbounded internal coordinates, then derives
/// errors from the inverse central-difference Hessian (Δf = 0.5 convention).
pub fn minimize<F>(objective: F, params: &ParamSet, config: &MinimizerConfig) -> Result<FitResult, FitError>
where
    F: FnMut(&ParamSet) -> Result<f64, FitError>,
{
    let mut problem = Problem::new(objective, params);
    minimize_problem(&mut problem, config, |_| Ok(()))
}

/// [`minimize`] with a `polish` step run on the simplex optimum before the Hessian.
pub(crate) fn minimize_problem<F, P>(
    problem: &mut Problem<'_, F>,
    config: &MinimizerConfig,
    polish: P,
) -> Result<FitResult, FitError>
where
    F: FnMut(&ParamSet) -> Result<f64, FitError>,
    P: FnOnce(&mut Problem<'_, F>) -> Result<(), FitError>,
{
    if !(config.tolerance > 0.0) || config.max_iterations == 0 {
        return Err(FitError::Config("tolerance and max_iterations must be positive".into()));
    }
    let params = problem.params;
    if problem.free.is_empty() {
        problem.calls += 1;
        let f = (problem.objective)(params)?;
        return Ok(FitResult {
            params: params.clone(),
            values: params.values(),
            errors: None,
            covariance: None,
            free: vec![],
            nll_min: f,
            status: FitStatus::Converged,
            n_calls: problem.calls,
        });
    }
    let start = problem.external();
    problem.eval_external(&start)?;
    let (best, _, converged) = problem.nelder_mead(config);
    problem.set_external(&best)?;
    polish(problem)?;
    let best = problem.external();
    let f_min = problem.eval_external(&best)?;
    let mut status = if converged {
        FitStatus::Converged
    } else {
        FitStatus::MaxIterations
    };
    let mut errors = None;
    let mut covariance = None;
    if converged {
        let cov = problem
            .hessian(&best, f_min)
            .and_then(|h| h.cholesky())
            .map(|c| c.inverse());
        match cov {
            Some(cov) => {
                let mut e = vec![0.0; params.len()];
                for (j, &i) in problem.free.iter().enumerate() {
                    e[i] = cov[(j, j)].sqrt();
                }
                errors = Some(e);
                covariance = Some(cov);
            }
            None => status = FitStatus::HessianNotPosDef,
        }
    }
    problem.set_external(&best)?;
    Ok(FitResult {
        params: params.clone(),
        values: params.values(),
        errors,
        covariance,
        free: problem.free.clone(),
        nll_min: f_min,
        status,
        n_calls: problem.calls,
    })
}
