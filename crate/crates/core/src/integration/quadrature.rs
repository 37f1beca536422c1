use std::collections::BinaryHeap;

use crate::functor::FunctorExpr;

use super::{checked, IntegrationError, IntegrationResult};

// Kronrod abscissae; odd indices are the Gauss points, index 7 is the centre.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn eval1(expr: &FunctorExpr, x: f64) -> Result<f64, IntegrationError> {
    checked(expr.eval_unchecked(&[x])?, &[x])
}

/// One G7/K15 panel with the QUADPACK error estimate.
fn qk15(expr: &FunctorExpr, a: f64, b: f64) -> Result<Panel, IntegrationError> {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = eval1(expr, centre)?;
    let mut res_g = fc * WG[3];
    let mut res_k = fc * WGK[7];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = eval1(expr, centre - dx)?;
        let f2 = eval1(expr, centre + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let scale = half.abs();
    res_abs *= scale;
    res_asc *= scale;
    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok(Panel {
        a,
        b,
        value: res_k * half,
        error,
    })
}

fn check_interval(expr: &FunctorExpr, a: f64, b: f64) -> Result<(), IntegrationError> {
    if expr.arity() != 1 {
        return Err(IntegrationError::ArityMismatch {
            expr: expr.arity(),
            domain: 1,
        });
    }
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(IntegrationError::InvalidInput(format!(
            "need finite a < b, got [{a}, {b}]"
        )));
    }
    Ok(())
}

/// Single 15-point Gauss-Kronrod panel over `[a, b]`.
pub fn gk15_static(expr: &FunctorExpr, a: f64, b: f64) -> Result<IntegrationResult, IntegrationError> {
    check_interval(expr, a, b)?;
    let _frozen = expr.params().freeze();
    let p = qk15(expr, a, b)?;
    Ok(IntegrationResult {
        value: p.value,
        error: p.error,
        iterations: 1,
        chi2_per_dof: 0.0,
        calls_used: 15,
        converged: true,
    })
}

struct ByError(Panel);

impl PartialEq for ByError {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}
impl Eq for ByError {}
impl PartialOrd for ByError {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for ByError {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0
            .error
            .total_cmp(&other.0.error)
            .then(other.0.a.total_cmp(&self.0.a))
    }
}

/// Globally adaptive G7/K15: bisects the panel with the largest error until
/// the summed error is at most `rel_tol·|value|` or `max_intervals` panels exist.
/// `iterations` is the final panel count.
pub fn gk_adaptive(
    expr: &FunctorExpr,
    a: f64,
    b: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Result<IntegrationResult, IntegrationError> {
    check_interval(expr, a, b)?;
    if !(rel_tol >= 1e-14) {
        return Err(IntegrationError::InvalidInput(format!(
            "rel_tol must be at least 1e-14, got {rel_tol}"
        )));
    }
    if max_intervals == 0 {
        return Err(IntegrationError::InvalidInput("max_intervals must be positive".into()));
    }
    let _frozen = expr.params().freeze();
    let mut heap = BinaryHeap::new();
    heap.push(ByError(qk15(expr, a, b)?));
    let mut calls = 15u64;
    let totals = |heap: &BinaryHeap<ByError>| {
        let mut panels: Vec<&Panel> = heap.iter().map(|p| &p.0).collect();
        panels.sort_by(|x, y| x.a.total_cmp(&y.a));
        panels
            .iter()
            .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error))
    };
    let (mut value, mut error) = totals(&heap);
    let mut converged = error <= rel_tol * value.abs();
    while !converged && heap.len() < max_intervals {
        let worst = heap.pop().expect("heap is never empty").0;
        let mid = 0.5 * (worst.a + worst.b);
        if !(worst.a < mid && mid < worst.b) {
            // Panel cannot be split further in floating point.
            heap.push(ByError(worst));
            break;
        }
        heap.push(ByError(qk15(expr, worst.a, mid)?));
        heap.push(ByError(qk15(expr, mid, worst.b)?));
        calls += 30;
        (value, error) = totals(&heap);
        converged = error <= rel_tol * value.abs();
    }
    Ok(IntegrationResult {
        value,
        error,
        iterations: heap.len(),
        chi2_per_dof: 0.0,
        calls_used: calls,
        converged,
    })
}
