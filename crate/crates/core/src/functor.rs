//! Parametric function expressions.
//!
//! A [`FunctorExpr`] is an immutable tree whose leaves are built-in shapes or
//! wrapped closures and whose interior nodes are pointwise arithmetic or
//! functional composition. Parameters are the only mutable state; every node
//! exposes the concatenation of its leaves' parameters, so the root can drive
//! all of them.

use std::fmt;
use std::ops::{Add, Div, Mul, Sub};
use std::sync::Arc;

use smallvec::SmallVec;
use thiserror::Error;

use crate::param::{ParamError, ParamSet, Parameter};
use crate::parallel::{WorkerPool, CHUNK_SIZE};
use crate::store::{ColumnStore, StoreError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FunctorError {
    #[error("arity mismatch: expected {expected} arguments, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("gaussian sigma must be positive, got {sigma}")]
    NonPositiveSigma { sigma: f64 },
    #[error("exponential tau must be non-zero")]
    ZeroTau,
    #[error("division by zero at point {point:?}")]
    DivisionByZero { point: Vec<f64> },
    #[error("row {row}: {source}")]
    AtRow {
        row: usize,
        #[source]
        source: Box<FunctorError>,
    },
}

/// Signature of a wrapped closure: `(point, parameter values) -> value`.
pub type ClosureFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
        }
    }
}

enum Node {
    Gaussian {
        mean: Parameter,
        sigma: Parameter,
    },
    Exponential {
        tau: Parameter,
    },
    Closure {
        label: String,
        f: Arc<ClosureFn>,
        params: Vec<Parameter>,
    },
    Binary {
        op: BinaryOp,
        lhs: FunctorExpr,
        rhs: FunctorExpr,
    },
    Compose {
        outer: FunctorExpr,
        inners: Vec<FunctorExpr>,
    },
}

#[derive(Clone)]
pub struct FunctorExpr {
    node: Arc<Node>,
    arity: usize,
    params: ParamSet,
}

type Scratch = SmallVec<[f64; 8]>;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

impl FunctorExpr {
    /// Normalized Gaussian density `exp(−(x−μ)²/2σ²) / (σ√(2π))` of the first argument.
    pub fn gaussian(mean: Parameter, sigma: Parameter) -> Result<Self, FunctorError> {
        let params = ParamSet::from_params([mean.clone(), sigma.clone()])?;
        Ok(Self {
            node: Arc::new(Node::Gaussian { mean, sigma }),
            arity: 1,
            params,
        })
    }

    /// Unnormalized exponential shape `exp(−x/τ)` of the first argument.
    pub fn exponential(tau: Parameter) -> Self {
        let params = ParamSet::from_params([tau.clone()]).expect("single parameter");
        Self {
            node: Arc::new(Node::Exponential { tau }),
            arity: 1,
            params,
        }
    }

    /// Wraps a closure of `arity` arguments; it receives the current values
    /// of `params` (in order) on every call.
    pub fn wrap<F>(arity: usize, params: ParamSet, f: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::wrap_labeled("closure", arity, params, f)
    }

    pub fn wrap_labeled<F>(label: &str, arity: usize, params: ParamSet, f: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            node: Arc::new(Node::Closure {
                label: label.to_string(),
                f: Arc::new(f),
                params: params.iter().cloned().collect(),
            }),
            arity,
            params,
        }
    }

    /// The `index`-th coordinate of an `arity`-dimensional point.
    pub fn variable(arity: usize, index: usize) -> Self {
        assert!(index < arity, "variable index {index} out of range for arity {arity}");
        Self::wrap_labeled(&format!("x{index}"), arity, ParamSet::new(), move |x, _| x[index])
    }

    pub fn constant(arity: usize, c: f64) -> Self {
        Self::wrap_labeled(&format!("{c}"), arity, ParamSet::new(), move |_, _| c)
    }

    /// Pointwise `a op b`; parameters are `a`'s followed by `b`'s.
    pub fn combine(op: BinaryOp, a: &FunctorExpr, b: &FunctorExpr) -> Result<Self, FunctorError> {
        if a.arity != b.arity {
            return Err(FunctorError::ArityMismatch {
                expected: a.arity,
                got: b.arity,
            });
        }
        Ok(Self {
            params: a.params.merged(&b.params)?,
            arity: a.arity,
            node: Arc::new(Node::Binary {
                op,
                lhs: a.clone(),
                rhs: b.clone(),
            }),
        })
    }

    /// `outer(inner₁(x), …, innerₖ(x))`.
    pub fn compose(outer: &FunctorExpr, inners: &[FunctorExpr]) -> Result<Self, FunctorError> {
        if outer.arity != inners.len() {
            return Err(FunctorError::ArityMismatch {
                expected: outer.arity,
                got: inners.len(),
            });
        }
        let arity = inners.first().map_or(0, |f| f.arity);
        if let Some(bad) = inners.iter().find(|f| f.arity != arity) {
            return Err(FunctorError::ArityMismatch {
                expected: arity,
                got: bad.arity,
            });
        }
        let mut params = outer.params.clone();
        for inner in inners {
            params = params.merged(&inner.params)?;
        }
        Ok(Self {
            node: Arc::new(Node::Compose {
                outer: outer.clone(),
                inners: inners.to_vec(),
            }),
            arity,
            params,
        })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    /// All parameters reachable from this node, leaves in left-to-right order.
    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn set_parameter(&self, name: &str, value: f64) -> Result<(), FunctorError> {
        Ok(self.params.set_value(name, value)?)
    }

    /// Evaluates at `x`, which must have exactly [`arity`](Self::arity) coordinates.
    pub fn eval(&self, x: &[f64]) -> Result<f64, FunctorError> {
        if x.len() != self.arity {
            return Err(FunctorError::ArityMismatch {
                expected: self.arity,
                got: x.len(),
            });
        }
        self.eval_unchecked(x)
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> Result<f64, FunctorError> {
        match &*self.node {
            Node::Gaussian { mean, sigma } => {
                let s = sigma.value();
                if !(s > 0.0) {
                    return Err(FunctorError::NonPositiveSigma { sigma: s });
                }
                let z = (x[0] - mean.value()) / s;
                Ok((-0.5 * z * z).exp() * INV_SQRT_2PI / s)
            }
            Node::Exponential { tau } => {
                let t = tau.value();
                if t == 0.0 {
                    return Err(FunctorError::ZeroTau);
                }
                Ok((-x[0] / t).exp())
            }
            Node::Closure { f, params, .. } => {
                let values: Scratch = params.iter().map(Parameter::value).collect();
                Ok(f(x, &values))
            }
            Node::Binary { op, lhs, rhs } => {
                let a = lhs.eval_unchecked(x)?;
                let b = rhs.eval_unchecked(x)?;
                match op {
                    BinaryOp::Add => Ok(a + b),
                    BinaryOp::Sub => Ok(a - b),
                    BinaryOp::Mul => Ok(a * b),
                    BinaryOp::Div => {
                        if b == 0.0 {
                            Err(FunctorError::DivisionByZero { point: x.to_vec() })
                        } else {
                            Ok(a / b)
                        }
                    }
                }
            }
            Node::Compose { outer, inners } => {
                let args = inners
                    .iter()
                    .map(|f| f.eval_unchecked(x))
                    .collect::<Result<Scratch, _>>()?;
                outer.eval_unchecked(&args)
            }
        }
    }
}

impl fmt::Debug for FunctorExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.node {
            Node::Gaussian { mean, sigma } => {
                write!(f, "gauss({}, {})", mean.name(), sigma.name())
            }
            Node::Exponential { tau } => write!(f, "exp(-x/{})", tau.name()),
            Node::Closure { label, .. } => f.write_str(label),
            Node::Binary { op, lhs, rhs } => write!(f, "({lhs:?} {} {rhs:?})", op.symbol()),
            Node::Compose { outer, inners } => write!(f, "{outer:?}∘{inners:?}"),
        }
    }
}

/// Builds a functor from a bare closure of one argument, like `x ↦ 2·sin(x)`.
pub fn wrap_closure<F>(f: F) -> FunctorExpr
where
    F: Fn(f64) -> f64 + Send + Sync + 'static,
{
    FunctorExpr::wrap(1, ParamSet::new(), move |x, _| f(x[0]))
}

macro_rules! impl_op {
    ($trait:ident, $method:ident, $op:expr) => {
        impl $trait for &FunctorExpr {
            type Output = FunctorExpr;
            /// Panics on arity mismatch; use [`FunctorExpr::combine`] to handle it.
            fn $method(self, rhs: &FunctorExpr) -> FunctorExpr {
                FunctorExpr::combine($op, self, rhs).unwrap_or_else(|e| panic!("{e}"))
            }
        }

        impl $trait for FunctorExpr {
            type Output = FunctorExpr;
            fn $method(self, rhs: FunctorExpr) -> FunctorExpr {
                (&self).$method(&rhs)
            }
        }
    };
}

impl_op!(Add, add, BinaryOp::Add);
impl_op!(Sub, sub, BinaryOp::Sub);
impl_op!(Mul, mul, BinaryOp::Mul);
impl_op!(Div, div, BinaryOp::Div);

/// Function values aligned row-for-row with the store they were computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalColumn {
    pub values: Vec<f64>,
}

impl EvalColumn {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Evaluates `expr` on every row, taking its arguments from `arg_columns`.
pub fn map_evaluate(
    expr: &FunctorExpr,
    store: &ColumnStore,
    arg_columns: &[&str],
    pool: &WorkerPool,
) -> Result<EvalColumn, FunctorError> {
    if arg_columns.len() != expr.arity() {
        return Err(FunctorError::ArityMismatch {
            expected: expr.arity(),
            got: arg_columns.len(),
        });
    }
    let columns = store.real_columns(arg_columns)?;
    let _frozen = expr.params().freeze();
    let chunks = pool.try_map_chunks(store.len(), CHUNK_SIZE, |rows| {
        let mut point: Scratch = SmallVec::from_elem(0.0, columns.len());
        let mut out = Vec::with_capacity(rows.len());
        for i in rows {
            for (p, c) in point.iter_mut().zip(&columns) {
                *p = c[i];
            }
            out.push(expr.eval_unchecked(&point).map_err(|e| FunctorError::AtRow {
                row: i,
                source: Box::new(e),
            })?);
        }
        Ok::<_, FunctorError>(out)
    })?;
    Ok(EvalColumn {
        values: chunks.concat(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn p(name: &str, v: f64) -> Parameter {
        Parameter::new(name, v).unwrap()
    }

    fn gauss(mu: f64, sigma: f64) -> FunctorExpr {
        FunctorExpr::gaussian(p("mu", mu), p("sigma", sigma)).unwrap()
    }

    #[test]
    fn gaussian_values() {
        assert_eq!(gauss(0.0, 1.0).eval(&[0.0]).unwrap(), 0.3989422804014327);
        assert_eq!(gauss(2.0, 1.0).eval(&[2.0]).unwrap(), 0.3989422804014327);
        // exp(−0.5)/(2√(2π)), evaluated independently
        let expected = (-0.5f64).exp() / (2.0 * (2.0 * PI).sqrt());
        assert_relative_eq!(gauss(0.0, 2.0).eval(&[2.0]).unwrap(), expected, max_relative = 1e-15);
        assert_relative_eq!(gauss(0.0, 2.0).eval(&[2.0]).unwrap(), 0.12098536225957168, max_relative = 1e-15);
    }

    #[test]
    fn gaussian_rejects_bad_sigma() {
        let g = gauss(0.0, 1.0);
        g.set_parameter("sigma", 0.0).unwrap();
        assert_eq!(g.eval(&[0.0]), Err(FunctorError::NonPositiveSigma { sigma: 0.0 }));
    }

    #[test]
    fn exponential_values() {
        let e = FunctorExpr::exponential(p("tau", 1.0));
        assert_eq!(e.eval(&[0.0]).unwrap(), 1.0);
        assert_eq!(e.eval(&[1.0]).unwrap(), 0.36787944117144233);
        e.set_parameter("tau", 2.0).unwrap();
        assert_relative_eq!(e.eval(&[3.0]).unwrap(), 0.22313016014842982, max_relative = 1e-15);
        e.set_parameter("tau", 0.0).unwrap();
        assert_eq!(e.eval(&[1.0]), Err(FunctorError::ZeroTau));
    }

    #[test]
    fn wrapped_closures() {
        let two = 2.0;
        let f = wrap_closure(move |x| two * x.sin());
        assert_eq!(f.eval(&[PI / 2.0]).unwrap(), 2.0);
        let one = FunctorExpr::constant(1, 1.0);
        assert_eq!(one.eval(&[123.0]).unwrap(), 1.0);
        let a = p("a", 3.0);
        let lin = FunctorExpr::wrap(1, ParamSet::from_params([a]).unwrap(), |x, p| p[0] * x[0]);
        assert_eq!(lin.eval(&[2.0]).unwrap(), 6.0);
    }

    #[test]
    fn parameter_updates_are_visible() {
        let a = p("a", 3.0);
        let lin = FunctorExpr::wrap(1, ParamSet::from_params([a.clone()]).unwrap(), |x, p| p[0] * x[0]);
        let expr = &lin + &FunctorExpr::constant(1, 1.0);
        assert_eq!(expr.eval(&[2.0]).unwrap(), 7.0);
        a.set_value(5.0).unwrap();
        assert_eq!(expr.eval(&[2.0]).unwrap(), 11.0);
        expr.set_parameter("a", 1.0).unwrap();
        assert_eq!(lin.eval(&[2.0]).unwrap(), 2.0);
    }

    #[test]
    fn combined_parameter_order() {
        let g = gauss(0.0, 1.0);
        let e = FunctorExpr::exponential(p("tau", 1.0));
        let sum = &g + &e;
        assert_eq!(sum.params().names(), vec!["mu", "sigma", "tau"]);
        // shared leaves appear once
        let sq = &(&g - &e) * &(&g + &e);
        assert_eq!(sq.params().names(), vec!["mu", "sigma", "tau"]);
        // distinct parameters with the same name are rejected
        let clash = FunctorExpr::combine(BinaryOp::Add, &g, &gauss(1.0, 1.0));
        assert!(matches!(clash, Err(FunctorError::Params(ParamError::Duplicate(_)))));
    }

    #[test]
    fn division_by_zero_reports_point() {
        let q = &wrap_closure(|x| x) / &wrap_closure(|x| x - 1.0);
        assert_eq!(q.eval(&[1.0]), Err(FunctorError::DivisionByZero { point: vec![1.0] }));
    }

    #[test]
    fn compose_examples() {
        let a = wrap_closure(|x| x * x + 1.0);
        let id = wrap_closure(|u| u);
        assert_eq!(FunctorExpr::compose(&id, std::slice::from_ref(&a)).unwrap().eval(&[3.0]).unwrap(), 10.0);

        let b = wrap_closure(f64::cos);
        let plus = FunctorExpr::wrap(2, ParamSet::new(), |u, _| u[0] + u[1]);
        let c = FunctorExpr::compose(&plus, &[a.clone(), b.clone()]).unwrap();
        let s = &a + &b;
        for x in [-1.0, 0.3, 2.0] {
            assert_eq!(c.eval(&[x]).unwrap(), s.eval(&[x]).unwrap());
        }

        let times = FunctorExpr::wrap(2, ParamSet::new(), |u, _| u[0] * u[1]);
        let sc = FunctorExpr::compose(&times, &[wrap_closure(f64::sin), wrap_closure(f64::cos)]).unwrap();
        assert_relative_eq!(sc.eval(&[0.7]).unwrap(), 0.7f64.sin() * 0.7f64.cos(), max_relative = 1e-15);
        // sin(x)cos(x) = sin(2x)/2
        assert_relative_eq!(sc.eval(&[0.7]).unwrap(), 0.4927248649942301, max_relative = 1e-15);

        assert!(matches!(
            FunctorExpr::compose(&times, std::slice::from_ref(&a)),
            Err(FunctorError::ArityMismatch { expected: 2, got: 1 })
        ));
        let two_d = FunctorExpr::variable(2, 0);
        assert!(FunctorExpr::compose(&plus, &[a, two_d]).is_err());
    }

    #[test]
    fn arity_checked() {
        assert!(FunctorExpr::combine(BinaryOp::Add, &gauss(0.0, 1.0), &FunctorExpr::variable(2, 1)).is_err());
        assert!(gauss(0.0, 1.0).eval(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn map_evaluate_examples() {
        let store = ColumnStore::from_real_columns(["x"], vec![vec![1.0, -2.0, 3.5]]).unwrap();
        let pool = WorkerPool::serial();
        let ident = FunctorExpr::variable(1, 0);
        assert_eq!(map_evaluate(&ident, &store, &["x"], &pool).unwrap().values, vec![1.0, -2.0, 3.5]);
        let zero = ColumnStore::from_real_columns(["x"], vec![vec![0.0]]).unwrap();
        assert_eq!(
            map_evaluate(&gauss(0.0, 1.0), &zero, &["x"], &pool).unwrap().values,
            vec![0.3989422804014327]
        );
        assert!(matches!(
            map_evaluate(&ident, &store, &["y"], &pool),
            Err(FunctorError::Store(StoreError::UnknownColumn(_)))
        ));
        assert!(matches!(
            map_evaluate(&ident, &store, &["x", "x"], &pool),
            Err(FunctorError::ArityMismatch { .. })
        ));
    }

    #[test]
    fn map_evaluate_worker_invariant() {
        let n = 50_000;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.001).sin() * 4.0).collect();
        let ys: Vec<f64> = (0..n).map(|i| (i as f64 * 0.0007).cos()).collect();
        let store = ColumnStore::from_real_columns(["x", "y"], vec![xs, ys]).unwrap();
        let f = FunctorExpr::wrap(2, ParamSet::new(), |v, _| (v[0] * v[1]).exp() / (1.0 + v[0] * v[0]));
        let a = map_evaluate(&f, &store, &["x", "y"], &WorkerPool::new(1)).unwrap();
        let b = map_evaluate(&f, &store, &["x", "y"], &WorkerPool::new(8)).unwrap();
        assert_eq!(a.len(), n);
        assert!(a.values.iter().zip(&b.values).all(|(u, v)| u.to_bits() == v.to_bits()));
    }

    #[test]
    fn map_evaluate_reports_row() {
        let store = ColumnStore::from_real_columns(["x"], vec![vec![2.0, 1.0, 0.0]]).unwrap();
        let inv = &FunctorExpr::constant(1, 1.0) / &FunctorExpr::variable(1, 0);
        let err = map_evaluate(&inv, &store, &["x"], &WorkerPool::serial()).unwrap_err();
        assert!(matches!(err, FunctorError::AtRow { row: 2, .. }));
    }

    proptest! {
        #[test]
        fn algebraic_identities(
            ca in -3.0f64..3.0, cb in -3.0f64..3.0, x in -5.0f64..5.0,
        ) {
            let a = FunctorExpr::wrap(1, ParamSet::new(), move |v, _| ca * v[0].sin() + 0.5);
            let b = FunctorExpr::wrap(1, ParamSet::new(), move |v, _| cb * v[0].cos() - 0.25);
            let av = a.eval(&[x]).unwrap();
            let bv = b.eval(&[x]).unwrap();
            prop_assert_eq!((&a - &b).eval(&[x]).unwrap(), av - bv);
            prop_assert_eq!((&a + &b).eval(&[x]).unwrap(), (&b + &a).eval(&[x]).unwrap());
            prop_assert_eq!((&a * &b).eval(&[x]).unwrap(), (&b * &a).eval(&[x]).unwrap());
            let diff_sq = (&(&a - &b) * &(&a + &b)).eval(&[x]).unwrap();
            let oracle = av * av - bv * bv;
            prop_assert!((diff_sq - oracle).abs() <= 1e-12 * (av * av + bv * bv).max(1e-300));
            let round_trip = (&(&a - &b) + &b).eval(&[x]).unwrap();
            prop_assert!((round_trip - av).abs() <= 1e-12 * av.abs().max(bv.abs()));
            let id = FunctorExpr::variable(1, 0);
            let left = FunctorExpr::compose(&id, std::slice::from_ref(&a)).unwrap();
            let right = FunctorExpr::compose(&a, &[id]).unwrap();
            prop_assert_eq!(left.eval(&[x]).unwrap(), av);
            prop_assert_eq!(right.eval(&[x]).unwrap(), av);
        }
    }
}
