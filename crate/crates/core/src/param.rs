//! Named fit parameters.
//!
//! A [`Parameter`] is a shared handle: clones refer to the same value, so a
//! functor leaf and the [`ParamSet`] that a minimizer drives see every update
//! immediately. Values are stored as atomic bit patterns, which makes reads
//! from evaluation workers free of locking.

use std::fmt;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("parameter name `{0}` is not a valid identifier")]
    InvalidName(String),
    #[error("parameter `{name}`: lower bound {lower} must be below upper bound {upper}")]
    InvalidBounds { name: String, lower: f64, upper: f64 },
    #[error("parameter `{name}`: value {value} outside bounds [{lower}, {upper}]")]
    OutOfBounds {
        name: String,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("parameter `{name}`: step must be positive, got {step}")]
    InvalidStep { name: String, step: f64 },
    #[error("parameter `{name}`: value must be finite, got {value}")]
    NonFinite { name: String, value: f64 },
    #[error("duplicate parameter name `{0}`")]
    Duplicate(String),
    #[error("unknown parameter `{0}`")]
    Unknown(String),
    #[error("expected {expected} values, got {got}")]
    Arity { expected: usize, got: usize },
}

struct ParamInner {
    name: String,
    value: AtomicU64,
    step: AtomicU64,
    lower: Option<f64>,
    upper: Option<f64>,
    fixed: AtomicBool,
    frozen: AtomicUsize,
}

/// Shared handle to a named real parameter.
#[derive(Clone)]
pub struct Parameter(Arc<ParamInner>);

impl Parameter {
    /// Unbounded, free parameter with a default step of `max(0.1·|value|, 0.1)`.
    pub fn new(name: impl Into<String>, value: f64) -> Result<Self, ParamError> {
        Self::build(name.into(), value, None, None)
    }

    /// Parameter restricted to `[lower, upper]`.
    pub fn bounded(
        name: impl Into<String>,
        value: f64,
        lower: f64,
        upper: f64,
    ) -> Result<Self, ParamError> {
        Self::build(name.into(), value, Some(lower), Some(upper))
    }

    /// Parameter restricted to `value ≥ lower`.
    pub fn lower_bounded(
        name: impl Into<String>,
        value: f64,
        lower: f64,
    ) -> Result<Self, ParamError> {
        Self::build(name.into(), value, Some(lower), None)
    }

    fn build(
        name: String,
        value: f64,
        lower: Option<f64>,
        upper: Option<f64>,
    ) -> Result<Self, ParamError> {
        if !is_identifier(&name) {
            return Err(ParamError::InvalidName(name));
        }
        if let (Some(lo), Some(hi)) = (lower, upper) {
            if !(lo < hi) {
                return Err(ParamError::InvalidBounds {
                    name,
                    lower: lo,
                    upper: hi,
                });
            }
        }
        check_value(&name, value, lower, upper)?;
        let step = (0.1 * value.abs()).max(0.1);
        Ok(Parameter(Arc::new(ParamInner {
            name,
            value: AtomicU64::new(value.to_bits()),
            step: AtomicU64::new(step.to_bits()),
            lower,
            upper,
            fixed: AtomicBool::new(false),
            frozen: AtomicUsize::new(0),
        })))
    }

    pub fn with_step(self, step: f64) -> Result<Self, ParamError> {
        self.set_step(step)?;
        Ok(self)
    }

    pub fn fixed(self) -> Self {
        self.set_fixed(true);
        self
    }

    pub fn name(&self) -> &str {
        &self.0.name
    }

    #[inline]
    pub fn value(&self) -> f64 {
        f64::from_bits(self.0.value.load(Ordering::Relaxed))
    }

    pub fn step(&self) -> f64 {
        f64::from_bits(self.0.step.load(Ordering::Relaxed))
    }

    pub fn lower(&self) -> Option<f64> {
        self.0.lower
    }

    pub fn upper(&self) -> Option<f64> {
        self.0.upper
    }

    pub fn is_fixed(&self) -> bool {
        self.0.fixed.load(Ordering::Relaxed)
    }

    pub fn set_fixed(&self, fixed: bool) {
        self.0.fixed.store(fixed, Ordering::Relaxed);
    }

    /// Updates the value; rejects values outside the bounds.
    ///
    /// Must not be called while a bulk evaluation holds a [`FreezeGuard`] on
    /// this parameter (checked in debug builds).
    pub fn set_value(&self, value: f64) -> Result<(), ParamError> {
        debug_assert_eq!(
            self.0.frozen.load(Ordering::Acquire),
            0,
            "parameter `{}` mutated during a bulk evaluation",
            self.0.name
        );
        check_value(&self.0.name, value, self.0.lower, self.0.upper)?;
        self.0.value.store(value.to_bits(), Ordering::Relaxed);
        Ok(())
    }

    pub fn set_step(&self, step: f64) -> Result<(), ParamError> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(ParamError::InvalidStep {
                name: self.0.name.clone(),
                step,
            });
        }
        self.0.step.store(step.to_bits(), Ordering::Relaxed);
        Ok(())
    }

    /// Whether two handles refer to the same parameter.
    pub fn same_as(&self, other: &Parameter) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

fn check_value(
    name: &str,
    value: f64,
    lower: Option<f64>,
    upper: Option<f64>,
) -> Result<(), ParamError> {
    if !value.is_finite() {
        return Err(ParamError::NonFinite {
            name: name.to_string(),
            value,
        });
    }
    let lo = lower.unwrap_or(f64::NEG_INFINITY);
    let hi = upper.unwrap_or(f64::INFINITY);
    if value < lo || value > hi {
        return Err(ParamError::OutOfBounds {
            name: name.to_string(),
            value,
            lower: lo,
            upper: hi,
        });
    }
    Ok(())
}

pub(crate) fn is_identifier(name: &str) -> bool {
    !name.is_empty()
        && name
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

impl fmt::Debug for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Parameter")
            .field("name", &self.name())
            .field("value", &self.value())
            .field("step", &self.step())
            .field("lower", &self.lower())
            .field("upper", &self.upper())
            .field("fixed", &self.is_fixed())
            .finish()
    }
}

/// Ordered collection of parameters with unique names.
#[derive(Clone, Debug, Default)]
pub struct ParamSet {
    params: Vec<Parameter>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_params(params: impl IntoIterator<Item = Parameter>) -> Result<Self, ParamError> {
        let mut set = Self::new();
        for p in params {
            set.push(p)?;
        }
        Ok(set)
    }

    /// Appends `param`; a handle already present is ignored, a different
    /// parameter with a taken name is an error.
    pub fn push(&mut self, param: Parameter) -> Result<(), ParamError> {
        if let Some(existing) = self.params.iter().find(|p| p.name() == param.name()) {
            if existing.same_as(&param) {
                return Ok(());
            }
            return Err(ParamError::Duplicate(param.name().to_string()));
        }
        self.params.push(param);
        Ok(())
    }

    /// Concatenation with duplicates (same handle) dropped, first occurrence kept.
    pub fn merged(&self, other: &ParamSet) -> Result<ParamSet, ParamError> {
        let mut out = self.clone();
        for p in &other.params {
            out.push(p.clone())?;
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Parameter> {
        self.params.get(index)
    }

    pub fn by_name(&self, name: &str) -> Option<&Parameter> {
        self.params.iter().find(|p| p.name() == name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name() == name)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Parameter> {
        self.params.iter()
    }

    pub fn names(&self) -> Vec<String> {
        self.params.iter().map(|p| p.name().to_string()).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.params.iter().map(Parameter::value).collect()
    }

    pub fn set_value(&self, name: &str, value: f64) -> Result<(), ParamError> {
        self.by_name(name)
            .ok_or_else(|| ParamError::Unknown(name.to_string()))?
            .set_value(value)
    }

    pub fn set_values(&self, values: &[f64]) -> Result<(), ParamError> {
        if values.len() != self.params.len() {
            return Err(ParamError::Arity {
                expected: self.params.len(),
                got: values.len(),
            });
        }
        for (p, &v) in self.params.iter().zip(values) {
            p.set_value(v)?;
        }
        Ok(())
    }

    /// Marks every parameter as being read by a bulk evaluation until the guard drops.
    pub fn freeze(&self) -> FreezeGuard {
        for p in &self.params {
            p.0.frozen.fetch_add(1, Ordering::AcqRel);
        }
        FreezeGuard {
            params: self.params.clone(),
        }
    }
}

impl<'a> IntoIterator for &'a ParamSet {
    type Item = &'a Parameter;
    type IntoIter = std::slice::Iter<'a, Parameter>;
    fn into_iter(self) -> Self::IntoIter {
        self.params.iter()
    }
}

/// Releases the freeze taken by [`ParamSet::freeze`] on drop.
pub struct FreezeGuard {
    params: Vec<Parameter>,
}

impl Drop for FreezeGuard {
    fn drop(&mut self) {
        for p in &self.params {
            p.0.frozen.fetch_sub(1, Ordering::AcqRel);
        }
    }
}
