//! Relativistic kinematics primitives.
//!
//! Four-vectors use the (+,−,−,−) metric and GeV throughout.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use thiserror::Error;

/// Relative tolerance on `e² − |p|²` below which a vector is still treated as on-shell.
pub const ON_SHELL_TOLERANCE: f64 = 1e-9;

/// Absolute slack on mass thresholds, absorbing rounding accumulated along decay chains.
pub const THRESHOLD_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KinematicsErrorKind {
    BelowThreshold,
    NonPhysical,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind:?}: {detail}")]
pub struct KinematicsError {
    pub kind: KinematicsErrorKind,
    pub detail: String,
}

impl KinematicsError {
    pub fn below_threshold(detail: impl Into<String>) -> Self {
        Self {
            kind: KinematicsErrorKind::BelowThreshold,
            detail: detail.into(),
        }
    }

    pub fn non_physical(detail: impl Into<String>) -> Self {
        Self {
            kind: KinematicsErrorKind::NonPhysical,
            detail: detail.into(),
        }
    }
}

/// Energy-momentum four-vector `(e, px, py, pz)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FourVector {
    pub e: f64,
    pub px: f64,
    pub py: f64,
    pub pz: f64,
}

impl FourVector {
    pub const fn new(e: f64, px: f64, py: f64, pz: f64) -> Self {
        Self { e, px, py, pz }
    }

    /// A particle of mass `m` at rest.
    pub const fn at_rest(m: f64) -> Self {
        Self::new(m, 0.0, 0.0, 0.0)
    }

    /// On-shell vector with mass `m` and three-momentum `p`.
    pub fn on_shell(m: f64, p: [f64; 3]) -> Self {
        let p2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
        Self::new((p2 + m * m).sqrt(), p[0], p[1], p[2])
    }

    pub fn p2(&self) -> f64 {
        self.px * self.px + self.py * self.py + self.pz * self.pz
    }

    pub fn p(&self) -> f64 {
        self.p2().sqrt()
    }

    /// Minkowski square `e² − |p|²`.
    pub fn m2(&self) -> f64 {
        self.e * self.e - self.p2()
    }

    pub fn momentum(&self) -> [f64; 3] {
        [self.px, self.py, self.pz]
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.e, self.px, self.py, self.pz]
    }
}

impl Add for FourVector {
    type Output = FourVector;
    fn add(self, rhs: FourVector) -> FourVector {
        FourVector::new(
            self.e + rhs.e,
            self.px + rhs.px,
            self.py + rhs.py,
            self.pz + rhs.pz,
        )
    }
}

impl Sub for FourVector {
    type Output = FourVector;
    fn sub(self, rhs: FourVector) -> FourVector {
        FourVector::new(
            self.e - rhs.e,
            self.px - rhs.px,
            self.py - rhs.py,
            self.pz - rhs.pz,
        )
    }
}

impl Neg for FourVector {
    type Output = FourVector;
    fn neg(self) -> FourVector {
        FourVector::new(-self.e, -self.px, -self.py, -self.pz)
    }
}

impl std::iter::Sum for FourVector {
    fn sum<I: Iterator<Item = FourVector>>(iter: I) -> FourVector {
        iter.fold(FourVector::default(), |acc, v| acc + v)
    }
}

impl fmt::Display for FourVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.e, self.px, self.py, self.pz)
    }
}

/// Invariant mass `sqrt(max(0, e² − |p|²))`.
///
/// Slightly space-like vectors within [`ON_SHELL_TOLERANCE`] of the light cone
/// are clamped to zero mass; anything further out is rejected.
pub fn invariant_mass(v: &FourVector) -> Result<f64, KinematicsError> {
    let m2 = v.m2();
    if m2 < -ON_SHELL_TOLERANCE * v.e * v.e || !m2.is_finite() {
        return Err(KinematicsError::non_physical(format!(
            "space-like four-vector {v} (m² = {m2})"
        )));
    }
    Ok(m2.max(0.0).sqrt())
}

/// Källén triangle function λ(x,y,z) = x²+y²+z²−2xy−2yz−2zx.
pub fn kallen(x: f64, y: f64, z: f64) -> f64 {
    x * x + y * y + z * z - 2.0 * x * y - 2.0 * y * z - 2.0 * z * x
}

/// Momentum of either daughter in the rest frame of a two-body decay `M → m1 m2`.
pub fn breakup_momentum(mother: f64, m1: f64, m2: f64) -> Result<f64, KinematicsError> {
    if !(mother > 0.0) {
        return Err(KinematicsError::non_physical(format!(
            "mother mass must be positive, got {mother}"
        )));
    }
    if mother < m1 + m2 - THRESHOLD_SLACK {
        return Err(KinematicsError::below_threshold(format!(
            "{mother} < {m1} + {m2}"
        )));
    }
    if mother <= m1 + m2 {
        return Ok(0.0);
    }
    // λ(M², m1², m2²) factorized; exact under m1 ↔ m2 and stable near threshold.
    let sum = m1 + m2;
    let diff = (m1 - m2).abs();
    let lambda = (mother - sum) * (mother + sum) * (mother - diff) * (mother + diff);
    Ok(lambda.max(0.0).sqrt() / (2.0 * mother))
}

/// Boosts `v`, given in the rest frame of `frame`, into the frame in which
/// `frame` has its stated four-momentum.
pub fn boost_into(v: &FourVector, frame: &FourVector) -> Result<FourVector, KinematicsError> {
    let m2 = frame.m2();
    if !(m2 > 0.0) || !(frame.e > 0.0) {
        return Err(KinematicsError::non_physical(format!(
            "cannot boost into light-like or space-like frame {frame}"
        )));
    }
    let mass = m2.sqrt();
    let p2 = frame.p2();
    if p2 == 0.0 {
        return Ok(*v);
    }
    // Frame components instead of β and γ: (γ−1)/|P|² = 1/(M(E+M)) avoids the
    // cancellation in γ−1 for slow frames.
    let pdot = frame.px * v.px + frame.py * v.py + frame.pz * v.pz;
    let e = (frame.e * v.e + pdot) / mass;
    let k = pdot / (mass * (frame.e + mass)) + v.e / mass;
    Ok(FourVector::new(
        e,
        v.px + k * frame.px,
        v.py + k * frame.py,
        v.pz + k * frame.pz,
    ))
}
