//! Single-direction forward-mode differentiation.
//!
//! A [`Dual`] carries a primal value and its derivative along one seeded
//! parameter direction. Every gradient-carrying quantity in the crate is a
//! `Dual`; multi-directional gradients come from repeated seeded runs.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use crate::error::{Error, Result};

/// Primal value paired with one tangent.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dual {
    pub primal: f64,
    pub tangent: f64,
}

impl Dual {
    pub const ZERO: Dual = Dual { primal: 0.0, tangent: 0.0 };

    #[inline]
    pub const fn new(primal: f64, tangent: f64) -> Self {
        Dual { primal, tangent }
    }

    /// A value that does not depend on the seeded parameter.
    #[inline]
    pub const fn constant(primal: f64) -> Self {
        Dual { primal, tangent: 0.0 }
    }

    /// The seeded parameter itself (tangent exactly one).
    #[inline]
    pub const fn seeded(primal: f64) -> Self {
        Dual { primal, tangent: 1.0 }
    }

    #[inline]
    pub fn scale(self, k: f64) -> Self {
        Dual::new(self.primal * k, self.tangent * k)
    }

    pub fn exp(self) -> Self {
        let e = self.primal.exp();
        Dual::new(e, e * self.tangent)
    }

    pub fn is_finite(self) -> bool {
        self.primal.is_finite() && self.tangent.is_finite()
    }

    /// Exact solution of `x' = -x / tau` over `dt`. `tau` is not a
    /// differentiation target, so primal and tangent share one factor.
    pub fn exp_decay(self, dt: f64, tau: f64) -> Result<Self> {
        let factor = decay_factor(dt, tau)?;
        Ok(self.scale(factor))
    }
}

/// `exp(-dt / tau)` with argument checks.
pub fn decay_factor(dt: f64, tau: f64) -> Result<f64> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Config(format!("time constant must be positive, got {tau}")));
    }
    if !(dt >= 0.0) || !dt.is_finite() {
        return Err(Error::Config(format!("elapsed time must be non-negative, got {dt}")));
    }
    Ok((-dt / tau).exp())
}

impl fmt::Display for Dual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.primal, self.tangent)
    }
}

impl Add for Dual {
    type Output = Dual;
    #[inline]
    fn add(self, rhs: Dual) -> Dual {
        Dual::new(self.primal + rhs.primal, self.tangent + rhs.tangent)
    }
}

impl Sub for Dual {
    type Output = Dual;
    #[inline]
    fn sub(self, rhs: Dual) -> Dual {
        Dual::new(self.primal - rhs.primal, self.tangent - rhs.tangent)
    }
}

impl Mul for Dual {
    type Output = Dual;
    #[inline]
    fn mul(self, rhs: Dual) -> Dual {
        Dual::new(self.primal * rhs.primal, self.tangent * rhs.primal + self.primal * rhs.tangent)
    }
}

impl Mul<f64> for Dual {
    type Output = Dual;
    #[inline]
    fn mul(self, rhs: f64) -> Dual {
        self.scale(rhs)
    }
}

impl Neg for Dual {
    type Output = Dual;
    #[inline]
    fn neg(self) -> Dual {
        Dual::new(-self.primal, -self.tangent)
    }
}

impl AddAssign for Dual {
    #[inline]
    fn add_assign(&mut self, rhs: Dual) {
        *self = *self + rhs;
    }
}

impl SubAssign for Dual {
    #[inline]
    fn sub_assign(&mut self, rhs: Dual) {
        *self = *self - rhs;
    }
}

impl Sum for Dual {
    fn sum<I: Iterator<Item = Dual>>(iter: I) -> Dual {
        iter.fold(Dual::ZERO, Add::add)
    }
}

impl From<f64> for Dual {
    fn from(x: f64) -> Self {
        Dual::constant(x)
    }
}

/// Scalar type the simulation kernels are generic over.
///
/// `f64` runs primal-only inference; [`Dual`] carries one tangent. Code that
/// exists only to propagate tangents is guarded by [`Scalar::TRACKS_TANGENT`]
/// so the primal instantiation compiles it away.
pub trait Scalar:
    Copy
    + fmt::Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Mul<f64, Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + Send
    + Sync
    + 'static
{
    const TRACKS_TANGENT: bool;

    fn from_parts(primal: f64, tangent: f64) -> Self;
    fn primal(self) -> f64;
    fn tangent(self) -> f64;

    #[inline]
    fn constant(primal: f64) -> Self {
        Self::from_parts(primal, 0.0)
    }

    #[inline]
    fn lift(d: Dual) -> Self {
        Self::from_parts(d.primal, d.tangent)
    }

    #[inline]
    fn to_dual(self) -> Dual {
        Dual::new(self.primal(), self.tangent())
    }
}

impl Scalar for f64 {
    const TRACKS_TANGENT: bool = false;

    #[inline]
    fn from_parts(primal: f64, _tangent: f64) -> Self {
        primal
    }
    #[inline]
    fn primal(self) -> f64 {
        self
    }
    #[inline]
    fn tangent(self) -> f64 {
        0.0
    }
}

impl Scalar for Dual {
    const TRACKS_TANGENT: bool = true;

    #[inline]
    fn from_parts(primal: f64, tangent: f64) -> Self {
        Dual::new(primal, tangent)
    }
    #[inline]
    fn primal(self) -> f64 {
        self.primal
    }
    #[inline]
    fn tangent(self) -> f64 {
        self.tangent
    }
}
