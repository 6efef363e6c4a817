//! Scalar arithmetic used for cost accounting.
//!
//! Grid distances are integers throughout the crate; everything derived from
//! them — link prices, separation sums, move deltas — is computed in a scalar
//! type chosen by the caller. [`CostScalar`] abstracts that choice:
//!
//! * `f64` is the working type for simulations (and the crate-root default),
//! * `f32` is available where memory or throughput matters more than slack,
//! * [`BigRational`] gives exact arithmetic for integer exponents, which the
//!   audit routines use to cross-check the floating-point path.
//!
//! Exact types use a zero improvement tolerance; floating types use a small
//! absolute threshold so that round-off never counts as an improving move.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

/// Arithmetic required of a cost scalar.
///
/// The exponent of the link-price term `beta * dist^alpha` lives in an
/// associated type because floating scalars accept any real exponent while
/// exact rationals require a non-negative integer one.
pub trait CostScalar:
    Clone
    + Debug
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + Send
    + Sync
    + 'static
{
    /// Representation of the distance exponent alpha.
    type Exponent: Copy + Debug + PartialEq + Send + Sync + 'static;

    /// Whether sums in this scalar are exact (no rounding). Exact scalars may
    /// use reassociating accumulation strategies without loss.
    const IS_EXACT: bool;

    /// Embed an exact count or distance.
    fn from_count(c: u64) -> Self;

    /// Convert a configuration value (beta, a weight). `None` when the value
    /// is not representable (non-finite input, for instance).
    fn from_config(x: f64) -> Option<Self>;

    /// Convert an `f64` exponent. `None` when this scalar cannot honor it
    /// (rationals require a non-negative integer).
    fn exponent_from_f64(x: f64) -> Option<Self::Exponent>;

    /// Report the exponent as `f64` (for logs and reports).
    fn exponent_to_f64(e: Self::Exponent) -> f64;

    /// `dist^alpha` for a grid distance `dist >= 1`.
    fn distance_pow(dist: u64, alpha: Self::Exponent) -> Self;

    /// Strict-improvement threshold: a move is improving iff its delta is
    /// below `-tolerance()`.
    fn tolerance() -> Self;

    /// Lossy view for reporting.
    fn to_f64(&self) -> f64;
}

/// Total-order comparison helper; cost values are always comparable because
/// parameters are validated finite on construction.
pub(crate) fn cmp<T: CostScalar>(a: &T, b: &T) -> Ordering {
    a.partial_cmp(b).expect("cost values must be comparable")
}

/// `a < b` under [`cmp`].
pub(crate) fn lt<T: CostScalar>(a: &T, b: &T) -> bool {
    cmp(a, b) == Ordering::Less
}

// ─── floating-point scalars ─────────────────────────────────────────────────

/// Integer exponents are evaluated with `powi`, which is exact for integer
/// bases well past every grid size this crate accepts; anything else goes
/// through `powf`.
fn f64_pow(dist: u64, alpha: f64) -> f64 {
    let base = dist as f64;
    if alpha.fract() == 0.0 && alpha.abs() <= 64.0 {
        base.powi(alpha as i32)
    } else {
        base.powf(alpha)
    }
}

impl CostScalar for f64 {
    type Exponent = f64;
    const IS_EXACT: bool = false;

    fn from_count(c: u64) -> Self {
        c as f64
    }

    fn from_config(x: f64) -> Option<Self> {
        x.is_finite().then_some(x)
    }

    fn exponent_from_f64(x: f64) -> Option<f64> {
        x.is_finite().then_some(x)
    }

    fn exponent_to_f64(e: f64) -> f64 {
        e
    }

    fn distance_pow(dist: u64, alpha: f64) -> f64 {
        f64_pow(dist, alpha)
    }

    fn tolerance() -> f64 {
        1e-9
    }

    fn to_f64(&self) -> f64 {
        *self
    }
}

impl CostScalar for f32 {
    type Exponent = f32;
    const IS_EXACT: bool = false;

    fn from_count(c: u64) -> Self {
        c as f32
    }

    fn from_config(x: f64) -> Option<Self> {
        x.is_finite().then_some(x as f32)
    }

    fn exponent_from_f64(x: f64) -> Option<f32> {
        x.is_finite().then_some(x as f32)
    }

    fn exponent_to_f64(e: f32) -> f64 {
        e as f64
    }

    fn distance_pow(dist: u64, alpha: f32) -> f32 {
        if alpha.fract() == 0.0 && alpha.abs() <= 32.0 {
            (dist as f32).powi(alpha as i32)
        } else {
            (dist as f32).powf(alpha)
        }
    }

    fn tolerance() -> f32 {
        1e-4
    }

    fn to_f64(&self) -> f64 {
        *self as f64
    }
}

// ─── exact rationals ────────────────────────────────────────────────────────

impl CostScalar for BigRational {
    type Exponent = u32;
    const IS_EXACT: bool = true;

    fn from_count(c: u64) -> Self {
        BigRational::from_integer(BigInt::from(c))
    }

    fn from_config(x: f64) -> Option<Self> {
        // Every finite double is a dyadic rational; the conversion is exact.
        BigRational::from_float(x)
    }

    fn exponent_from_f64(x: f64) -> Option<u32> {
        if x.is_finite() && x >= 0.0 && x.fract() == 0.0 && x <= u32::MAX as f64 {
            Some(x as u32)
        } else {
            None
        }
    }

    fn exponent_to_f64(e: u32) -> f64 {
        e as f64
    }

    fn distance_pow(dist: u64, alpha: u32) -> Self {
        BigRational::from_integer(BigInt::from(dist).pow(alpha))
    }

    fn tolerance() -> Self {
        BigRational::zero()
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or_else(|| {
            // Fall back through a reduced estimate; only reachable for
            // magnitudes far outside anything the simulator produces.
            let n = self.numer().to_f64().unwrap_or(f64::MAX);
            let d = self.denom().to_f64().unwrap_or(1.0);
            n / d
        })
    }
}

/// Relative gap between an exact value and a floating approximation,
/// normalized by `max(1, |exact|)`.
pub fn relative_gap(exact: &BigRational, float: f64) -> f64 {
    let approx = BigRational::from_float(float).expect("finite float");
    let diff = (exact - &approx).abs();
    let scale = if exact.abs() > BigRational::one() {
        exact.abs()
    } else {
        BigRational::one()
    };
    ToPrimitive::to_f64(&(diff / scale)).unwrap_or(f64::INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_powers_are_exact() {
        assert_eq!(f64::distance_pow(4, 2.0), 16.0);
        assert_eq!(f64::distance_pow(8192, 4.0), 8192f64.powi(4));
        assert_eq!(f32::distance_pow(3, 2.0), 9.0);
    }

    #[test]
    fn fractional_exponent_falls_back_to_powf() {
        let v = f64::distance_pow(9, 0.5);
        assert!((v - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rational_exponent_requires_nonnegative_integer() {
        assert_eq!(BigRational::exponent_from_f64(3.0), Some(3));
        assert_eq!(BigRational::exponent_from_f64(0.5), None);
        assert_eq!(BigRational::exponent_from_f64(-1.0), None);
    }

    #[test]
    fn rational_config_conversion_is_exact() {
        let half = BigRational::from_config(0.5).unwrap();
        assert_eq!(half, BigRational::new(BigInt::from(1), BigInt::from(2)));
        assert!(BigRational::from_config(f64::NAN).is_none());
    }

    #[test]
    fn relative_gap_is_zero_for_exact_match() {
        let exact = BigRational::from_count(5);
        assert_eq!(relative_gap(&exact, 5.0), 0.0);
        assert!(relative_gap(&exact, 5.0 + 1e-3) > 1e-4);
    }
}
