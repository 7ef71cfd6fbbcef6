//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point scalar the core is generic over (`f32` or `f64`).
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant into this scalar type.
    #[inline]
    fn c(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 constant representable")
    }

    /// Converts an integer count into this scalar type.
    #[inline]
    fn from_count(n: u64) -> Self {
        <Self as FromPrimitive>::from_u64(n).expect("count representable")
    }

    /// Lossy conversion back to `f64` for reporting.
    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Reduces an angle to the fundamental domain `[0, 1)`.
    #[inline]
    fn frac_angle(self) -> Self {
        let f = self - self.floor();
        // `x - floor(x)` can round up to exactly 1 for tiny negative x.
        if f >= Self::one() {
            Self::zero()
        } else {
            f
        }
    }

    /// Signed distance to the nearest integer, in `[-1/2, 1/2]`.
    #[inline]
    fn wrap_signed(self) -> Self {
        self - self.round()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Sum of a slice using pairwise (cascade) summation.
///
/// The error grows like `O(log n)` instead of `O(n)`, which matters for
/// logarithmic products over very long orbits.
pub fn pairwise_sum<T: Real>(xs: &[T]) -> T {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        return xs.iter().fold(T::zero(), |acc, &x| acc + x);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Error-free transformation `a + b = s + e` (Knuth's two-sum).
#[inline]
pub fn two_sum<T: Real>(a: T, b: T) -> (T, T) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// Error-free transformation `a * b = p + e` using a fused multiply-add.
#[inline]
pub fn two_prod<T: Real>(a: T, b: T) -> (T, T) {
    let p = a * b;
    let e = a.mul_add(b, -p);
    (p, e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frac_angle_stays_in_unit_interval() {
        assert_eq!(1.25f64.frac_angle(), 0.25);
        assert_eq!((-0.25f64).frac_angle(), 0.75);
        let tiny = -1e-300f64;
        let f = tiny.frac_angle();
        assert!((0.0..1.0).contains(&f));
    }

    #[test]
    fn wrap_signed_is_nearest_integer_offset() {
        assert!((0.9f64.wrap_signed() + 0.1).abs() < 1e-15);
        assert!((0.3f32.wrap_signed() - 0.3).abs() < 1e-7);
    }

    #[test]
    fn pairwise_sum_matches_exact_integer_sum() {
        let xs: Vec<f64> = (1..=10_000).map(|k| k as f64).collect();
        assert_eq!(pairwise_sum(&xs), 50_005_000.0);
    }

    #[test]
    fn two_prod_recovers_rounding_error() {
        let a = 1.0 + f64::EPSILON;
        let b = 1.0 - f64::EPSILON;
        let (p, e) = two_prod(a, b);
        // Exact product is 1 - eps^2.
        assert_eq!(p, 1.0);
        assert_eq!(e, -f64::EPSILON * f64::EPSILON);
        let (s, e) = two_sum(1.0f64, 1e-20);
        assert_eq!((s, e), (1.0, 1e-20));
    }
}
