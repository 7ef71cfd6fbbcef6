//! Arcs on the circle `𝕋 = ℝ/ℤ` and exact set algebra on finite unions of arcs.
//!
//! An [`ArcSet`] is stored as a sorted list of pairwise disjoint closed
//! intervals inside `[0, 1]`; an arc that wraps through `0` is split into two
//! pieces. Normalisation merges overlapping and touching pieces, so equal sets
//! have equal representations no matter how the union was assembled. With the
//! [`BigRational`] coordinate every endpoint computation is exact.

use std::cmp::Ordering;
use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// A closed arc described by its centre and half-length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleArc<T> {
    /// Centre angle, reduced to `[0, 1)`.
    pub center: T,
    /// Half of the arc length; non-negative.
    pub half_length: T,
}

impl<T: Real> CircleArc<T> {
    /// Creates an arc, reducing the centre mod 1.
    pub fn new(center: T, half_length: T) -> Self {
        Self { center: center.frac_angle(), half_length: half_length.abs() }
    }

    /// Total length (capped at 1).
    pub fn length(&self) -> T {
        (self.half_length + self.half_length).min(T::one())
    }

    /// Whether `theta` lies in the arc (closed).
    pub fn contains(&self, theta: T) -> bool {
        (theta - self.center).wrap_signed().abs() <= self.half_length
    }

    /// The arc rotated by `shift`.
    pub fn shifted(&self, shift: T) -> Self {
        Self::new(self.center + shift, self.half_length)
    }
}

/// Coordinate type usable for arc endpoints.
pub trait ArcCoord: Clone + PartialOrd + Debug + Send + Sync {
    /// Additive identity.
    fn zero() -> Self;
    /// Multiplicative identity (one full turn).
    fn one() -> Self;
    /// Sum.
    fn add(&self, other: &Self) -> Self;
    /// Difference.
    fn sub(&self, other: &Self) -> Self;
    /// Largest integer not above `self`.
    fn floor(&self) -> Self;
    /// Conversion from a double; exact for rational coordinates.
    fn from_f64(x: f64) -> Self;
    /// Nearest double.
    fn to_f64(&self) -> f64;
}

macro_rules! float_coord {
    ($t:ty) => {
        impl ArcCoord for $t {
            fn zero() -> Self {
                0.0
            }
            fn one() -> Self {
                1.0
            }
            fn add(&self, other: &Self) -> Self {
                self + other
            }
            fn sub(&self, other: &Self) -> Self {
                self - other
            }
            fn floor(&self) -> Self {
                <$t>::floor(*self)
            }
            fn from_f64(x: f64) -> Self {
                x as $t
            }
            fn to_f64(&self) -> f64 {
                *self as f64
            }
        }
    };
}
float_coord!(f32);
float_coord!(f64);

impl ArcCoord for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn floor(&self) -> Self {
        BigRational::floor(self)
    }
    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).unwrap_or_else(|| BigRational::from_integer(BigInt::zero()))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// Finite union of closed arcs, kept normalised.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcSet<C> {
    pieces: Vec<(C, C)>,
}

fn cmp<C: PartialOrd>(a: &C, b: &C) -> Ordering {
    a.partial_cmp(b).unwrap_or(Ordering::Equal)
}

impl<C: ArcCoord> ArcSet<C> {
    /// The empty set.
    pub fn empty() -> Self {
        Self { pieces: Vec::new() }
    }

    /// The whole circle.
    pub fn full() -> Self {
        Self { pieces: vec![(C::zero(), C::one())] }
    }

    /// Arc starting at `start` (any real) with the given length.
    pub fn from_start_length(start: C, length: C) -> Self {
        if length >= C::one() {
            return Self::full();
        }
        if length < C::zero() {
            return Self::empty();
        }
        let s = start.sub(&start.floor());
        let e = s.add(&length);
        if e <= C::one() {
            Self { pieces: vec![(s, e)] }
        } else {
            let wrapped = e.sub(&C::one());
            Self { pieces: vec![(C::zero(), wrapped), (s, C::one())] }
        }
    }

    /// Arc with the given centre and half-length.
    pub fn from_center(center: C, half_length: C) -> Self {
        let start = center.sub(&half_length);
        let length = half_length.add(&half_length);
        Self::from_start_length(start, length)
    }

    /// Builds a set from a floating arc, converting endpoints exactly.
    pub fn from_arc<T: Real>(arc: &CircleArc<T>) -> Self {
        Self::from_center(C::from_f64(arc.center.f64()), C::from_f64(arc.half_length.f64()))
    }

    /// Builds the union of many sets.
    pub fn union_all<I: IntoIterator<Item = Self>>(sets: I) -> Self {
        let mut pieces = Vec::new();
        for s in sets {
            pieces.extend(s.pieces);
        }
        Self::normalized(pieces)
    }

    fn normalized(mut pieces: Vec<(C, C)>) -> Self {
        pieces.retain(|(a, b)| a <= b);
        pieces.sort_by(|x, y| cmp(&x.0, &y.0).then(cmp(&x.1, &y.1)));
        let mut out: Vec<(C, C)> = Vec::with_capacity(pieces.len());
        for (a, b) in pieces {
            if let Some(last) = out.last_mut() {
                if a <= last.1 {
                    if b > last.1 {
                        last.1 = b;
                    }
                    continue;
                }
            }
            out.push((a, b));
        }
        Self { pieces: out }
    }

    /// Sorted disjoint pieces in `[0, 1]`.
    pub fn pieces(&self) -> &[(C, C)] {
        &self.pieces
    }

    /// Whether the set is empty.
    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// Whether the set is the whole circle.
    pub fn is_full(&self) -> bool {
        self.pieces.len() == 1 && self.pieces[0].0 <= C::zero() && self.pieces[0].1 >= C::one()
    }

    /// Union of two sets.
    pub fn union(&self, other: &Self) -> Self {
        let mut pieces = self.pieces.clone();
        pieces.extend(other.pieces.iter().cloned());
        Self::normalized(pieces)
    }

    /// Intersection of two sets.
    pub fn intersection(&self, other: &Self) -> Self {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.pieces.len() && j < other.pieces.len() {
            let (a0, a1) = &self.pieces[i];
            let (b0, b1) = &other.pieces[j];
            let lo = if a0 > b0 { a0.clone() } else { b0.clone() };
            let hi = if a1 < b1 { a1.clone() } else { b1.clone() };
            if lo <= hi {
                out.push((lo, hi));
            }
            if a1 < b1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self::normalized(out)
    }

    /// Closure of the complement `𝕋 ∖ self`.
    pub fn complement(&self) -> Self {
        if self.pieces.is_empty() {
            return Self::full();
        }
        let mut out = Vec::new();
        let mut cursor = C::zero();
        for (a, b) in &self.pieces {
            if *a > cursor {
                out.push((cursor.clone(), a.clone()));
            }
            cursor = b.clone();
        }
        if cursor < C::one() {
            out.push((cursor, C::one()));
        }
        Self::normalized(out)
    }

    /// Whether every point of `self` lies in `other`.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.pieces.iter().all(|(a, b)| other.pieces.iter().any(|(c, d)| c <= a && b <= d))
    }

    /// Whether the two sets have no interior overlap (touching endpoints are
    /// allowed, as for closures of disjoint open sets).
    pub fn is_interior_disjoint(&self, other: &Self) -> bool {
        self.intersection(other).pieces.iter().all(|(a, b)| a >= b)
    }

    /// Whether the two closed sets share no point at all.
    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.intersection(other).is_empty()
    }

    /// Lebesgue measure.
    pub fn measure(&self) -> C {
        self.pieces.iter().fold(C::zero(), |acc, (a, b)| acc.add(&b.sub(a)))
    }

    /// Whether the point (given in `[0, 1)`) lies in the set.
    pub fn contains_point(&self, x: &C) -> bool {
        self.pieces.iter().any(|(a, b)| a <= x && x <= b)
    }
}

/// Exact arc-set type used by the ladder bookkeeping.
pub type ExactArcSet = ArcSet<BigRational>;

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn wrapping_arc_splits_into_two_pieces() {
        let s = ExactArcSet::from_center(q(0, 1), q(1, 10));
        assert_eq!(s.pieces(), &[(q(0, 1), q(1, 10)), (q(9, 10), q(1, 1))]);
        assert_eq!(s.measure(), q(1, 5));
    }

    #[test]
    fn complement_of_union_covers_circle() {
        let a = ExactArcSet::from_center(q(1, 4), q(1, 20));
        let b = ExactArcSet::from_center(q(0, 1), q(1, 8));
        let u = a.union(&b);
        let c = u.complement();
        assert!(u.union(&c).is_full());
        assert_eq!(u.measure().add(&c.measure()), q(1, 1));
        assert!(u.is_interior_disjoint(&c));
    }

    #[test]
    fn subset_and_disjointness() {
        let big = ExactArcSet::from_center(q(1, 2), q(1, 4));
        let small = ExactArcSet::from_center(q(1, 2), q(1, 100));
        assert!(small.is_subset_of(&big));
        assert!(!big.is_subset_of(&small));
        let far = ExactArcSet::from_center(q(0, 1), q(1, 100));
        assert!(far.is_disjoint(&big));
    }

    #[test]
    fn long_arc_is_full_circle() {
        assert!(ArcSet::<f64>::from_center(0.3, 0.6).is_full());
        assert!(ArcSet::<f64>::empty().complement().is_full());
    }

    #[test]
    fn circle_arc_contains_across_zero() {
        let arc = CircleArc::new(0.99f64, 0.02);
        assert!(arc.contains(0.005));
        assert!(!arc.contains(0.5));
        assert!((arc.shifted(0.02).center - 0.01).abs() < 1e-12);
    }
}
