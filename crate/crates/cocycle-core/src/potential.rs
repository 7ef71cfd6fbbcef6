//! Circle potentials `v: 𝕋 → ℝ` with first and second derivatives.

use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::scalar::Real;

/// A `C²` function on the circle together with its derivatives.
pub trait Potential<T: Real>: Send + Sync + Debug {
    /// Returns `(v(θ), v′(θ), v″(θ))`.
    fn eval(&self, theta: T) -> (T, T, T);

    /// Returns `v(θ)`.
    fn value(&self, theta: T) -> T {
        self.eval(theta).0
    }
}

/// `v(θ) = a·cos(2πθ)`.
#[derive(Debug, Clone, Copy)]
pub struct Cosine<T> {
    pub amplitude: T,
}

impl<T: Real> Potential<T> for Cosine<T> {
    fn eval(&self, theta: T) -> (T, T, T) {
        let tau = T::TAU();
        let (s, c) = (tau * theta).sin_cos();
        let a = self.amplitude;
        (a * c, -a * tau * s, -a * tau * tau * c)
    }
}

/// A constant potential; used for degenerate reference checks.
#[derive(Debug, Clone, Copy)]
pub struct Constant<T> {
    pub value: T,
}

impl<T: Real> Potential<T> for Constant<T> {
    fn eval(&self, _theta: T) -> (T, T, T) {
        (self.value, T::zero(), T::zero())
    }
}

/// Periodic cubic spline through samples `v(i/n)`, `i = 0..n`; globally `C²`.
#[derive(Debug, Clone)]
pub struct PeriodicSpline<T> {
    values: Vec<T>,
    /// Second derivatives at the nodes.
    moments: Vec<T>,
}

impl<T: Real> PeriodicSpline<T> {
    /// Interpolates `n ≥ 4` equally spaced samples on `[0, 1)`.
    pub fn from_samples(values: Vec<T>) -> Result<Self> {
        let n = values.len();
        if n < 4 {
            return Err(LabError::InvalidPotential { reason: format!("need at least 4 samples, got {n}") });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LabError::InvalidPotential { reason: "non-finite sample".into() });
        }
        let h = T::one() / T::from_count(n as u64);
        let six = T::c(6.0);
        let rhs: Vec<T> = (0..n)
            .map(|i| six / (h * h) * (values[(i + 1) % n] - values[i] - values[i] + values[(i + n - 1) % n]))
            .collect();
        // Cyclic system M_{i-1} + 4 M_i + M_{i+1} = rhs_i; strictly diagonally
        // dominant, so Gauss–Seidel contracts by at least 1/2 per sweep.
        let mut m = vec![T::zero(); n];
        let four = T::c(4.0);
        let scale = rhs.iter().fold(T::zero(), |a, r| a.max(r.abs())).max(T::one());
        for _ in 0..200 {
            let mut change = T::zero();
            for i in 0..n {
                let new = (rhs[i] - m[(i + n - 1) % n] - m[(i + 1) % n]) / four;
                change = change.max((new - m[i]).abs());
                m[i] = new;
            }
            if change <= T::epsilon() * scale {
                break;
            }
        }
        Ok(Self { values, moments: m })
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Whether the spline has no nodes (never true for a constructed spline).
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl<T: Real> Potential<T> for PeriodicSpline<T> {
    fn eval(&self, theta: T) -> (T, T, T) {
        let n = self.values.len();
        let nt = T::from_count(n as u64);
        let x = theta.frac_angle() * nt;
        let i = x.floor().to_usize().unwrap_or(0).min(n - 1);
        let t = x - T::from_count(i as u64);
        let j = (i + 1) % n;
        let h = nt.recip();
        let (a, b) = (T::one() - t, t);
        let (yi, yj, mi, mj) = (self.values[i], self.values[j], self.moments[i], self.moments[j]);
        let six = T::c(6.0);
        let three = T::c(3.0);
        let v = a * yi + b * yj + ((a * a * a - a) * mi + (b * b * b - b) * mj) * h * h / six;
        let d1 = (yj - yi) / h - (three * a * a - T::one()) / six * h * mi + (three * b * b - T::one()) / six * h * mj;
        let d2 = a * mi + b * mj;
        (v, d1, d2)
    }
}

/// How the potential was specified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    BuiltinCosine,
    TabulatedPeriodicC2,
    Constant,
}

/// A validated potential with a unique non-degenerate minimum.
#[derive(Debug, Clone)]
pub struct PotentialSpec<T> {
    pub kind: PotentialKind,
    func: Arc<dyn Potential<T>>,
    /// Location of the unique minimum.
    pub theta_min: T,
    /// Minimum value.
    pub v_min: T,
    /// Maximum value (over the probe grid).
    pub v_max: T,
    /// `v″(theta_min)`.
    pub v2_min: T,
}

/// Number of probe points used to locate and validate the minimum.
const PROBE_POINTS: usize = 4096;

impl<T: Real> PotentialSpec<T> {
    /// `v(θ) = cos(2πθ)`, minimum at `θ = 1/2`.
    pub fn cosine() -> Self {
        Self::new(PotentialKind::BuiltinCosine, Arc::new(Cosine { amplitude: T::one() })).expect("cosine is valid")
    }

    /// Constant potential. It has no unique minimum; `theta_min` is set to 0
    /// and no validation is performed.
    pub fn constant(value: T) -> Self {
        Self {
            kind: PotentialKind::Constant,
            func: Arc::new(Constant { value }),
            theta_min: T::zero(),
            v_min: value,
            v_max: value,
            v2_min: T::zero(),
        }
    }

    /// Spline through equally spaced samples.
    pub fn tabulated(samples: Vec<T>) -> Result<Self> {
        Self::new(PotentialKind::TabulatedPeriodicC2, Arc::new(PeriodicSpline::from_samples(samples)?))
    }

    /// Validates `func` and locates its minimum.
    pub fn new(kind: PotentialKind, func: Arc<dyn Potential<T>>) -> Result<Self> {
        let n = PROBE_POINTS;
        let grid: Vec<T> = (0..n).map(|i| func.value(T::from_count(i as u64) / T::from_count(n as u64))).collect();
        if grid.iter().any(|v| !v.is_finite()) {
            return Err(LabError::InvalidPotential { reason: "non-finite value on probe grid".into() });
        }
        let (imin, &vmin_grid) = grid
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .expect("non-empty grid");
        let v_max = grid.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        let osc = v_max - vmin_grid;
        if osc <= T::zero() {
            return Err(LabError::InvalidPotential { reason: "potential is constant".into() });
        }
        // Any other discrete local minimum must be clearly higher.
        let tol = T::c(1e-6) * osc;
        for i in 0..n {
            let (l, r) = (grid[(i + n - 1) % n], grid[(i + 1) % n]);
            let dist = (i as isize - imin as isize).rem_euclid(n as isize).min((imin as isize - i as isize).rem_euclid(n as isize));
            if dist > 2 && grid[i] <= l && grid[i] <= r && grid[i] <= vmin_grid + tol {
                return Err(LabError::InvalidPotential {
                    reason: format!("minimum is not unique (second minimum near θ = {})", i as f64 / n as f64),
                });
            }
        }
        // Newton refinement on v′ starting from the grid minimiser, kept inside
        // the neighbouring grid cells.
        let h = T::one() / T::from_count(n as u64);
        let x0 = T::from_count(imin as u64) * h;
        let mut x = x0;
        for _ in 0..60 {
            let (_, d1, d2) = func.eval(x);
            if d2 <= T::zero() {
                break;
            }
            let next = x - d1 / d2;
            let next = next.max(x0 - h).min(x0 + h);
            if (next - x).abs() <= T::epsilon() {
                x = next;
                break;
            }
            x = next;
        }
        if func.value(x) > vmin_grid {
            x = x0;
        }
        let theta_min = x.frac_angle();
        let (v_min, _, v2_min) = func.eval(theta_min);
        if v2_min <= T::zero() {
            return Err(LabError::InvalidPotential { reason: format!("degenerate minimum: v″(θ_min) = {v2_min}") });
        }
        Ok(Self { kind, func, theta_min, v_min, v_max, v2_min })
    }

    /// `(v, v′, v″)` of the raw potential.
    #[inline]
    pub fn eval(&self, theta: T) -> (T, T, T) {
        self.func.eval(theta)
    }

    /// Oscillation `max v − min v`.
    pub fn oscillation(&self) -> T {
        self.v_max - self.v_min
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cosine_minimum_is_at_one_half() {
        let p = PotentialSpec::<f64>::cosine();
        assert_relative_eq!(p.theta_min, 0.5, epsilon = 1e-12);
        assert_relative_eq!(p.v_min, -1.0, epsilon = 1e-15);
        assert_relative_eq!(p.v2_min, 4.0 * std::f64::consts::PI.powi(2), epsilon = 1e-9);
        assert_relative_eq!(p.oscillation(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn cosine_derivatives_match_finite_differences() {
        let c = Cosine { amplitude: 1.0f64 };
        for &x in &[0.1, 0.37, 0.8] {
            let h = 1e-6;
            let fd1 = (c.value(x + h) - c.value(x - h)) / (2.0 * h);
            let fd2 = (c.eval(x + h).1 - c.eval(x - h).1) / (2.0 * h);
            assert_relative_eq!(c.eval(x).1, fd1, max_relative = 1e-8);
            assert_relative_eq!(c.eval(x).2, fd2, max_relative = 1e-8);
        }
    }

    #[test]
    fn spline_reproduces_smooth_function() {
        let n = 512;
        let samples: Vec<f64> = (0..n).map(|i| -(std::f64::consts::TAU * i as f64 / n as f64).cos()).collect();
        let s = PeriodicSpline::from_samples(samples).unwrap();
        let c = Cosine { amplitude: -1.0f64 };
        for k in 0..97 {
            let x = k as f64 / 97.0;
            let (a, b) = (s.eval(x), c.eval(x));
            assert!((a.0 - b.0).abs() < 1e-8);
            assert!((a.1 - b.1).abs() < 1e-4);
            assert!((a.2 - b.2).abs() < 1e-2 * 40.0);
        }
        let spec = PotentialSpec::tabulated((0..n).map(|i| -(std::f64::consts::TAU * i as f64 / n as f64).cos()).collect()).unwrap();
        assert!(spec.theta_min.min(1.0 - spec.theta_min) < 1e-6);
    }

    #[test]
    fn spline_is_continuous_in_second_derivative_at_nodes() {
        let samples = vec![0.0, 1.0, 3.0, 2.0, 0.5, 0.2];
        let s = PeriodicSpline::from_samples(samples).unwrap();
        for i in 0..6 {
            let x = i as f64 / 6.0;
            let (l, r) = (s.eval(x - 1e-12), s.eval(x + 1e-12));
            assert!((l.2 - r.2).abs() < 1e-6);
            assert!((l.1 - r.1).abs() < 1e-8);
        }
    }

    #[test]
    fn double_well_is_rejected() {
        let f = Cosine { amplitude: 1.0f64 };
        #[derive(Debug)]
        struct DoubleWell(Cosine<f64>);
        impl Potential<f64> for DoubleWell {
            fn eval(&self, t: f64) -> (f64, f64, f64) {
                let (v, d, dd) = self.0.eval(2.0 * t);
                (v, 2.0 * d, 4.0 * dd)
            }
        }
        let err = PotentialSpec::new(PotentialKind::TabulatedPeriodicC2, Arc::new(DoubleWell(f))).unwrap_err();
        assert!(matches!(err, LabError::InvalidPotential { .. }));
    }

    #[test]
    fn degenerate_minimum_is_rejected() {
        // Quartic bottom at θ = 0: v″ vanishes at the minimum.
        #[derive(Debug)]
        struct Flat;
        impl Potential<f64> for Flat {
            fn eval(&self, t: f64) -> (f64, f64, f64) {
                let x = (t + 0.5).rem_euclid(1.0) - 0.5;
                (x.powi(4), 4.0 * x.powi(3), 12.0 * x * x)
            }
        }
        assert!(PotentialSpec::new(PotentialKind::TabulatedPeriodicC2, Arc::new(Flat)).is_err());
    }
}
