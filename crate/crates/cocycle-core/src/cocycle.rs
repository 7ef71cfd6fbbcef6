//! The Schrödinger cocycle `A_E(θ) = [[0, 1], [−1, λ²v(θ) − E]]` and its
//! projective dynamics in the chart `(1, r)`:
//! `Φ_E(θ, r) = (θ + ω, λ²v(θ) − E − 1/r)`.

use serde::{Deserialize, Serialize};

use crate::arcs::CircleArc;
use crate::error::{LabError, Result};
use crate::potential::PotentialSpec;
use crate::rotation::RotationNumber;
use crate::scalar::{pairwise_sum, Real};

/// How the raw potential is shifted before use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Work with `w(θ) = v(θ + θ_min) − v_min`: minimum `0` at `θ = 0`.
    /// Energies are then measured relative to `λ²·v_min`.
    MinAtZero,
    /// Use the raw potential unchanged.
    Raw,
}

/// One cocycle instance `(λ², E, ω, v)`.
#[derive(Debug, Clone)]
pub struct CocycleParams<T> {
    /// Coupling `λ²`.
    pub lambda_sq: T,
    /// Energy `E` (in the normalised frame when normalisation is active).
    pub energy: T,
    pub rotation: RotationNumber<T>,
    pub potential: PotentialSpec<T>,
    pub normalization: Normalization,
    theta_shift: T,
    value_shift: T,
}

impl<T: Real> CocycleParams<T> {
    /// Validates and assembles a parameter bundle.
    pub fn new(
        lambda_sq: T,
        energy: T,
        rotation: RotationNumber<T>,
        potential: PotentialSpec<T>,
        normalization: Normalization,
    ) -> Result<Self> {
        if !(lambda_sq > T::zero()) || !lambda_sq.is_finite() {
            return Err(LabError::invalid(format!("λ² must be positive and finite, got {lambda_sq}")));
        }
        if !energy.is_finite() {
            return Err(LabError::invalid("energy must be finite"));
        }
        let (theta_shift, value_shift) = match normalization {
            Normalization::MinAtZero => (potential.theta_min, potential.v_min),
            Normalization::Raw => (T::zero(), T::zero()),
        };
        Ok(Self { lambda_sq, energy, rotation, potential, normalization, theta_shift, value_shift })
    }

    /// Reference instance: `v = cos(2πθ)`, `ω = (√5 − 1)/4`, normalised, given `λ²` and `E`.
    pub fn reference(lambda_sq: T, energy: T) -> Self {
        Self::new(lambda_sq, energy, RotationNumber::reference(), PotentialSpec::cosine(), Normalization::MinAtZero)
            .expect("reference parameters are valid")
    }

    /// Same cocycle at another energy.
    pub fn with_energy(&self, energy: T) -> Self {
        let mut p = self.clone();
        p.energy = energy;
        p
    }

    /// `λ`.
    pub fn lambda(&self) -> T {
        self.lambda_sq.sqrt()
    }

    /// Working potential and derivatives `(w, w′, w″)` at `θ`.
    #[inline]
    pub fn working_potential(&self, theta: T) -> (T, T, T) {
        let (v, d1, d2) = self.potential.eval(theta + self.theta_shift);
        (v - self.value_shift, d1, d2)
    }

    /// Oscillation of the working potential.
    pub fn oscillation(&self) -> T {
        self.potential.oscillation()
    }

    /// Converts a normalised energy back to the raw-potential frame.
    pub fn raw_energy(&self, energy: T) -> T {
        energy + self.lambda_sq * self.value_shift
    }

    /// The band parameter `λ_B` used for `B = [λ_B^{−2}, λ_B²]`.
    ///
    /// The band `[λ^{−2}, λ²]` is forward invariant only if `λ² osc(v) + |E|`
    /// stays below `λ²`, which fails for potentials whose oscillation exceeds
    /// one (the cosine has oscillation 2). The band is therefore built from
    /// `λ_B² = λ² · max(1, osc v) · (1 + 1/λ)`, which restores invariance for
    /// `|E| ≤ λ` while reducing to `λ²(1 + 1/λ)` when `osc v ≤ 1`.
    pub fn band_lambda(&self) -> T {
        let lam = self.lambda();
        let osc = self.oscillation().max(T::one());
        (self.lambda_sq * osc * (T::one() + lam.recip())).sqrt()
    }

    /// Regions `B`, `B^u`, `B^s` for this coupling.
    pub fn bands(&self) -> Bands<T> {
        Bands { lambda: self.band_lambda() }
    }

    /// Critical arc `I₀ ⊇ {θ : λ² w(θ) ≤ 10 λ_B}` centred at the minimum.
    pub fn critical_arc(&self) -> CriticalArc<T> {
        critical_arc(self, T::c(10.0) * self.band_lambda() / self.lambda_sq)
    }
}

/// Regions of the fibre `ℝ`: `B = [λ^{−2}, λ²]`, `B^u = [λ, λ²]`, `B^s = [λ^{−2}, λ^{−1}]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bands<T> {
    pub lambda: T,
}

impl<T: Real> Bands<T> {
    /// `B`.
    pub fn b(&self) -> (T, T) {
        (self.lambda.powi(-2), self.lambda.powi(2))
    }
    /// `B^u`.
    pub fn bu(&self) -> (T, T) {
        (self.lambda, self.lambda.powi(2))
    }
    /// `B^s`.
    pub fn bs(&self) -> (T, T) {
        (self.lambda.powi(-2), self.lambda.recip())
    }
    pub fn in_b(&self, r: T) -> bool {
        let (a, b) = self.b();
        a <= r && r <= b
    }
    pub fn in_bu(&self, r: T) -> bool {
        let (a, b) = self.bu();
        a <= r && r <= b
    }
    pub fn in_bs(&self, r: T) -> bool {
        let (a, b) = self.bs();
        a <= r && r <= b
    }
}

/// The critical arc `I₀ = {|θ| ≤ c₀/(2√λ)}` (in the normalised frame).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalArc<T> {
    /// `c₀` such that `|I₀| = c₀/√λ`.
    pub c0: T,
    pub arc: CircleArc<T>,
    /// Set when the threshold exceeds `max w`, so `I₀` is the whole circle.
    pub whole_circle: bool,
}

fn critical_arc<T: Real>(p: &CocycleParams<T>, threshold: T) -> CriticalArc<T> {
    let sqrt_lam = p.lambda().sqrt();
    let half = T::c(0.5);
    let w = |t: T| p.working_potential(t).0;
    // Walk outwards from the minimum on each side until w exceeds the
    // threshold, then bisect the crossing.
    let crossing = |sign: T| -> Option<T> {
        let n = 4096u64;
        let h = half / T::from_count(n);
        let mut prev = T::zero();
        for i in 1..=n {
            let x = h * T::from_count(i);
            if w(sign * x) >= threshold {
                let (mut lo, mut hi) = (prev, x);
                for _ in 0..200 {
                    let mid = (lo + hi) * half;
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if w(sign * mid) >= threshold {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return Some(hi);
            }
            prev = x;
        }
        None
    };
    match (crossing(T::one()), crossing(-T::one())) {
        (Some(r), Some(l)) => {
            let h = r.max(l);
            CriticalArc { c0: T::c(2.0) * h * sqrt_lam, arc: CircleArc::new(T::zero(), h), whole_circle: false }
        }
        _ => CriticalArc { c0: sqrt_lam, arc: CircleArc::new(T::zero(), half), whole_circle: true },
    }
}

/// A projective fibre map `r ↦ c(θ) − 1/r` over a circle rotation.
pub trait FibreMap<T: Real>: Sync {
    /// Rotation of the base.
    fn rotation(&self) -> &RotationNumber<T>;

    /// The diagonal coefficient `c(θ) = λ²v(θ) − E`.
    fn coefficient(&self, theta: T) -> T;

    /// `Φ_E` on the fibre over `θ`: `c(θ) − 1/r`.
    fn step(&self, theta: T, r: T) -> Result<T> {
        if r == T::zero() || !r.is_finite() {
            return Err(LabError::PoleHit { theta: theta.f64() });
        }
        Ok(self.coefficient(theta) - r.recip())
    }

    /// Exact inverse: the unique `r` with `step(θ, r) = r_next`.
    fn unstep(&self, theta: T, r_next: T) -> Result<T> {
        let den = self.coefficient(theta) - r_next;
        if den == T::zero() || !den.is_finite() {
            return Err(LabError::PoleHit { theta: theta.f64() });
        }
        Ok(den.recip())
    }
}

impl<T: Real> FibreMap<T> for CocycleParams<T> {
    fn rotation(&self) -> &RotationNumber<T> {
        &self.rotation
    }

    #[inline]
    fn coefficient(&self, theta: T) -> T {
        self.lambda_sq * self.working_potential(theta).0 - self.energy
    }
}

/// `fibre_step` as a free function.
pub fn fibre_step<T: Real>(theta: T, r: T, params: &CocycleParams<T>) -> Result<T> {
    params.step(theta, r)
}

/// `fibre_unstep` as a free function.
pub fn fibre_unstep<T: Real>(theta: T, r_next: T, params: &CocycleParams<T>) -> Result<T> {
    params.unstep(theta, r_next)
}

/// A fibre map that deviates from `inner` on one arc; used to validate that
/// the identity checks detect a broken map.
#[derive(Debug, Clone)]
pub struct FaultyFibreMap<M, T> {
    pub inner: M,
    pub fault_arc: CircleArc<T>,
    /// The faulty step returns `inner(θ, r) + magnitude · r`.
    pub magnitude: T,
}

impl<T: Real, M: FibreMap<T>> FibreMap<T> for FaultyFibreMap<M, T> {
    fn rotation(&self) -> &RotationNumber<T> {
        self.inner.rotation()
    }
    fn coefficient(&self, theta: T) -> T {
        self.inner.coefficient(theta)
    }
    fn step(&self, theta: T, r: T) -> Result<T> {
        let clean = self.inner.step(theta, r)?;
        if self.fault_arc.contains(theta) {
            Ok(clean + self.magnitude * r)
        } else {
            Ok(clean)
        }
    }
}

/// A forward projective orbit `(θ_k, r_k)`, `k = 0..=length`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectiveOrbit<T> {
    pub theta0: T,
    pub thetas: Vec<T>,
    pub r: Vec<T>,
    /// `log|r_k|`.
    pub log_terms: Vec<T>,
}

impl<T: Real> ProjectiveOrbit<T> {
    /// Iterates `length` forward steps from `(θ0, r0)`.
    pub fn forward<M: FibreMap<T> + ?Sized>(map: &M, theta0: T, r0: T, length: usize) -> Result<Self> {
        let mut thetas = Vec::with_capacity(length + 1);
        let mut r = Vec::with_capacity(length + 1);
        let mut theta = theta0.frac_angle();
        let mut x = r0;
        thetas.push(theta);
        r.push(x);
        for _ in 0..length {
            x = map.step(theta, x)?;
            theta = map.rotation().step(theta);
            thetas.push(theta);
            r.push(x);
        }
        let log_terms = r.iter().map(|v| v.abs().ln()).collect();
        Ok(Self { theta0: theta0.frac_angle(), thetas, r, log_terms })
    }

    /// Number of recorded steps (`r` has `length + 1` entries).
    pub fn len(&self) -> usize {
        self.r.len().saturating_sub(1)
    }

    /// Whether the orbit has no steps.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest defect `|r_{k+1} − Φ(θ_k, r_k)|`, relative to `max(1, |r_{k+1}|)`.
    pub fn replay_defect<M: FibreMap<T> + ?Sized>(&self, map: &M) -> Result<T> {
        let mut worst = T::zero();
        for k in 0..self.len() {
            let expect = map.step(self.thetas[k], self.r[k])?;
            let d = (self.r[k + 1] - expect).abs() / self.r[k + 1].abs().max(T::one());
            worst = worst.max(d);
        }
        Ok(worst)
    }

    /// Index of the first step at which the orbit leaves `[lo, hi]`, if any.
    pub fn first_exit(&self, lo: T, hi: T) -> Option<usize> {
        self.r.iter().position(|&x| !(lo <= x && x <= hi))
    }
}

fn check_aligned<T: Real>(a: &ProjectiveOrbit<T>, b: &ProjectiveOrbit<T>, j: usize, k: usize) -> Result<()> {
    if a.theta0 != b.theta0 {
        return Err(LabError::FibreMismatch { reason: format!("θ₀ differ: {} vs {}", a.theta0, b.theta0) });
    }
    if k >= a.r.len() || k >= b.r.len() {
        return Err(LabError::FibreMismatch { reason: format!("orbit shorter than k = {k}") });
    }
    if j > k + 1 {
        return Err(LabError::invalid(format!("need j ≤ k + 1, got j = {j}, k = {k}")));
    }
    Ok(())
}

/// `log D_{j,k}(r₀, s₀) = −Σ_{i=j}^{k} log(r_i s_i)` (magnitude; the product is
/// positive for orbits inside `B`). With this, `r_{k+1} − s_{k+1} = D_{j,k}·(r_j − s_j)`.
pub fn log_distance_product<T: Real>(r: &ProjectiveOrbit<T>, s: &ProjectiveOrbit<T>, j: usize, k: usize) -> Result<T> {
    check_aligned(r, s, j, k)?;
    if j > k {
        return Ok(T::zero());
    }
    let terms: Vec<T> = (j..=k).map(|i| -(r.log_terms[i] + s.log_terms[i])).collect();
    Ok(pairwise_sum(&terms))
}

/// `log Π_{j,k}(a₀, b₀) = Σ_{i=j}^{k} log(a_i/b_i)`; the empty product (`j = k + 1`) is 0.
pub fn log_distortion_product<T: Real>(a: &ProjectiveOrbit<T>, b: &ProjectiveOrbit<T>, j: usize, k: usize) -> Result<T> {
    check_aligned(a, b, j, k)?;
    if j > k {
        return Ok(T::zero());
    }
    let terms: Vec<T> = (j..=k).map(|i| a.log_terms[i] - b.log_terms[i]).collect();
    Ok(pairwise_sum(&terms))
}

/// `log ‖A_E^n(θ₀)‖` (operator norm), accumulated with renormalisation so that
/// products of any length neither overflow nor underflow. Negative `n` uses
/// `A^{−n}(θ) = A(θ − nω)^{−1} ⋯ A(θ − ω)^{−1}`.
pub fn log_cocycle_norm<T: Real, M: FibreMap<T> + ?Sized>(map: &M, theta0: T, n: i64) -> Result<T> {
    // Row-major 2×2 matrix.
    let mut m = [T::one(), T::zero(), T::zero(), T::one()];
    let mut log_scale = T::zero();
    let mut theta = theta0.frac_angle();
    let steps = n.unsigned_abs();
    let mut logs = Vec::new();
    for _ in 0..steps {
        let a = if n > 0 {
            let c = map.coefficient(theta);
            theta = map.rotation().step(theta);
            [T::zero(), T::one(), -T::one(), c]
        } else {
            theta = map.rotation().unstep(theta);
            let c = map.coefficient(theta);
            [c, -T::one(), T::one(), T::zero()]
        };
        m = [
            a[0] * m[0] + a[1] * m[2],
            a[0] * m[1] + a[1] * m[3],
            a[2] * m[0] + a[3] * m[2],
            a[2] * m[1] + a[3] * m[3],
        ];
        let s = m.iter().fold(T::zero(), |acc, x| acc.max(x.abs()));
        if !s.is_finite() || s == T::zero() {
            return Err(LabError::ScaleOverflow);
        }
        for x in m.iter_mut() {
            *x = *x / s;
        }
        logs.push(s.ln());
    }
    log_scale = log_scale + pairwise_sum(&logs);
    let frob = m.iter().fold(T::zero(), |acc, &x| acc + x * x);
    let det = m[0] * m[3] - m[1] * m[2];
    let half = frob / T::c(2.0);
    // σ_max² = f/2 + sqrt(f²/4 − det²).
    let disc = (half * half - det * det).max(T::zero()).sqrt();
    let sigma = (half + disc).sqrt();
    if !(sigma > T::zero()) || !sigma.is_finite() {
        return Err(LabError::ScaleOverflow);
    }
    Ok(log_scale + sigma.ln())
}

/// `‖A_E^n(θ₀)‖`; fails with [`LabError::ScaleOverflow`] if not representable.
pub fn matrix_cocycle_norm<T: Real, M: FibreMap<T> + ?Sized>(map: &M, theta0: T, n: i64) -> Result<T> {
    let l = log_cocycle_norm(map, theta0, n)?;
    let v = l.exp();
    if !v.is_finite() {
        return Err(LabError::ScaleOverflow);
    }
    Ok(v)
}

/// Birkhoff average `(1/n) Σ log section(θ_k)` along the rotation orbit of
/// `θ₀` after `burn_in` steps.
pub fn birkhoff_log_average<T: Real, F: Fn(T) -> T>(
    section: F,
    rotation: &RotationNumber<T>,
    theta0: T,
    n_samples: usize,
    burn_in: usize,
) -> Result<T> {
    if n_samples == 0 {
        return Err(LabError::invalid("n_samples must be positive"));
    }
    let mut theta = rotation.advance(theta0, burn_in as i64);
    let mut logs = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let v = section(theta);
        if !(v > T::zero()) {
            return Err(LabError::InvalidSection { theta: theta.f64(), value: v.f64() });
        }
        logs.push(v.ln());
        theta = rotation.step(theta);
    }
    Ok(pairwise_sum(&logs) / T::from_count(n_samples as u64))
}

/// Lyapunov exponent as the Birkhoff average of `log r_k` along the forward
/// orbit of a point `(θ₀, ψ₀)` of the unstable section. Forward iteration
/// keeps the orbit on the section, since the section attracts nearby fibres.
pub fn lyapunov_via_section<T: Real, M: FibreMap<T> + ?Sized>(
    map: &M,
    theta0: T,
    psi0: T,
    n_samples: usize,
    burn_in: usize,
) -> Result<T> {
    if n_samples == 0 {
        return Err(LabError::invalid("n_samples must be positive"));
    }
    let mut theta = theta0.frac_angle();
    let mut r = psi0;
    for _ in 0..burn_in {
        r = map.step(theta, r)?;
        theta = map.rotation().step(theta);
    }
    let mut logs = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        if !(r > T::zero()) {
            return Err(LabError::InvalidSection { theta: theta.f64(), value: r.f64() });
        }
        logs.push(r.ln());
        r = map.step(theta, r)?;
        theta = map.rotation().step(theta);
    }
    Ok(pairwise_sum(&logs) / T::from_count(n_samples as u64))
}

/// Forward orbit together with its θ-derivative `∂_θ r_k`, seeded with `∂_θ r_0`.
///
/// Uses `∂_θ r_{k+1} = λ² w′(θ_k) + ∂_θ r_k / r_k²`.
pub fn forward_with_theta_derivative<T: Real>(
    params: &CocycleParams<T>,
    theta0: T,
    r0: T,
    dr0: T,
    length: usize,
) -> Result<(ProjectiveOrbit<T>, Vec<T>)> {
    let orbit = ProjectiveOrbit::forward(params, theta0, r0, length)?;
    let mut dr = Vec::with_capacity(length + 1);
    dr.push(dr0);
    for k in 0..length {
        let (_, w1, _) = params.working_potential(orbit.thetas[k]);
        let rk = orbit.r[k];
        dr.push(params.lambda_sq * w1 + dr[k] / (rk * rk));
    }
    Ok((orbit, dr))
}

/// Terms of the derivative-difference formula along coupled orbits `r, s`:
///
/// `∂(r_{k+1} − s_{k+1}) = (r_{k+1} − s_{k+1})·[∂(r₀ − s₀)/(r₀ − s₀)]·Π_{0,k}(s, r) + R_{0,k}`,
/// `R_{0,k} = −(r_{k+1} − s_{k+1}) Σ_{j=0}^{k} Π_{j+1,k}(s, r) ∂s_j (1/r_j + 1/s_j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeDifference<T> {
    /// Directly propagated `∂r_{k+1} − ∂s_{k+1}`.
    pub direct: T,
    /// Dominant term.
    pub dominant: T,
    /// Remainder `R_{0,k}`.
    pub remainder: T,
    /// `max_{j ≤ k} |∂s_j|`.
    pub max_ds: T,
    /// `|r_{k+1} − s_{k+1}| Σ_j |Π_{j+1,k} ∂s_j (1/r_j + 1/s_j)|`: magnitude of the
    /// individual remainder contributions before cancellation.
    pub remainder_scale: T,
    /// `max(|∂r_{k+1}|, |∂s_{k+1}|)`; the directly propagated difference loses
    /// about `log10(magnitude/|direct|)` digits to cancellation.
    pub magnitude: T,
}

impl<T: Real> DerivativeDifference<T> {
    /// Relative mismatch between direct propagation and reconstruction.
    pub fn mismatch(&self) -> T {
        let scale = self.direct.abs().max(self.dominant.abs()).max(self.remainder_scale);
        if scale == T::zero() {
            T::zero()
        } else {
            (self.direct - self.dominant - self.remainder).abs() / scale
        }
    }

    /// Condition number of the directly propagated difference.
    pub fn cancellation(&self) -> T {
        if self.direct == T::zero() {
            T::infinity()
        } else {
            self.magnitude / self.direct.abs()
        }
    }
}

/// Reconstructs the derivative difference at step `k + 1` from stored products.
pub fn derivative_difference<T: Real>(
    r: &ProjectiveOrbit<T>,
    dr: &[T],
    s: &ProjectiveOrbit<T>,
    ds: &[T],
    k: usize,
) -> Result<DerivativeDifference<T>> {
    check_aligned(r, s, 0, k + 1)?;
    let d0 = r.r[0] - s.r[0];
    if d0 == T::zero() {
        return Err(LabError::invalid("coupled orbits coincide; the formula needs r₀ ≠ s₀"));
    }
    let dk1 = r.r[k + 1] - s.r[k + 1];
    let log_pi_0k = log_distortion_product(s, r, 0, k)?;
    let dominant = dk1 * (dr[0] - ds[0]) / d0 * log_pi_0k.exp();
    // Π_{j+1,k}(s, r) accumulated backwards from Π_{k+1,k} = 1.
    let mut log_pi = T::zero();
    let mut terms = Vec::with_capacity(k + 1);
    let mut max_ds = T::zero();
    for j in (0..=k).rev() {
        terms.push(log_pi.exp() * ds[j] * (r.r[j].recip() + s.r[j].recip()));
        log_pi = log_pi + s.log_terms[j] - r.log_terms[j];
        max_ds = max_ds.max(ds[j].abs());
    }
    let remainder = -dk1 * pairwise_sum(&terms);
    let abs_terms: Vec<T> = terms.iter().map(|t| t.abs()).collect();
    let remainder_scale = dk1.abs() * pairwise_sum(&abs_terms);
    Ok(DerivativeDifference { direct: dr[k + 1] - ds[k + 1], dominant, remainder, max_ds, remainder_scale, magnitude: dr[k + 1].abs().max(ds[k + 1].abs()) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn raw(lambda_sq: f64, e: f64, v: PotentialSpec<f64>) -> CocycleParams<f64> {
        CocycleParams::new(lambda_sq, e, RotationNumber::reference(), v, Normalization::Raw).unwrap()
    }

    #[test]
    fn fibre_step_examples() {
        let p = raw(1.0, 0.0, PotentialSpec::constant(0.0));
        assert_eq!(p.step(0.3, 1.0).unwrap(), -1.0);
        assert_eq!(p.unstep(0.3, -1.0).unwrap(), 1.0);
        let p = raw(30.0, -1.0, PotentialSpec::cosine());
        assert_relative_eq!(p.step(0.0, 1.0).unwrap(), 30.0, epsilon = 1e-12);
        assert_relative_eq!(p.unstep(0.0, 30.0).unwrap(), 1.0, epsilon = 1e-12);
        assert!(matches!(p.step(0.0, 0.0), Err(LabError::PoleHit { .. })));
        assert!(matches!(p.unstep(0.0, 31.0), Err(LabError::PoleHit { .. })));
    }

    #[test]
    fn normalised_potential_has_zero_minimum_at_origin() {
        let p = CocycleParams::<f64>::reference(30.0, -1.0);
        let (w, w1, w2) = p.working_potential(0.0);
        assert!(w.abs() < 1e-15 && w1.abs() < 1e-12);
        assert_relative_eq!(w2, 4.0 * std::f64::consts::PI.powi(2), max_relative = 1e-9);
        assert_relative_eq!(p.working_potential(0.5).0, 2.0, epsilon = 1e-12);
        assert_relative_eq!(p.raw_energy(-1.0), -31.0, epsilon = 1e-12);
    }

    #[test]
    fn matrix_norm_examples() {
        let p = raw(30.0, 0.0, PotentialSpec::cosine());
        assert_eq!(matrix_cocycle_norm(&p, 0.0, 0).unwrap(), 1.0);
        // Singular-value oracle for [[0, 1], [−1, 30]]: σ = (30 + √904)/2.
        let oracle = (30.0 + 904f64.sqrt()) / 2.0;
        assert_relative_eq!(matrix_cocycle_norm(&p, 0.0, 1).unwrap(), oracle, max_relative = 1e-14);
        assert!((oracle - 30.0333).abs() < 1e-4);
        // Inverse product of length one has the same norm.
        assert_relative_eq!(matrix_cocycle_norm(&p, 0.0 + p.rotation.omega, -1).unwrap(), oracle, max_relative = 1e-12);
    }

    #[test]
    fn long_products_do_not_overflow() {
        let p = CocycleParams::<f64>::reference(30.0, -2.0);
        let l = log_cocycle_norm(&p, 0.1, 100_000).unwrap();
        assert!(l.is_finite() && l > 1000.0);
        assert!(matches!(matrix_cocycle_norm(&p, 0.1, 100_000), Err(LabError::ScaleOverflow)));
    }

    #[test]
    fn distance_product_examples() {
        // r0 = 2, s0 = 1: r1 − s1 = 1/2.
        let p = raw(1.0, 0.0, PotentialSpec::constant(3.0));
        let r = ProjectiveOrbit::forward(&p, 0.0, 2.0, 1).unwrap();
        let s = ProjectiveOrbit::forward(&p, 0.0, 1.0, 1).unwrap();
        assert_relative_eq!(r.r[1] - s.r[1], 0.5, epsilon = 1e-15);
        let d = log_distance_product(&r, &s, 0, 0).unwrap().exp();
        assert_relative_eq!(d * (r.r[0] - s.r[0]), r.r[1] - s.r[1], epsilon = 1e-15);
        // Constant products r_i s_i = 4 over three steps give 1/64.
        let mk = |v: f64| ProjectiveOrbit { theta0: 0.0, thetas: vec![0.0; 3], r: vec![v; 3], log_terms: vec![v.ln(); 3] };
        let d = log_distance_product(&mk(2.0), &mk(2.0), 0, 2).unwrap().exp();
        assert_relative_eq!(d, 1.0 / 64.0, max_relative = 1e-15);
        let z = log_distortion_product(&mk(2.0), &mk(2.0), 0, 2).unwrap();
        assert_eq!(z, 0.0);
    }

    #[test]
    fn misaligned_orbits_are_rejected() {
        let p = CocycleParams::<f64>::reference(30.0, -2.0);
        let a = ProjectiveOrbit::forward(&p, 0.1, 5.0, 3).unwrap();
        let b = ProjectiveOrbit::forward(&p, 0.2, 5.0, 3).unwrap();
        assert!(matches!(log_distance_product(&a, &b, 0, 2), Err(LabError::FibreMismatch { .. })));
        assert!(matches!(log_distance_product(&a, &a, 0, 9), Err(LabError::FibreMismatch { .. })));
    }

    /// Fixed-point oracle with 2000 fractional bits: iterates both orbits with
    /// the same double-precision coefficients and returns `r_n − s_n`.
    fn high_precision_difference(p: &CocycleParams<f64>, theta0: f64, r0: f64, s0: f64, n: usize) -> f64 {
        use num_bigint::BigInt;
        use num_rational::BigRational;
        use num_traits::ToPrimitive;
        let one = BigInt::from(1) << 2000usize;
        let fix = |x: &BigRational| -> BigRational {
            BigRational::new((x * BigRational::from_integer(one.clone())).round().to_integer(), one.clone())
        };
        let mut r = BigRational::from_float(r0).unwrap();
        let mut s = BigRational::from_float(s0).unwrap();
        let mut theta = theta0;
        for _ in 0..n {
            let c = BigRational::from_float(p.coefficient(theta)).unwrap();
            r = fix(&(&c - r.recip()));
            s = fix(&(&c - s.recip()));
            theta = p.rotation.step(theta);
        }
        (r - s).to_f64().unwrap()
    }

    #[test]
    fn random_orbit_pair_distance_identity() {
        let p = CocycleParams::<f64>::reference(30.0, -2.0);
        let r = ProjectiveOrbit::forward(&p, 0.37, 20.0, 50).unwrap();
        let s = ProjectiveOrbit::forward(&p, 0.37, 19.0, 50).unwrap();
        let d = log_distance_product(&r, &s, 0, 49).unwrap().exp();
        let oracle = high_precision_difference(&p, 0.37, 20.0, 19.0, 50);
        assert!(oracle > 0.0);
        assert!((d * (r.r[0] - s.r[0]) - oracle).abs() <= 1e-12 * oracle, "{} vs {oracle}", d * (r.r[0] - s.r[0]));
        assert_eq!(r.replay_defect(&p).unwrap(), 0.0);
    }

    #[test]
    fn band_parameter_restores_invariance() {
        let p = CocycleParams::<f64>::reference(30.0, -1.0);
        let b = p.bands();
        // λ_B² = 30 · 2 · (1 + 1/√30).
        assert_relative_eq!(b.lambda.powi(2), 60.0 * (1.0 + 1.0 / 30f64.sqrt()), max_relative = 1e-12);
        let (lo, hi) = b.b();
        for k in 0..200 {
            let theta = k as f64 / 200.0;
            for &r in &[lo, 1.0, hi] {
                let next = p.step(theta, r).unwrap();
                assert!(next <= hi, "upper band edge broken at θ = {theta}");
            }
        }
    }

    #[test]
    fn critical_arc_contains_sublevel_set() {
        let p = CocycleParams::<f64>::reference(1e8, -5.0);
        let c = p.critical_arc();
        assert!(!c.whole_circle);
        let thr = 10.0 * p.band_lambda() / p.lambda_sq;
        for k in 0..10_000 {
            let theta = k as f64 / 10_000.0;
            if p.working_potential(theta).0 <= thr {
                assert!(c.arc.contains(theta));
            }
        }
        // At the reference coupling the threshold exceeds max w.
        assert!(CocycleParams::<f64>::reference(30.0, 0.0).critical_arc().whole_circle);
    }

    #[test]
    fn lyapunov_of_constant_section() {
        let w = RotationNumber::<f64>::reference();
        let l = birkhoff_log_average(|_| 30f64.sqrt(), &w, 0.2, 1000, 10).unwrap();
        assert_relative_eq!(l, 30f64.sqrt().ln(), max_relative = 1e-14);
        assert!(matches!(birkhoff_log_average(|_| -1.0, &w, 0.2, 10, 0), Err(LabError::InvalidSection { .. })));
    }

    #[test]
    fn derivative_difference_reconstruction() {
        let p = CocycleParams::<f64>::reference(30.0, -2.0);
        let (r, dr) = forward_with_theta_derivative(&p, 0.21, 40.0, 3.0, 12).unwrap();
        let (s, ds) = forward_with_theta_derivative(&p, 0.21, 30.0, -1.0, 12).unwrap();
        let mut checked = 0;
        for k in 0..10 {
            let t = derivative_difference(&r, &dr, &s, &ds, k).unwrap();
            if t.cancellation() > 1e6 {
                break;
            }
            assert!(t.mismatch() < 1e-9, "k = {k}: {t:?}");
            checked += 1;
        }
        assert!(checked >= 2);
    }

    #[test]
    fn faulty_map_differs_only_on_its_arc() {
        let p = CocycleParams::<f64>::reference(30.0, -2.0);
        let f = FaultyFibreMap { inner: p.clone(), fault_arc: CircleArc::new(0.5, 0.01), magnitude: 1e-3 };
        assert_eq!(f.step(0.2, 3.0).unwrap(), p.step(0.2, 3.0).unwrap());
        assert!(f.step(0.5, 3.0).unwrap() != p.step(0.5, 3.0).unwrap());
    }
}
