//! Invariant sections `ψ^u_E`, `ψ^s_E` computed pointwise by pullback, with
//! first and second derivatives in `θ` and `E`.
//!
//! The unstable section at `θ` is the limit of forward orbits started at
//! `θ − Tω`; the stable section is the limit of backward orbits started at
//! `θ + Tω`. The seeds are the two ends of the positive cone: `r = ∞` for the
//! forward pullback (its first image is exactly `c(θ − Tω)`) and `r = 0` for
//! the backward pullback. Since the fibre maps preserve order on the positive
//! cone, the forward pullback stays above `ψ^u` and the backward one stays
//! below `ψ^s`; both stay positive exactly when the cocycle is uniformly
//! hyperbolic with `ψ^s < ψ^u`, which makes leaving the cone a clean signal of
//! `E ≥ E₀`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cocycle::{CocycleParams, FibreMap};
use crate::error::{LabError, Result};
use crate::scalar::Real;

/// Which invariant section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Unstable,
    Stable,
}

/// Pullback length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    Fixed(u64),
    /// Double the horizon until two successive horizons agree.
    Auto,
}

/// Convergence controls for pullbacks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonConfig<T> {
    /// First horizon tried in auto mode.
    pub t_init: u64,
    /// Horizon cap.
    pub t_max: u64,
    /// Absolute tolerance on `ψ` between horizons `T` and `2T`.
    pub tol_psi: T,
    /// Relative tolerance (against `max(1, |value|)`) on derivatives.
    pub tol_deriv: T,
}

impl<T: Real> HorizonConfig<T> {
    /// Defaults: `T₀ = 64`, `T_max = 10⁶`, `tol_psi = 10⁻⁹ λ²`, `tol_deriv = 10⁻⁸`.
    pub fn for_params(params: &CocycleParams<T>) -> Self {
        Self { t_init: 64, t_max: 1_000_000, tol_psi: T::c(1e-9) * params.lambda_sq, tol_deriv: T::c(1e-8) }
    }
}

/// Value and derivatives of a section at one angle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Jet<T> {
    pub psi: T,
    pub d_theta: T,
    pub d2_theta: T,
    pub d_e: T,
    pub d2_e: T,
}

/// One converged sample of an invariant section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint<T> {
    pub theta: T,
    pub psi: T,
    pub d_theta: T,
    pub d2_theta: T,
    pub d_e: T,
    pub d2_e: T,
    /// Pullback length `T` that produced the point.
    pub horizon: u64,
    /// Invariance defect against an independently computed neighbour:
    /// `|Φ(θ, ψ(θ)) − ψ(θ + ω)|` (unstable) or `|Φ⁻¹(θ − ω, ψ(θ)) − ψ(θ − ω)|` (stable).
    pub residual: T,
}

impl<T: Real> CurvePoint<T> {
    fn from_jet(theta: T, j: Jet<T>, horizon: u64, residual: T) -> Self {
        Self { theta, psi: j.psi, d_theta: j.d_theta, d2_theta: j.d2_theta, d_e: j.d_e, d2_e: j.d2_e, horizon, residual }
    }

    /// The jet of the point.
    pub fn jet(&self) -> Jet<T> {
        Jet { psi: self.psi, d_theta: self.d_theta, d2_theta: self.d2_theta, d_e: self.d_e, d2_e: self.d2_e }
    }
}

#[inline]
fn coefficient_jet<T: Real>(params: &CocycleParams<T>, theta: T) -> (T, T, T) {
    let (w, w1, w2) = params.working_potential(theta);
    let l2 = params.lambda_sq;
    (l2 * w - params.energy, l2 * w1, l2 * w2)
}

fn left_cone<T: Real>(theta: T, step: u64, value: T) -> LabError {
    LabError::NotUniformlyHyperbolic { theta: theta.f64(), step, value: value.f64() }
}

/// Forward pullback of length `horizon ≥ 1` from `r = ∞` at `θ − Tω`.
pub fn pullback_unstable<T: Real>(params: &CocycleParams<T>, theta: T, horizon: u64) -> Result<Jet<T>> {
    let horizon = horizon.max(1);
    let rot = &params.rotation;
    let t0 = rot.advance(theta, -(horizon as i64));
    let (c, c1, c2) = coefficient_jet(params, t0);
    let mut j = Jet { psi: c, d_theta: c1, d2_theta: c2, d_e: -T::one(), d2_e: T::zero() };
    let two = T::c(2.0);
    for k in 1..horizon {
        if !(j.psi > T::zero()) {
            return Err(left_cone(t0, k, j.psi));
        }
        let th = rot.advance(theta, k as i64 - horizon as i64);
        let (c, c1, c2) = coefficient_jet(params, th);
        let inv = j.psi.recip();
        let inv2 = inv * inv;
        let inv3 = inv2 * inv;
        j = Jet {
            psi: c - inv,
            d_theta: c1 + j.d_theta * inv2,
            d2_theta: c2 + j.d2_theta * inv2 - two * j.d_theta * j.d_theta * inv3,
            d_e: -T::one() + j.d_e * inv2,
            d2_e: j.d2_e * inv2 - two * j.d_e * j.d_e * inv3,
        };
    }
    if !(j.psi > T::zero()) || !j.psi.is_finite() {
        return Err(left_cone(theta, horizon, j.psi));
    }
    Ok(j)
}

/// Backward pullback of length `horizon ≥ 1` from `r = 0` at `θ + Tω`.
pub fn pullback_stable<T: Real>(params: &CocycleParams<T>, theta: T, horizon: u64) -> Result<Jet<T>> {
    let horizon = horizon.max(1);
    let rot = &params.rotation;
    let mut j = Jet::<T>::default();
    let two = T::c(2.0);
    for k in (0..horizon).rev() {
        let th = rot.advance(theta, k as i64);
        let (c, c1, c2) = coefficient_jet(params, th);
        let den = c - j.psi;
        if !(den > T::zero()) || !den.is_finite() {
            return Err(left_cone(th, horizon - k, den));
        }
        let r = den.recip();
        let r2 = r * r;
        let d_theta = r2 * (j.d_theta - c1);
        let d_e = r2 * (j.d_e + T::one());
        j = Jet {
            psi: r,
            d_theta,
            d2_theta: two * d_theta * d_theta / r + r2 * (j.d2_theta - c2),
            d_e,
            d2_e: two * d_e * d_e / r + r2 * j.d2_e,
        };
    }
    Ok(j)
}

/// Pullback of either kind.
pub fn pullback<T: Real>(params: &CocycleParams<T>, kind: CurveKind, theta: T, horizon: u64) -> Result<Jet<T>> {
    match kind {
        CurveKind::Unstable => pullback_unstable(params, theta, horizon),
        CurveKind::Stable => pullback_stable(params, theta, horizon),
    }
}

fn jets_agree<T: Real>(a: &Jet<T>, b: &Jet<T>, cfg: &HorizonConfig<T>) -> (bool, T) {
    let dpsi = (a.psi - b.psi).abs();
    let rel = |x: T, y: T| (x - y).abs() / y.abs().max(T::one());
    let dd = rel(a.d_theta, b.d_theta).max(rel(a.d2_theta, b.d2_theta)).max(rel(a.d_e, b.d_e)).max(rel(a.d2_e, b.d2_e));
    (dpsi < cfg.tol_psi && dd < cfg.tol_deriv, dpsi.max(dd))
}

/// Runs a pullback with the requested horizon policy; returns the jet and the
/// horizon actually used.
pub fn converged_jet<T: Real>(
    params: &CocycleParams<T>,
    kind: CurveKind,
    theta: T,
    cfg: &HorizonConfig<T>,
    horizon: Horizon,
) -> Result<(Jet<T>, u64)> {
    match horizon {
        Horizon::Fixed(t) => Ok((pullback(params, kind, theta, t)?, t)),
        Horizon::Auto => {
            let mut t = cfg.t_init.max(1);
            let mut prev = pullback(params, kind, theta, t)?;
            loop {
                let t2 = t.saturating_mul(2);
                if t2 > cfg.t_max {
                    let change = (prev.psi - pullback(params, kind, theta, t)?.psi).abs();
                    return Err(LabError::NoConvergence { horizon: t, change: change.f64() });
                }
                let next = pullback(params, kind, theta, t2)?;
                let (ok, change) = jets_agree(&prev, &next, cfg);
                if ok {
                    return Ok((next, t2));
                }
                if t2.saturating_mul(2) > cfg.t_max {
                    return Err(LabError::NoConvergence { horizon: t2, change: change.f64() });
                }
                prev = next;
                t = t2;
            }
        }
    }
}

fn residual_for<T: Real>(params: &CocycleParams<T>, kind: CurveKind, theta: T, psi: T, horizon: u64) -> Result<T> {
    let rot = &params.rotation;
    match kind {
        CurveKind::Unstable => {
            let next = params.step(theta, psi)?;
            let other = pullback_unstable(params, rot.step(theta), horizon)?.psi;
            Ok((next - other).abs())
        }
        CurveKind::Stable => {
            let prev_theta = rot.unstep(theta);
            let prev = params.unstep(prev_theta, psi)?;
            let other = pullback_stable(params, prev_theta, horizon)?.psi;
            Ok((prev - other).abs())
        }
    }
}

/// Evaluates a section at `θ`, including its invariance residual.
pub fn evaluate<T: Real>(
    params: &CocycleParams<T>,
    kind: CurveKind,
    theta: T,
    cfg: &HorizonConfig<T>,
    horizon: Horizon,
) -> Result<CurvePoint<T>> {
    let theta = theta.frac_angle();
    let (jet, t) = converged_jet(params, kind, theta, cfg, horizon)?;
    let residual = residual_for(params, kind, theta, jet.psi, t)?;
    Ok(CurvePoint::from_jet(theta, jet, t, residual))
}

/// `ψ^u_E(θ)` with derivatives.
pub fn evaluate_unstable<T: Real>(
    params: &CocycleParams<T>,
    theta: T,
    cfg: &HorizonConfig<T>,
    horizon: Horizon,
) -> Result<CurvePoint<T>> {
    evaluate(params, CurveKind::Unstable, theta, cfg, horizon)
}

/// `ψ^s_E(θ)` with derivatives.
pub fn evaluate_stable<T: Real>(
    params: &CocycleParams<T>,
    theta: T,
    cfg: &HorizonConfig<T>,
    horizon: Horizon,
) -> Result<CurvePoint<T>> {
    evaluate(params, CurveKind::Stable, theta, cfg, horizon)
}

/// Lyapunov exponent from the unstable section: `ψ^u` is evaluated at `θ₀`
/// and then carried forward by the fibre map.
pub fn lyapunov_exponent<T: Real>(
    params: &CocycleParams<T>,
    theta0: T,
    n_samples: usize,
    burn_in: usize,
    cfg: &HorizonConfig<T>,
) -> Result<T> {
    let (jet, _) = converged_jet(params, CurveKind::Unstable, theta0, cfg, Horizon::Auto)?;
    crate::cocycle::lyapunov_via_section(params, theta0, jet.psi, n_samples, burn_in)
}

/// Relative mismatches between recursion derivatives and finite differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeCheck<T> {
    pub theta: T,
    pub energy: T,
    pub d_theta: T,
    pub d2_theta: T,
    pub d_e: T,
    pub d2_e: T,
}

impl<T: Real> DerivativeCheck<T> {
    /// Largest of the four mismatches.
    pub fn max(&self) -> T {
        self.d_theta.max(self.d2_theta).max(self.d_e).max(self.d2_e)
    }
}

/// Step sizes `(h_θ, h_E)` adapted to the local scale `|f′/f″|` of a point.
pub fn suggested_steps<T: Real>(point: &CurvePoint<T>) -> (T, T) {
    let scale = |d1: T, d2: T| {
        let s = if d2 == T::zero() { T::one() } else { (d1 / d2).abs() };
        (T::c(0.02) * s).max(T::c(1e-8)).min(T::c(1e-4))
    };
    (scale(point.d_theta, point.d2_theta), scale(point.d_e, point.d2_e))
}

/// Compares the recursion derivatives of `point` with Richardson-extrapolated
/// central differences (steps `h` and `h/2`). First derivatives are
/// differenced from `ψ`; second derivatives from the recursion's first
/// derivative. The pullback horizon of `point` is reused at every stencil
/// node so that all evaluations share the same approximation.
///
/// Mismatches are `|rec − fd| / max(|rec|, |fd|, 10⁻⁶·max(1, |ψ|))`.
pub fn derivative_recursion_check<T: Real>(
    params: &CocycleParams<T>,
    kind: CurveKind,
    point: &CurvePoint<T>,
    h_theta: T,
    h_e: T,
) -> Result<DerivativeCheck<T>> {
    let horizon = point.horizon;
    let stencil = |p: &CocycleParams<T>, th: T| -> Result<Jet<T>> {
        pullback(p, kind, th.frac_angle(), horizon).map_err(|e| LabError::StencilError { reason: e.to_string() })
    };
    let two = T::c(2.0);
    let richardson = |f: &dyn Fn(T) -> Result<(T, T)>, h: T| -> Result<(T, T)> {
        let (p1, q1) = f(h)?;
        let (p2, q2) = f(h / two)?;
        let three = T::c(3.0);
        let four = T::c(4.0);
        Ok(((four * p2 - p1) / three, (four * q2 - q1) / three))
    };
    let theta = point.theta;
    let diff_theta = |h: T| -> Result<(T, T)> {
        let a = stencil(params, theta + h)?;
        let b = stencil(params, theta - h)?;
        Ok(((a.psi - b.psi) / (two * h), (a.d_theta - b.d_theta) / (two * h)))
    };
    let e = params.energy;
    let diff_e = |h: T| -> Result<(T, T)> {
        let a = stencil(&params.with_energy(e + h), theta)?;
        let b = stencil(&params.with_energy(e - h), theta)?;
        Ok(((a.psi - b.psi) / (two * h), (a.d_e - b.d_e) / (two * h)))
    };
    let (fd_t1, fd_t2) = richardson(&diff_theta, h_theta)?;
    let (fd_e1, fd_e2) = richardson(&diff_e, h_e)?;
    let floor = T::c(1e-6) * point.psi.abs().max(T::one());
    let rel = |rec: T, fd: T| (rec - fd).abs() / rec.abs().max(fd.abs()).max(floor);
    Ok(DerivativeCheck {
        theta,
        energy: e,
        d_theta: rel(point.d_theta, fd_t1),
        d2_theta: rel(point.d2_theta, fd_t2),
        d_e: rel(point.d_e, fd_e1),
        d2_e: rel(point.d2_e, fd_e2),
    })
}

/// Sampling controls for whole-curve computations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    /// Uniform base grid size (power of two).
    pub base_points: usize,
    /// Number of bisection refinement passes.
    pub refine_depth: u32,
    /// Targeted windows are placed at `θ_c + kω` for `|k| ≤ orbit_windows`.
    pub orbit_windows: u32,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { base_points: 4096, refine_depth: 6, orbit_windows: 8 }
    }
}

/// Both sections sampled on a common adaptive grid.
#[derive(Debug, Clone)]
pub struct CurvePair<T> {
    /// Sorted sample angles.
    pub thetas: Vec<T>,
    pub unstable: Vec<CurvePoint<T>>,
    pub stable: Vec<CurvePoint<T>>,
}

/// A single section with its global norms.
#[derive(Debug, Clone)]
pub struct InvariantCurve<T> {
    pub kind: CurveKind,
    pub points: Vec<CurvePoint<T>>,
    /// `max |∂_θ ψ|` over the grid.
    pub c1_norm: T,
    /// `max |∂²_θ ψ|` over the grid.
    pub c2_norm: T,
}

/// `(max |∂_θ ψ|, max |∂²_θ ψ|)` over the samples.
pub fn curve_norms<T: Real>(points: &[CurvePoint<T>]) -> (T, T) {
    points.iter().fold((T::zero(), T::zero()), |(a, b), p| (a.max(p.d_theta.abs()), b.max(p.d2_theta.abs())))
}

fn evaluate_many<T: Real>(
    params: &CocycleParams<T>,
    thetas: &[T],
    cfg: &HorizonConfig<T>,
) -> Result<Vec<(CurvePoint<T>, CurvePoint<T>)>> {
    thetas
        .par_iter()
        .map(|&t| {
            let u = evaluate(params, CurveKind::Unstable, t, cfg, Horizon::Auto)?;
            let s = evaluate(params, CurveKind::Stable, t, cfg, Horizon::Auto)?;
            Ok((u, s))
        })
        .collect()
}

/// Golden-section search for a minimum of `f` on `[a, b]`.
pub fn golden_min<T: Real, F: Fn(T) -> Result<T>>(f: F, mut a: T, mut b: T, tol: T) -> Result<(T, T)> {
    let g = T::c(0.618_033_988_749_894_8);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc < fd { (c, fc) } else { (d, fd) })
}

impl<T: Real> CurvePair<T> {
    /// Computes both sections on an adaptive grid: a uniform base grid, dense
    /// windows around the iterates `θ_c + kω` of the near-collision angle
    /// (where the `C¹` maxima live), bisection refinement wherever the gap is
    /// within a factor 4 of its minimum or a derivative is within 50% of its
    /// maximum, and finally golden-section polishing of the gap minimum and
    /// of the largest derivative peaks.
    pub fn compute(params: &CocycleParams<T>, grid: &GridConfig, cfg: &HorizonConfig<T>) -> Result<Self> {
        if grid.base_points < 8 || !grid.base_points.is_power_of_two() {
            return Err(LabError::invalid("base_points must be a power of two ≥ 8"));
        }
        let n = grid.base_points;
        let base: Vec<T> = (0..n).map(|i| T::from_count(i as u64) / T::from_count(n as u64)).collect();
        let pts = evaluate_many(params, &base, cfg)?;
        let mut pair = Self::from_points(pts);

        // Windows around iterates of the coarse minimiser.
        let (imin, dmin) = pair.min_gap_index();
        let theta_c = pair.thetas[imin];
        let curvature = {
            let c = (pair.unstable[imin].d2_theta - pair.stable[imin].d2_theta) / T::c(2.0);
            if c > T::zero() { c } else { params.lambda_sq }
        };
        let delta = dmin.max(T::epsilon());
        let width = (delta / curvature).sqrt();
        let spacing = (width / T::c(8.0)).min(delta.sqrt() / T::c(64.0));
        let half_count = 256i64;
        let base_spacing = T::one() / T::from_count(n as u64);
        if spacing < base_spacing {
            let mut extra = Vec::new();
            let k_max = grid.orbit_windows as i64;
            for k in -k_max..=k_max {
                let center = params.rotation.advance(theta_c, k);
                for j in -half_count..=half_count {
                    extra.push((center + T::from_i64(j).unwrap() * spacing).frac_angle());
                }
            }
            pair.insert(params, cfg, extra)?;
        }

        for _ in 0..grid.refine_depth {
            let mids = pair.refinement_midpoints();
            if mids.is_empty() {
                break;
            }
            pair.insert(params, cfg, mids)?;
        }
        pair.polish(params, cfg)?;
        Ok(pair)
    }

    fn from_points(pts: Vec<(CurvePoint<T>, CurvePoint<T>)>) -> Self {
        let mut pts = pts;
        pts.sort_by(|a, b| a.0.theta.partial_cmp(&b.0.theta).unwrap());
        pts.dedup_by(|a, b| a.0.theta == b.0.theta);
        let thetas = pts.iter().map(|p| p.0.theta).collect();
        let (unstable, stable) = pts.into_iter().unzip();
        Self { thetas, unstable, stable }
    }

    fn insert(&mut self, params: &CocycleParams<T>, cfg: &HorizonConfig<T>, mut extra: Vec<T>) -> Result<()> {
        extra.sort_by(|a, b| a.partial_cmp(b).unwrap());
        extra.dedup();
        extra.retain(|t| self.thetas.binary_search_by(|x| x.partial_cmp(t).unwrap()).is_err());
        if extra.is_empty() {
            return Ok(());
        }
        let new = evaluate_many(params, &extra, cfg)?;
        let mut all: Vec<(CurvePoint<T>, CurvePoint<T>)> =
            self.unstable.iter().copied().zip(self.stable.iter().copied()).collect();
        all.extend(new);
        *self = Self::from_points(all);
        Ok(())
    }

    /// Gap `ψ^u − ψ^s` at sample `i`.
    pub fn gap(&self, i: usize) -> T {
        self.unstable[i].psi - self.stable[i].psi
    }

    /// Index and value of the smallest gap.
    pub fn min_gap_index(&self) -> (usize, T) {
        let mut best = (0, T::infinity());
        for i in 0..self.thetas.len() {
            let g = self.gap(i);
            if g < best.1 {
                best = (i, g);
            }
        }
        best
    }

    fn refinement_midpoints(&self) -> Vec<T> {
        let n = self.thetas.len();
        let (_, dmin) = self.min_gap_index();
        let (cu, _) = curve_norms(&self.unstable);
        let (cs, _) = curve_norms(&self.stable);
        let half = T::c(0.5);
        let flag = |i: usize| {
            self.gap(i) < T::c(4.0) * dmin
                || self.unstable[i].d_theta.abs() >= half * cu
                || self.stable[i].d_theta.abs() >= half * cs
        };
        let mut mids = Vec::new();
        for i in 0..n {
            let j = (i + 1) % n;
            if flag(i) || flag(j) {
                let a = self.thetas[i];
                let mut b = self.thetas[j];
                if j == 0 {
                    b = b + T::one();
                }
                let m = ((a + b) * half).frac_angle();
                if (b - a) > T::c(1e-13) {
                    mids.push(m);
                }
            }
        }
        mids
    }

    fn polish(&mut self, params: &CocycleParams<T>, cfg: &HorizonConfig<T>) -> Result<()> {
        let n = self.thetas.len();
        let bracket = |i: usize| -> (T, T) {
            let a = self.thetas[(i + n - 1) % n];
            let b = self.thetas[(i + 1) % n];
            let t = self.thetas[i];
            let lo = if a > t { a - T::one() } else { a };
            let hi = if b < t { b + T::one() } else { b };
            (lo, hi)
        };
        let mut extra = Vec::new();
        let (imin, _) = self.min_gap_index();
        let (a, b) = bracket(imin);
        let gap = |t: T| -> Result<T> {
            let u = converged_jet(params, CurveKind::Unstable, t.frac_angle(), cfg, Horizon::Auto)?.0.psi;
            let s = converged_jet(params, CurveKind::Stable, t.frac_angle(), cfg, Horizon::Auto)?.0.psi;
            Ok(u - s)
        };
        extra.push(golden_min(gap, a, b, T::c(1e-12))?.0.frac_angle());
        for kind in [CurveKind::Unstable, CurveKind::Stable] {
            let pts = match kind {
                CurveKind::Unstable => &self.unstable,
                CurveKind::Stable => &self.stable,
            };
            let mut peaks: Vec<(usize, T)> = (0..n)
                .filter(|&i| {
                    let v = pts[i].d_theta.abs();
                    v >= pts[(i + n - 1) % n].d_theta.abs() && v >= pts[(i + 1) % n].d_theta.abs()
                })
                .map(|i| (i, pts[i].d_theta.abs()))
                .collect();
            peaks.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then(x.0.cmp(&y.0)));
            for &(i, _) in peaks.iter().take(3) {
                let (a, b) = bracket(i);
                let neg = |t: T| -> Result<T> {
                    Ok(-converged_jet(params, kind, t.frac_angle(), cfg, Horizon::Auto)?.0.d_theta.abs())
                };
                extra.push(golden_min(neg, a, b, T::c(1e-13))?.0.frac_angle());
            }
        }
        self.insert(params, cfg, extra)
    }

    /// The unstable section with its norms.
    pub fn unstable_curve(&self) -> InvariantCurve<T> {
        let (c1, c2) = curve_norms(&self.unstable);
        InvariantCurve { kind: CurveKind::Unstable, points: self.unstable.clone(), c1_norm: c1, c2_norm: c2 }
    }

    /// The stable section with its norms.
    pub fn stable_curve(&self) -> InvariantCurve<T> {
        let (c1, c2) = curve_norms(&self.stable);
        InvariantCurve { kind: CurveKind::Stable, points: self.stable.clone(), c1_norm: c1, c2_norm: c2 }
    }

    /// Largest invariance residual over both sections.
    pub fn max_residual(&self) -> T {
        self.unstable.iter().chain(self.stable.iter()).fold(T::zero(), |a, p| a.max(p.residual))
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    /// Whether there are no samples.
    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }
}
