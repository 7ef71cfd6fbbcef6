//! Bookkeeping of the inductive multi-scale construction: the scale ladder
//! `I_n, M_n, N_n`, the exceptional regions `Ξ^u_n`, `Ξ^s_n` and their
//! complement `Θ_n`, the box images `A^u_n`, `A^s_n`, conditions `(C1)_n` and
//! `(C2)_n` as finite certifiers, stopping times `σ±`, and the rule that
//! selects the critical interval `I(E)`.
//!
//! All angles are in the normalised frame, where the potential minimum sits
//! at `θ = 0`, so `I_n` is centred at `0`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arcs::{ArcSet, CircleArc, ExactArcSet};
use crate::cocycle::{CocycleParams, FibreMap};
use crate::curves::{converged_jet, CurveKind, Horizon, HorizonConfig};
use crate::error::{LabError, Result};
use crate::rotation::RotationNumber;
use crate::scalar::Real;

/// Levels above this are never built: `N_2` already exceeds any horizon.
pub const MAX_LEVEL: usize = 2;

/// Largest number of rotated arcs assembled into an exact region.
pub const REGION_ARC_CAP: u64 = 1_000_000;

/// Largest recovery time for which box images are computed.
pub const BOX_STEP_CAP: u64 = 1_000_000;

/// One level of the ladder. Quantities that leave the `f64`/`u64` range are
/// kept only through their base-10 logarithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderLevel<T> {
    pub n: usize,
    /// `I_n`, centred at the minimum; the half-length is `0` when it underflows.
    pub arc: CircleArc<T>,
    /// `log₁₀ |I_n|`.
    pub log10_length: f64,
    /// `M_n` when it fits in a `u64`.
    pub m: Option<u64>,
    pub log10_m: f64,
    /// `N_n`, the Diophantine return-time lower bound for `|I_n|`.
    pub n_return: Option<u64>,
    pub log10_n_return: f64,
}

impl<T: Real> LadderLevel<T> {
    /// Whether `I_n` is representable in working precision.
    pub fn is_representable(&self) -> bool {
        self.arc.half_length > T::zero()
    }
}

/// The scale ladder up to `max_level ≤ 2`.
#[derive(Debug, Clone)]
pub struct ScaleLadder<T> {
    pub lambda: T,
    pub c0: T,
    pub tau: T,
    pub kappa: T,
    pub rotation: RotationNumber<T>,
    pub levels: Vec<LadderLevel<T>>,
    /// Numerical `(E_n^−, E_n^+)` from box-touch bisection, when computed.
    pub energy_brackets: Vec<Option<(T, T)>>,
    /// Set when `M₀ = 1`, `I₀` is the whole circle, or `N₀ = 0`.
    pub degenerate: bool,
    pub warnings: Vec<String>,
}

/// Floors `x`, snapping values within `10⁻⁹` relative of an integer to it so
/// that e.g. `(10⁴)^{1/4}` gives `10` and not `9`.
fn snapped_floor(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r
    } else {
        x.floor()
    }
}

fn to_u64(log10: f64) -> Option<u64> {
    if log10 < 18.0 {
        Some(snapped_floor(10f64.powf(log10)).max(0.0) as u64)
    } else {
        None
    }
}

impl<T: Real> ScaleLadder<T> {
    /// Builds the ladder for the given coupling: `c₀` comes from the critical
    /// arc `I₀` of the parameters and `(κ, τ)` from the rotation number.
    pub fn build(params: &CocycleParams<T>, max_level: usize) -> Result<Self> {
        let dio = params.rotation.estimate_diophantine(100_000)?;
        let crit = params.critical_arc();
        let mut ladder = Self::from_constants(
            params.lambda(),
            crit.c0,
            dio.kappa,
            dio.tau,
            params.rotation.clone(),
            max_level,
        )?;
        if crit.whole_circle {
            ladder.degenerate = true;
            ladder.warnings.push("critical arc I₀ covers the whole circle".into());
        }
        Ok(ladder)
    }

    /// Builds the ladder from explicit constants.
    ///
    /// `M₀ = ⌊λ^{1/(4τ)}⌋`, `M_j = ⌊λ^{M_{j−1}/(4τ)}⌋`, `|I₀| = c₀/√λ`,
    /// `|I_j| = c₀/λ^{M_{j−1}/2}` and `N_n = ⌊(κ/|I_n|)^{1/τ}⌋`.
    pub fn from_constants(
        lambda: T,
        c0: T,
        kappa: T,
        tau: T,
        rotation: RotationNumber<T>,
        max_level: usize,
    ) -> Result<Self> {
        if max_level > MAX_LEVEL {
            return Err(LabError::invalid(format!("max_level {max_level} exceeds the cap {MAX_LEVEL}")));
        }
        if !(lambda > T::zero() && c0 > T::zero() && kappa > T::zero() && tau > T::zero()) {
            return Err(LabError::invalid("ladder constants must be positive"));
        }
        let (lam, c0f, kap, tauf) = (lambda.f64(), c0.f64(), kappa.f64(), tau.f64());
        let log_lam = lam.log10();
        let m0 = snapped_floor(lam.powf(1.0 / (4.0 * tauf)));
        if m0 < 1.0 {
            // λ^{1/(4τ)} ≥ 1 exactly when λ ≥ 1.
            return Err(LabError::CouplingTooSmall { lambda_threshold: 1.0 });
        }
        let mut levels = Vec::with_capacity(max_level + 1);
        let mut warnings = Vec::new();
        let mut prev_log10_m = f64::NAN;
        for n in 0..=max_level {
            let log10_length = if n == 0 {
                c0f.log10() - 0.5 * log_lam
            } else {
                c0f.log10() - 0.5 * 10f64.powf(prev_log10_m) * log_lam
            };
            let log10_m = if n == 0 { m0.log10() } else { 10f64.powf(prev_log10_m) / (4.0 * tauf) * log_lam };
            let m = to_u64(log10_m);
            let log10_m = match m {
                Some(v) => (v as f64).log10(),
                None => log10_m,
            };
            let length = 10f64.powf(log10_length);
            let (log10_n_return, n_return) = if log10_length >= 0.0 {
                (f64::NEG_INFINITY, Some(0))
            } else {
                let l = (kap.log10() - log10_length) / tauf;
                (l, to_u64(l))
            };
            let half = T::c((0.5 * length).min(0.5));
            if half == T::zero() {
                warnings.push(format!("|I_{n}| = 10^{log10_length:.3e} underflows working precision"));
            }
            levels.push(LadderLevel {
                n,
                arc: CircleArc::new(T::zero(), half),
                log10_length,
                m,
                log10_m,
                n_return,
                log10_n_return,
            });
            prev_log10_m = log10_m;
        }
        let degenerate = m0 <= 1.0 || levels[0].n_return == Some(0);
        if degenerate {
            warnings.push(format!("ladder is degenerate (M₀ = {m0}, N₀ = {:?})", levels[0].n_return));
        }
        Ok(Self {
            lambda,
            c0,
            tau,
            kappa,
            rotation,
            energy_brackets: vec![None; max_level + 1],
            levels,
            degenerate,
            warnings,
        })
    }

    /// Highest level stored.
    pub fn max_level(&self) -> usize {
        self.levels.len() - 1
    }

    fn level(&self, n: usize) -> Result<&LadderLevel<T>> {
        self.levels.get(n).ok_or_else(|| LabError::invalid(format!("level {n} is not in the ladder")))
    }

    fn level_m(&self, n: usize) -> Result<u64> {
        self.level(n)?.m.ok_or(LabError::ScaleOverflow)
    }

    /// Replaces `M_n` (used to construct counterexamples).
    pub fn with_m(mut self, n: usize, m: u64) -> Self {
        if let Some(l) = self.levels.get_mut(n) {
            l.m = Some(m);
            l.log10_m = (m as f64).log10();
        }
        self
    }

    /// `frac(kω)` as an exact rational of the stored double-double `ω`.
    fn exact_multiple(&self, k: i64) -> BigRational {
        let w = BigRational::from_float(self.rotation.omega.f64()).unwrap_or_else(BigRational::zero)
            + BigRational::from_float(self.rotation.omega_lo.f64()).unwrap_or_else(BigRational::zero);
        let x = w * BigRational::from_integer(BigInt::from(k));
        &x - x.floor()
    }

    /// `I_n + kω` as an exact arc set.
    pub fn shifted_level_arc(&self, n: usize, k: i64) -> Result<ExactArcSet> {
        let level = self.level(n)?;
        if !level.is_representable() {
            return Err(LabError::ScaleOverflow);
        }
        let half = BigRational::from_float(level.arc.half_length.f64()).ok_or(LabError::ScaleOverflow)?;
        Ok(ArcSet::from_center(self.exact_multiple(k), half))
    }

    /// Regions `Ξ^u_n`, `Ξ^s_n`, `Θ_n`.
    pub fn regions(&self, n: usize) -> Result<RegionSet> {
        let mut total = 0u64;
        for i in 0..=n {
            total = total.saturating_add(self.level_m(i)?);
        }
        if total > REGION_ARC_CAP {
            return Err(LabError::HorizonExceeded { cap: REGION_ARC_CAP });
        }
        let mut xu = Vec::new();
        let mut xs = Vec::new();
        for i in 0..=n {
            let m = self.level_m(i)? as i64;
            for k in 1..=m {
                xu.push(self.shifted_level_arc(i, k)?);
            }
            for k in 0..=m {
                xs.push(self.shifted_level_arc(i, -k)?);
            }
        }
        let xi_u = ArcSet::union_all(xu);
        let xi_s = ArcSet::union_all(xs);
        let theta = xi_u.union(&xi_s).complement();
        Ok(RegionSet { level: n, xi_u, xi_s, theta })
    }

    /// `Θ_{n−1}`, with `Θ_{−1} = 𝕋`.
    pub fn theta_before(&self, n: usize) -> Result<ExactArcSet> {
        if n == 0 {
            Ok(ArcSet::full())
        } else {
            Ok(self.regions(n - 1)?.theta)
        }
    }

    /// `Ξ^u_{n−1}` and `Ξ^s_{n−1}`, both empty for `n = 0`.
    fn xi_before(&self, n: usize) -> Result<(ExactArcSet, ExactArcSet)> {
        if n == 0 {
            Ok((ArcSet::empty(), ArcSet::empty()))
        } else {
            let r = self.regions(n - 1)?;
            Ok((r.xi_u, r.xi_s))
        }
    }
}

/// Exceptional regions of a level and their complement.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSet {
    pub level: usize,
    /// `⋃_{i≤n} ⋃_{m=1}^{M_i} (I_i + mω)`.
    pub xi_u: ExactArcSet,
    /// `⋃_{i≤n} ⋃_{m=0}^{M_i} (I_i − mω)`.
    pub xi_s: ExactArcSet,
    /// Closure of `𝕋 ∖ (Ξ^u_n ∪ Ξ^s_n)`.
    pub theta: ExactArcSet,
}

impl RegionSet {
    /// `|Ξ^u_n ∪ Ξ^s_n|`.
    pub fn exceptional_measure(&self) -> f64 {
        use crate::arcs::ArcCoord;
        self.xi_u.union(&self.xi_s).measure().to_f64()
    }
}

/// Condition `(C2)_n`: `I_n ± (M_n + i)ω ⊂ Θ_{n−1}` for `i = 0, 1`.
pub fn check_condition_c2<T: Real>(ladder: &ScaleLadder<T>, n: usize) -> Result<bool> {
    let theta = ladder.theta_before(n)?;
    let m = ladder.level_m(n)? as i64;
    for sign in [1i64, -1] {
        for i in 0..=1 {
            if !ladder.shifted_level_arc(n, sign * (m + i))?.is_subset_of(&theta) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Outcome of a sampled condition check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// Nothing was sampled.
    Inconclusive,
}

/// First orbit that violates `(C1)_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub direction: CurveKind,
    pub theta0: f64,
    pub r0: f64,
    pub step: u64,
    pub theta: f64,
    pub r: f64,
    pub reason: String,
}

/// Result of [`check_condition_c1`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct C1Report {
    pub level: usize,
    pub energy: f64,
    pub verdict: Verdict,
    /// Seeds checked in each direction.
    pub samples: usize,
    /// Longest orbit before entering `I_n`.
    pub max_steps: u64,
    pub counterexample: Option<Counterexample>,
}

fn exact_contains(set: &ExactArcSet, theta: f64) -> bool {
    use crate::arcs::ArcCoord;
    set.contains_point(&BigRational::from_f64(theta))
}

/// `samples` seeds spread over an arc set (by measure) crossed with a
/// log-uniform grid of fibre values in `[lo, hi]`.
fn seeds(set: &ExactArcSet, lo: f64, hi: f64, samples: usize) -> Vec<(f64, f64)> {
    use crate::arcs::ArcCoord;
    let pieces: Vec<(f64, f64)> = set.pieces().iter().map(|(a, b)| (a.to_f64(), b.to_f64())).collect();
    let total: f64 = pieces.iter().map(|(a, b)| b - a).sum();
    if samples == 0 || total <= 0.0 {
        return Vec::new();
    }
    let n_theta = (samples as f64).sqrt().ceil() as usize;
    let n_r = samples.div_ceil(n_theta);
    let mut out = Vec::with_capacity(samples);
    'outer: for i in 0..n_theta {
        let mut u = (i as f64 + 0.5) / n_theta as f64 * total;
        let mut theta = pieces[0].0;
        for &(a, b) in &pieces {
            if u <= b - a {
                theta = a + u;
                break;
            }
            u -= b - a;
        }
        for j in 0..n_r {
            let t = (j as f64 + 0.5) / n_r as f64;
            out.push((theta, lo * (hi / lo).powf(t)));
            if out.len() == samples {
                break 'outer;
            }
        }
    }
    out
}

/// Condition `(C1)_n` on sampled seeds.
///
/// Forward: seeds `(θ₀, r₀) ∈ Θ_{n−1} × B^u` are iterated until the base
/// orbit first enters `I_n`; along the way `r_k ∈ B` is required, and
/// `r_k ∉ B^u` is only allowed when `θ_k ∈ Ξ^u_{n−1}`. Backward: seeds in
/// `Θ_{n−1} × B^s` are pulled back until the next inverse step would use the
/// coefficient on `I_n`, with `B^s` and `Ξ^s_{n−1}` in the same roles.
pub fn check_condition_c1<T: Real>(
    ladder: &ScaleLadder<T>,
    params: &CocycleParams<T>,
    n: usize,
    samples: usize,
    step_cap: u64,
) -> Result<C1Report> {
    let level = ladder.level(n)?.clone();
    let theta_set = ladder.theta_before(n)?;
    let (xi_u, xi_s) = ladder.xi_before(n)?;
    let bands = params.bands();
    let (bu_lo, bu_hi) = bands.bu();
    let (bs_lo, bs_hi) = bands.bs();
    let in_level = |t: T| level.arc.contains(t);
    let rot = &params.rotation;

    let forward = |(t0, r0): (f64, f64)| -> Result<(u64, Option<Counterexample>)> {
        let (mut t, mut r) = (T::c(t0), T::c(r0));
        let fail = |k: u64, t: T, r: T, reason: &str| Counterexample {
            direction: CurveKind::Unstable,
            theta0: t0,
            r0,
            step: k,
            theta: t.f64(),
            r: r.f64(),
            reason: reason.into(),
        };
        for k in 1..=step_cap {
            r = params.step(t, r)?;
            t = rot.step(t);
            if !bands.in_b(r) {
                return Ok((k, Some(fail(k, t, r, "left B"))));
            }
            if !bands.in_bu(r) && !exact_contains(&xi_u, t.f64()) {
                return Ok((k, Some(fail(k, t, r, "left B^u outside Ξ^u"))));
            }
            if in_level(t) {
                return Ok((k, None));
            }
        }
        Err(LabError::HorizonExceeded { cap: step_cap })
    };
    let backward = |(t0, r0): (f64, f64)| -> Result<(u64, Option<Counterexample>)> {
        let (mut t, mut r) = (T::c(t0), T::c(r0));
        let fail = |k: u64, t: T, r: T, reason: &str| Counterexample {
            direction: CurveKind::Stable,
            theta0: t0,
            r0,
            step: k,
            theta: t.f64(),
            r: r.f64(),
            reason: reason.into(),
        };
        for k in 1..=step_cap {
            let prev = rot.unstep(t);
            if in_level(prev) {
                return Ok((k - 1, None));
            }
            r = params.unstep(prev, r)?;
            t = prev;
            if !bands.in_b(r) {
                return Ok((k, Some(fail(k, t, r, "left B"))));
            }
            if !bands.in_bs(r) && !exact_contains(&xi_s, t.f64()) {
                return Ok((k, Some(fail(k, t, r, "left B^s outside Ξ^s"))));
            }
        }
        Err(LabError::HorizonExceeded { cap: step_cap })
    };

    let fwd_seeds = seeds(&theta_set, bu_lo.f64(), bu_hi.f64(), samples);
    let bwd_seeds = seeds(&theta_set, bs_lo.f64(), bs_hi.f64(), samples);
    let fwd: Vec<(u64, Option<Counterexample>)> = fwd_seeds.par_iter().map(|&s| forward(s)).collect::<Result<_>>()?;
    let bwd: Vec<(u64, Option<Counterexample>)> = bwd_seeds.par_iter().map(|&s| backward(s)).collect::<Result<_>>()?;
    let max_steps = fwd.iter().chain(bwd.iter()).map(|x| x.0).max().unwrap_or(0);
    let counterexample = fwd.into_iter().chain(bwd).find_map(|x| x.1);
    let verdict = if fwd_seeds.is_empty() && bwd_seeds.is_empty() {
        Verdict::Inconclusive
    } else if counterexample.is_some() {
        Verdict::Fail
    } else {
        Verdict::Pass
    };
    Ok(C1Report { level: n, energy: params.energy.f64(), verdict, samples: fwd_seeds.len(), max_steps, counterexample })
}

/// Sampled boundary sections of a box image over `I_n + ω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxImage<T> {
    pub level: usize,
    pub side: CurveKind,
    pub thetas: Vec<T>,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

/// `A^u_n = Φ^{M_n+1}((I_n − M_nω) × B^u)` and `A^s_n = Φ^{−(M_n−1)}((I_n + M_nω) × B^s)`,
/// sampled at `grid` points of `I_n + ω`.
pub fn box_images<T: Real>(
    ladder: &ScaleLadder<T>,
    params: &CocycleParams<T>,
    n: usize,
    grid: usize,
) -> Result<(BoxImage<T>, BoxImage<T>)> {
    let level = ladder.level(n)?;
    let m = level.m.ok_or(LabError::ScaleOverflow)?;
    if m > BOX_STEP_CAP {
        return Err(LabError::HorizonExceeded { cap: BOX_STEP_CAP });
    }
    if !level.is_representable() || grid < 2 {
        return Err(LabError::invalid("box grid needs a representable level and at least two points"));
    }
    let rot = &params.rotation;
    let center = rot.advance(level.arc.center, 1);
    let h = level.arc.half_length;
    let thetas: Vec<T> = (0..grid)
        .map(|i| (center - h + T::c(2.0) * h * T::from_count(i as u64) / T::from_count(grid as u64 - 1)).frac_angle())
        .collect();
    let bands = params.bands();
    let (bu_lo, bu_hi) = bands.bu();
    let (bs_lo, bs_hi) = bands.bs();
    let push_u = |phi: T, r0: T| -> Result<T> {
        let steps = m + 1;
        let mut t = rot.advance(phi, -(steps as i64));
        let mut r = r0;
        for _ in 0..steps {
            r = params.step(t, r)?;
            t = rot.step(t);
        }
        Ok(r)
    };
    let pull_s = |phi: T, r0: T| -> Result<T> {
        let steps = m.saturating_sub(1);
        let mut t = rot.advance(phi, steps as i64);
        let mut r = r0;
        for _ in 0..steps {
            t = rot.unstep(t);
            r = params.unstep(t, r)?;
        }
        Ok(r)
    };
    let u: Vec<(T, T)> = thetas.par_iter().map(|&p| Ok((push_u(p, bu_lo)?, push_u(p, bu_hi)?))).collect::<Result<_>>()?;
    let s: Vec<(T, T)> = thetas.par_iter().map(|&p| Ok((pull_s(p, bs_lo)?, pull_s(p, bs_hi)?))).collect::<Result<_>>()?;
    let (ul, uu) = u.into_iter().unzip();
    let (sl, su) = s.into_iter().unzip();
    Ok((
        BoxImage { level: n, side: CurveKind::Unstable, thetas: thetas.clone(), lower: ul, upper: uu },
        BoxImage { level: n, side: CurveKind::Stable, thetas, lower: sl, upper: su },
    ))
}

/// `min_θ (φ^{u,−} − φ^{s,+})` over the sampled grid; positive exactly when
/// the sampled boxes are disjoint with `A^s` below `A^u`.
pub fn box_separation<T: Real>(u: &BoxImage<T>, s: &BoxImage<T>) -> T {
    u.lower.iter().zip(&s.upper).fold(T::infinity(), |acc, (a, b)| acc.min(*a - *b))
}

/// Bisects the energy at which the level-`n` boxes start to touch.
/// `lo` must give disjoint boxes and `hi` overlapping ones. Returns
/// `(E_n^−, E_n^+)` with `E_n^+ − E_n^− ≤ tol`.
pub fn box_touch_bracket<T: Real>(
    ladder: &ScaleLadder<T>,
    params: &CocycleParams<T>,
    n: usize,
    grid: usize,
    lo: T,
    hi: T,
    tol: T,
) -> Result<(T, T)> {
    let separated = |e: T| -> Result<bool> {
        let p = params.with_energy(e);
        let (u, s) = box_images(ladder, &p, n, grid)?;
        Ok(box_separation(&u, &s) > T::zero())
    };
    if !(lo < hi) || !separated(lo)? || separated(hi)? {
        return Err(LabError::BracketInvalid { lo: lo.f64(), hi: hi.f64(), reason: "boxes must be disjoint at lo and touch at hi".into() });
    }
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > tol {
        let mid = (lo + hi) / T::c(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if separated(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}

/// Stopping times at one angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingTimes<T> {
    pub theta: T,
    /// `d(θ) = ψ^u(θ) − ψ^s(θ)`.
    pub gap: T,
    pub sigma_plus: u64,
    pub sigma_minus: u64,
    pub sigma_hat_plus: u64,
    pub sigma_hat_minus: u64,
    /// `max((σ⁺ − σ̂⁺)/σ⁺, (σ⁻ − σ̂⁻)/σ⁻)`.
    pub eta: T,
}

/// `d(θ) = ψ^u(θ) − ψ^s(θ)` from converged pullbacks.
pub fn section_gap<T: Real>(params: &CocycleParams<T>, theta: T, cfg: &HorizonConfig<T>) -> Result<T> {
    let u = converged_jet(params, CurveKind::Unstable, theta, cfg, Horizon::Auto)?.0.psi;
    let s = converged_jet(params, CurveKind::Stable, theta, cfg, Horizon::Auto)?.0.psi;
    Ok(u - s)
}

/// Threshold `λ^{−3}` that ends the collision window.
pub fn stopping_threshold<T: Real>(params: &CocycleParams<T>) -> T {
    params.lambda().powi(-3)
}

/// Inflated regions `⋃_{j<k} ⋃_{m ≤ 20·2^j M_j} (I_j ± mω)` for `σ̂`.
fn inflated_regions<T: Real>(ladder: &ScaleLadder<T>, k: usize) -> Result<Vec<CircleArc<T>>> {
    let mut arcs = Vec::new();
    for j in 0..k.min(ladder.levels.len()) {
        let level = ladder.level(j)?;
        let count = 20u64.saturating_mul(1 << j).saturating_mul(level.m.ok_or(LabError::ScaleOverflow)?);
        if count > REGION_ARC_CAP {
            return Err(LabError::HorizonExceeded { cap: REGION_ARC_CAP });
        }
        for m in -(count as i64)..=(count as i64) {
            arcs.push(level.arc.shifted(ladder.rotation.frac_mul(m)));
        }
    }
    Ok(arcs)
}

/// Stopping times at `θ` in the collision window `d(θ) < λ^{−3}`.
///
/// `σ⁺` is the smallest `s ≥ 1` with `d(θ + (s+1)ω) ≥ λ^{−3}` and `σ⁻` the
/// smallest `s ≥ 1` with `d(θ − (s+1)ω) ≥ λ^{−3}`. `σ̂±` is the largest
/// `s ≤ σ±` such that `θ ± iω` avoids the inflated regions of the levels
/// below `level_k` for `1 ≤ i ≤ s`; with `level_k = None` (no certified
/// level) or `0` there is nothing to avoid and `σ̂± = σ±`.
pub fn stopping_times<T: Real>(
    params: &CocycleParams<T>,
    theta: T,
    ladder: Option<&ScaleLadder<T>>,
    level_k: Option<usize>,
    cfg: &HorizonConfig<T>,
    cap: u64,
) -> Result<StoppingTimes<T>> {
    let thr = stopping_threshold(params);
    let gap = section_gap(params, theta, cfg)?;
    if !(gap < thr) {
        return Err(LabError::NotInCollisionWindow { theta: theta.f64(), gap: gap.f64(), threshold: thr.f64() });
    }
    let rot = &params.rotation;
    let sigma = |sign: i64| -> Result<u64> {
        for s in 1..=cap {
            if section_gap(params, rot.advance(theta, sign * (s as i64 + 1)), cfg)? >= thr {
                return Ok(s);
            }
        }
        Err(LabError::HorizonExceeded { cap })
    };
    let sigma_plus = sigma(1)?;
    let sigma_minus = sigma(-1)?;
    let regions = match (ladder, level_k) {
        (Some(l), Some(k)) if k > 0 => inflated_regions(l, k)?,
        _ => Vec::new(),
    };
    let hat = |sign: i64, sigma: u64| -> u64 {
        if regions.is_empty() {
            return sigma;
        }
        for i in 1..=sigma {
            let t = rot.advance(theta, sign * i as i64);
            if regions.iter().any(|a| a.contains(t)) {
                return i - 1;
            }
        }
        sigma
    };
    let sigma_hat_plus = hat(1, sigma_plus);
    let sigma_hat_minus = hat(-1, sigma_minus);
    let frac = |s: u64, h: u64| T::from_count(s - h) / T::from_count(s);
    let eta = frac(sigma_plus, sigma_hat_plus).max(frac(sigma_minus, sigma_hat_minus));
    Ok(StoppingTimes { theta, gap, sigma_plus, sigma_minus, sigma_hat_plus, sigma_hat_minus, eta })
}

/// Stopping-time bound `3 + 2 log_λ(1/δ)`.
pub fn stopping_time_bound<T: Real>(lambda: T, delta: T) -> T {
    T::c(3.0) + T::c(2.0) * delta.recip().ln() / lambda.ln()
}

/// Chooses `I(E) = I_k + ω` for the `k` with `N_{k−1}/30 ≤ max σ± < N_k/30`,
/// falling back to `I₀ + ω` when `max σ± < N₀/30`.
pub fn select_critical_interval<T: Real>(ladder: &ScaleLadder<T>, sigma_max: u64) -> Result<(usize, CircleArc<T>)> {
    let s = (sigma_max as f64).log10();
    let below = |k: usize| -> bool {
        // σ < N_k/30, compared in logarithms so that huge N_k are handled.
        let l = &ladder.levels[k];
        match l.n_return {
            Some(n) => (sigma_max as f64) < n as f64 / 30.0,
            None => s < l.log10_n_return - 30f64.log10(),
        }
    };
    let shifted = |k: usize| {
        let arc = ladder.levels[k].arc;
        arc.shifted(ladder.rotation.omega)
    };
    if below(0) {
        return Ok((0, shifted(0)));
    }
    for k in 1..ladder.levels.len() {
        if !below(k - 1) && below(k) {
            return Ok((k, shifted(k)));
        }
    }
    Err(LabError::LadderExhausted { max_level: ladder.max_level(), sigma: sigma_max })
}
