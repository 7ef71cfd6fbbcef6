//! Spectral-edge location, minimum-gap profiles, and the two asymptotic fits:
//! `δ(E)` against `E₀ − E` (linear) and `‖ψ‖_{C¹}` against `δ` (power law).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arcs::CircleArc;
use crate::cocycle::CocycleParams;
use crate::curves::{golden_min, CurvePair, GridConfig, HorizonConfig};
use crate::error::{LabError, Result};
use crate::ladder::{section_gap, select_critical_interval, stopping_threshold, stopping_time_bound, stopping_times, ScaleLadder};
use crate::scalar::Real;

/// How an edge estimate was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeMethod {
    Bisection,
    Extrapolation,
    /// Bisection result confirmed by extrapolation within three bracket widths
    /// (or within the requested tolerance, whichever is larger).
    CrossValidated,
}

/// Estimate of the bottom `E₀` of the spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeEstimate<T> {
    pub e0: T,
    /// Final bracket: the predicate holds at `lo` and fails at `hi`.
    pub bracket: (T, T),
    pub method: EdgeMethod,
    pub iterations: u32,
    /// Linear extrapolation of `δ(E)` to zero from energies below the bracket.
    pub extrapolated: Option<T>,
    /// Diagnostics such as a non-monotone predicate.
    pub warnings: Vec<String>,
    /// Every bracket visited, starting with the initial one.
    pub history: Vec<(T, T)>,
}

/// Controls for [`find_edge`] and the minimum-gap search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeOptions<T> {
    /// The predicate fails when the minimum gap is below this floor.
    pub gap_floor: T,
    /// Coarse grid used to locate the minimum gap.
    pub probe_points: usize,
    /// Energy step between extrapolation samples.
    pub extrapolation_step: T,
    /// Number of extrapolation samples.
    pub extrapolation_points: usize,
    pub horizon: HorizonConfig<T>,
}

impl<T: Real> EdgeOptions<T> {
    /// Defaults: floor `0`, 512 probes, 8 samples spaced `10⁻⁹`.
    pub fn for_params(params: &CocycleParams<T>) -> Self {
        Self {
            gap_floor: T::zero(),
            probe_points: 512,
            extrapolation_step: T::c(1e-9),
            extrapolation_points: 8,
            horizon: HorizonConfig::for_params(params),
        }
    }
}

/// Minimum of `d(θ) = ψ^u(θ) − ψ^s(θ)`: coarse grid plus golden-section
/// refinement to `10⁻¹²` in `θ`. Returns `(θ_c, δ)`.
pub fn min_gap<T: Real>(params: &CocycleParams<T>, probes: usize, cfg: &HorizonConfig<T>) -> Result<(T, T)> {
    let n = probes.max(8);
    let thetas: Vec<T> = (0..n).map(|i| T::from_count(i as u64) / T::from_count(n as u64)).collect();
    let gaps: Vec<T> = thetas.par_iter().map(|&t| section_gap(params, t, cfg)).collect::<Result<_>>()?;
    let i = (0..n).fold(0, |b, i| if gaps[i] < gaps[b] { i } else { b });
    refine_min(params, thetas[i], T::one() / T::from_count(n as u64), cfg)
}

fn refine_min<T: Real>(params: &CocycleParams<T>, center: T, half: T, cfg: &HorizonConfig<T>) -> Result<(T, T)> {
    let f = |t: T| section_gap(params, t.frac_angle(), cfg);
    let (t, v) = golden_min(f, center - half, center + half, T::c(1e-12))?;
    let here = f(center)?;
    Ok(if here < v { (center, here) } else { (t.frac_angle(), v) })
}

/// Edge predicate: both sections converge and the minimum gap exceeds the
/// floor. Failure to converge or leaving the positive cone counts as `false`.
pub fn edge_predicate<T: Real>(params: &CocycleParams<T>, opts: &EdgeOptions<T>) -> Result<bool> {
    match min_gap(params, opts.probe_points, &opts.horizon) {
        Ok((_, d)) => Ok(d > opts.gap_floor),
        Err(e) if e.is_hyperbolicity_failure() => Ok(false),
        Err(e) => Err(e),
    }
}

/// Locates `E₀` by bisection on [`edge_predicate`] and cross-checks it with a
/// linear extrapolation of `δ(E)` from energies just below the bracket.
pub fn find_edge<T: Real>(base: &CocycleParams<T>, bracket: (T, T), tol: T, opts: &EdgeOptions<T>) -> Result<EdgeEstimate<T>> {
    let (mut lo, mut hi) = bracket;
    let pred = |e: T| edge_predicate(&base.with_energy(e), opts);
    let invalid = |reason: &str| LabError::BracketInvalid { lo: lo.f64(), hi: hi.f64(), reason: reason.into() };
    if !(lo < hi) {
        return Err(invalid("lo must be below hi"));
    }
    if !pred(lo)? {
        return Err(invalid("sections do not converge with a positive gap at lo"));
    }
    if pred(hi)? {
        return Err(invalid("predicate still holds at hi"));
    }
    let mut iterations = 0;
    let mut warnings = Vec::new();
    let mut history = vec![(lo, hi)];
    while hi - lo > tol {
        let mid = lo + (hi - lo) / T::c(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        if pred(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
        history.push((lo, hi));
    }
    // Non-monotonicity probe: the predicate must hold a few widths below lo.
    let width = (hi - lo).max(T::epsilon());
    for k in [4.0, 16.0, 64.0] {
        let e = lo - T::c(k) * width;
        if !pred(e)? {
            warnings.push(format!("NonMonotonePredicate: predicate fails at E = {:e} below the bracket", e.f64()));
            lo = e - width;
            history.push((lo, hi));
        }
    }
    let extrapolated = extrapolate_edge(base, lo, opts).ok();
    let e0 = lo;
    let method = match extrapolated {
        Some(x) if (x - e0).abs() <= T::c(3.0) * tol.max(hi - lo) => EdgeMethod::CrossValidated,
        _ => EdgeMethod::Bisection,
    };
    Ok(EdgeEstimate { e0, bracket: (lo, hi), method, iterations, extrapolated, warnings, history })
}

/// Fits `δ(E) = α + βE` at `E_i = below − i·step` and returns the root `−α/β`.
pub fn extrapolate_edge<T: Real>(base: &CocycleParams<T>, below: T, opts: &EdgeOptions<T>) -> Result<T> {
    let pts: Vec<(T, T)> = (1..=opts.extrapolation_points)
        .into_par_iter()
        .map(|i| {
            let e = below - T::from_count(i as u64) * opts.extrapolation_step;
            Ok((e, min_gap(&base.with_energy(e), opts.probe_points, &opts.horizon)?.1))
        })
        .collect::<Result<_>>()?;
    // Centre the abscissae for conditioning.
    let x: Vec<T> = pts.iter().map(|p| (p.0 - below) / opts.extrapolation_step).collect();
    let y: Vec<T> = pts.iter().map(|p| p.1).collect();
    let fit = least_squares(&x, &y, 2)?;
    let root = -fit[0] / fit[1];
    Ok(below + root * opts.extrapolation_step)
}

/// Ordinary least squares for a polynomial of the given number of
/// coefficients (`c₀ + c₁x + …`), via normal equations with partial pivoting.
pub fn least_squares<T: Real>(x: &[T], y: &[T], ncoef: usize) -> Result<Vec<T>> {
    if x.len() != y.len() || x.len() < ncoef {
        return Err(LabError::invalid("least squares needs at least as many points as coefficients"));
    }
    let mut a = vec![vec![T::zero(); ncoef + 1]; ncoef];
    for (&xi, &yi) in x.iter().zip(y) {
        let mut pow = vec![T::one(); ncoef];
        for k in 1..ncoef {
            pow[k] = pow[k - 1] * xi;
        }
        for r in 0..ncoef {
            for c in 0..ncoef {
                a[r][c] = a[r][c] + pow[r] * pow[c];
            }
            a[r][ncoef] = a[r][ncoef] + pow[r] * yi;
        }
    }
    for col in 0..ncoef {
        let piv = (col..ncoef).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()).unwrap();
        a.swap(col, piv);
        if a[col][col] == T::zero() {
            return Err(LabError::invalid("singular least-squares system"));
        }
        for r in 0..ncoef {
            if r != col {
                let f = a[r][col] / a[col][col];
                let pivot_row = a[col].clone();
                for (x, &p) in a[r].iter_mut().zip(&pivot_row).skip(col) {
                    *x = *x - f * p;
                }
            }
        }
    }
    Ok((0..ncoef).map(|i| a[i][ncoef] / a[i][i]).collect())
}

/// Shape of the gap near its minimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapProfile<T> {
    pub energy: T,
    /// `δ(E) = min_θ (ψ^u − ψ^s)`.
    pub delta: T,
    pub theta_c: T,
    /// `c` in the fit `d(θ_c + x) ≈ a + bx + cx²`.
    pub quad_coeff: T,
    /// Fit window around `θ_c`.
    pub window: CircleArc<T>,
    /// RMS of the fit residual divided by `δ`.
    pub fit_residual: T,
    /// A second local minimum within a factor 2 of `δ` was seen.
    pub non_unique_minimum: bool,
}

/// Number of samples in the quadratic fit window.
pub const FIT_SAMPLES: usize = 257;

/// Gap profile from a computed curve pair: golden refinement of `θ_c`, then a
/// least-squares quadratic on `|θ − θ_c| ≤ 8√(δ/c_init)`, where `c_init` is
/// half the recursion value of `∂²_θ d` at `θ_c`.
pub fn gap_profile<T: Real>(params: &CocycleParams<T>, pair: &CurvePair<T>, cfg: &HorizonConfig<T>) -> Result<GapProfile<T>> {
    let n = pair.len();
    if n < 3 {
        return Err(LabError::invalid("curve pair has too few samples"));
    }
    let (imin, _) = pair.min_gap_index();
    let a = pair.thetas[(imin + n - 1) % n];
    let b = pair.thetas[(imin + 1) % n];
    let t = pair.thetas[imin];
    let half = (t - a).wrap_signed().abs().max((b - t).wrap_signed().abs());
    let (theta_c, delta) = refine_min(params, t, half, cfg)?;
    if !(delta > T::zero()) {
        return Err(LabError::NotUniformlyHyperbolic { theta: theta_c.f64(), step: 0, value: delta.f64() });
    }
    let u = crate::curves::evaluate_unstable(params, theta_c, cfg, crate::curves::Horizon::Auto)?;
    let s = crate::curves::evaluate_stable(params, theta_c, cfg, crate::curves::Horizon::Auto)?;
    let c_init = (u.d2_theta - s.d2_theta) / T::c(2.0);
    let c_init = if c_init > T::zero() { c_init } else { params.lambda_sq };
    let hw = T::c(8.0) * (delta / c_init).sqrt();
    let m = FIT_SAMPLES;
    let xs: Vec<T> = (0..m).map(|i| -hw + T::c(2.0) * hw * T::from_count(i as u64) / T::from_count(m as u64 - 1)).collect();
    let ys: Vec<T> = xs.par_iter().map(|&x| section_gap(params, (theta_c + x).frac_angle(), cfg)).collect::<Result<_>>()?;
    let scaled: Vec<T> = xs.iter().map(|&x| x / hw).collect();
    let coef = least_squares(&scaled, &ys, 3)?;
    let quad_coeff = coef[2] / (hw * hw);
    let sq: T = scaled
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| {
            let r = y - (coef[0] + coef[1] * x + coef[2] * x * x);
            r * r
        })
        .fold(T::zero(), |acc, v| acc + v);
    let fit_residual = (sq / T::from_count(m as u64)).sqrt() / delta;

    // Other local minima of the sampled gap outside the fit window.
    let window = CircleArc::new(theta_c, hw);
    let non_unique_minimum = (0..n).any(|i| {
        let g = pair.gap(i);
        g <= T::c(2.0) * delta
            && !window.contains(pair.thetas[i])
            && g <= pair.gap((i + n - 1) % n)
            && g <= pair.gap((i + 1) % n)
    });
    Ok(GapProfile { energy: params.energy, delta, theta_c, quad_coeff, window, fit_residual, non_unique_minimum })
}

/// Linear law fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit<T> {
    /// Slope of `δ = slope·(E₀ − E)` through the origin.
    pub slope: T,
    pub stderr: T,
    /// Coefficient of determination of the through-origin fit (against the mean).
    pub r2: T,
    /// Affine variant `δ = intercept + slope_affine·(E₀ − E)`.
    pub slope_affine: T,
    pub intercept_affine: T,
}

fn check_span<T: Real>(x: &[T], min_decades: f64, min_count: usize) -> Result<()> {
    let (lo, hi) = x.iter().fold((f64::INFINITY, 0f64), |(a, b), v| (a.min(v.f64()), b.max(v.f64())));
    let decades = if lo > 0.0 { (hi / lo).log10() } else { 0.0 };
    if x.len() < min_count || decades < min_decades {
        return Err(LabError::SpanTooNarrow { decades, count: x.len(), min_decades, min_count });
    }
    Ok(())
}

/// Fits `δ` against `E₀ − E` (pairs `(E₀ − E, δ)`); needs ≥ 8 samples over ≥ 1.5 decades.
pub fn fit_linear_gap<T: Real>(samples: &[(T, T)]) -> Result<LinearFit<T>> {
    let x: Vec<T> = samples.iter().map(|s| s.0).collect();
    let y: Vec<T> = samples.iter().map(|s| s.1).collect();
    check_span(&x, 1.5, 8)?;
    let n = T::from_count(x.len() as u64);
    let sxx = x.iter().fold(T::zero(), |a, &v| a + v * v);
    let sxy = x.iter().zip(&y).fold(T::zero(), |a, (&u, &v)| a + u * v);
    let slope = sxy / sxx;
    let ss_res = x.iter().zip(&y).fold(T::zero(), |a, (&u, &v)| a + (v - slope * u).powi(2));
    let mean = y.iter().fold(T::zero(), |a, &v| a + v) / n;
    let ss_tot = y.iter().fold(T::zero(), |a, &v| a + (v - mean).powi(2));
    let stderr = (ss_res / (n - T::one()) / sxx).sqrt();
    let r2 = if ss_tot > T::zero() { T::one() - ss_res / ss_tot } else { T::one() };
    let aff = least_squares(&x, &y, 2)?;
    Ok(LinearFit { slope, stderr, r2, slope_affine: aff[1], intercept_affine: aff[0] })
}

/// Power-law fit of a norm against `δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormFit<T> {
    pub exponent: T,
    pub stderr: T,
    pub log_prefactor: T,
    /// `max(0, 2·(exponent + 1/2))`.
    pub eps_hat: T,
}

/// Least squares of `log c1` against `log δ` (pairs `(δ, c1)`).
pub fn fit_norm_exponent<T: Real>(samples: &[(T, T)]) -> Result<NormFit<T>> {
    let d: Vec<T> = samples.iter().map(|s| s.0).collect();
    check_span(&d, 1.5, 8)?;
    let x: Vec<T> = d.iter().map(|v| v.ln()).collect();
    let y: Vec<T> = samples.iter().map(|s| s.1.ln()).collect();
    let c = least_squares(&x, &y, 2)?;
    let n = T::from_count(x.len() as u64);
    let mean = x.iter().fold(T::zero(), |a, &v| a + v) / n;
    let sxx = x.iter().fold(T::zero(), |a, &v| a + (v - mean).powi(2));
    let ss_res = x.iter().zip(&y).fold(T::zero(), |a, (&u, &v)| a + (v - c[0] - c[1] * u).powi(2));
    let stderr = (ss_res / (n - T::c(2.0)) / sxx).sqrt();
    let eps_hat = (T::c(2.0) * (c[1] + T::c(0.5))).max(T::zero());
    Ok(NormFit { exponent: c[1], stderr, log_prefactor: c[0], eps_hat })
}

/// Three-point second differences of `δ(E)` at the interior points of a
/// (possibly non-uniform) energy sequence, as `(E, δ'')`.
pub fn second_differences<T: Real>(points: &[(T, T)]) -> Vec<(T, T)> {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    p.windows(3)
        .map(|w| {
            let (e1, d1) = w[0];
            let (e2, d2) = w[1];
            let (e3, d3) = w[2];
            let s = T::c(2.0) * ((d3 - d2) / (e3 - e2) - (d2 - d1) / (e2 - e1)) / (e3 - e1);
            (e2, s)
        })
        .collect()
}

/// Geometric schedule `E_j = E₀ − g·2^{−j}` for `j = 0..count`.
pub fn energy_schedule<T: Real>(e0: T, g: T, count: usize) -> Vec<T> {
    (0..count).map(|j| e0 - g * T::c(0.5).powi(j as i32)).collect()
}

/// Default geometric scale `g = 1/(2λ²)`.
pub fn default_schedule_scale<T: Real>(params: &CocycleParams<T>) -> T {
    (T::c(2.0) * params.lambda_sq).recip()
}

/// One sweep energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow<T> {
    pub energy: T,
    pub e0_minus_e: T,
    pub profile: GapProfile<T>,
    pub c1_norm_u: T,
    pub c1_norm_s: T,
    pub c2_norm_u: T,
    pub c2_norm_s: T,
    /// Stopping-time maxima over probes in the collision window (`None` when
    /// the window `d < λ^{−3}` contains no grid point).
    pub sigma_plus_max: Option<u64>,
    pub sigma_minus_max: Option<u64>,
    pub stopping_probes: usize,
    /// Probes where `σ⁺ ≤ 3 + 2 log_λ(1/δ)` failed.
    pub st_bound_violations: usize,
    /// Same bound evaluated with `d(θ)` instead of `δ` (diagnostic).
    pub st_bound_violations_local: usize,
    /// Selected ladder level, `-1` when the ladder is exhausted.
    pub level_k: i64,
    /// `|I(E)|/√δ` when a level was selected.
    pub interval_length_ratio: Option<T>,
    pub eta: T,
    pub lyapunov: T,
    pub residual_max: T,
    pub grid_points: usize,
}

/// Settings of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions<T> {
    pub grid: GridConfig,
    pub horizon: HorizonConfig<T>,
    /// Maximum stopping-time probes per energy.
    pub max_stopping_probes: usize,
    pub stopping_cap: u64,
    pub lyapunov_samples: usize,
}

impl<T: Real> SweepOptions<T> {
    pub fn for_params(params: &CocycleParams<T>) -> Self {
        Self {
            grid: GridConfig::default(),
            horizon: HorizonConfig::for_params(params),
            max_stopping_probes: 32,
            stopping_cap: 100_000,
            lyapunov_samples: 100_000,
        }
    }
}

/// Computes every per-energy quantity of the sweep at `params.energy`.
pub fn sweep_row<T: Real>(params: &CocycleParams<T>, e0: T, ladder: Option<&ScaleLadder<T>>, opts: &SweepOptions<T>) -> Result<SweepRow<T>> {
    let pair = CurvePair::compute(params, &opts.grid, &opts.horizon)?;
    let profile = gap_profile(params, &pair, &opts.horizon)?;
    let uc = pair.unstable_curve();
    let sc = pair.stable_curve();

    // Stopping times on grid points of the collision window, evenly thinned.
    let thr = stopping_threshold(params);
    let window: Vec<T> = (0..pair.len()).filter(|&i| pair.gap(i) < thr).map(|i| pair.thetas[i]).collect();
    let stride = window.len().div_ceil(opts.max_stopping_probes.max(1)).max(1);
    let mut probes: Vec<T> = window.iter().step_by(stride).copied().collect();
    if !window.is_empty() {
        probes.push(profile.theta_c);
    }
    let first_pass: Vec<_> = probes
        .par_iter()
        .map(|&t| stopping_times(params, t, None, None, &opts.horizon, opts.stopping_cap))
        .collect::<Result<_>>()?;
    let sigma_max = first_pass.iter().map(|s| s.sigma_plus.max(s.sigma_minus)).max();
    let (level_k, interval) = match (ladder, sigma_max) {
        (Some(l), Some(s)) => match select_critical_interval(l, s) {
            Ok((k, arc)) => (k as i64, Some(arc)),
            Err(LabError::LadderExhausted { .. }) => (-1, None),
            Err(e) => return Err(e),
        },
        _ => (-1, None),
    };
    let times = if level_k > 0 {
        probes
            .par_iter()
            .map(|&t| stopping_times(params, t, ladder, Some(level_k as usize), &opts.horizon, opts.stopping_cap))
            .collect::<Result<Vec<_>>>()?
    } else {
        first_pass
    };
    let lam = params.lambda();
    let bound = stopping_time_bound(lam, profile.delta);
    let st_bound_violations = times.iter().filter(|s| T::from_count(s.sigma_plus) > bound).count();
    let st_bound_violations_local =
        times.iter().filter(|s| T::from_count(s.sigma_plus) > stopping_time_bound(lam, s.gap)).count();
    let eta = match sigma_max {
        Some(m) if m > 0 => times
            .iter()
            .map(|s| T::from_count((s.sigma_plus - s.sigma_hat_plus).max(s.sigma_minus - s.sigma_hat_minus)) / T::from_count(m))
            .fold(T::zero(), |a, b| a.max(b)),
        _ => T::zero(),
    };
    let lyapunov =
        crate::curves::lyapunov_exponent(params, T::c(0.1), opts.lyapunov_samples, 100, &opts.horizon)?;
    Ok(SweepRow {
        energy: params.energy,
        e0_minus_e: e0 - params.energy,
        c1_norm_u: uc.c1_norm,
        c1_norm_s: sc.c1_norm,
        c2_norm_u: uc.c2_norm,
        c2_norm_s: sc.c2_norm,
        sigma_plus_max: times.iter().map(|s| s.sigma_plus).max(),
        sigma_minus_max: times.iter().map(|s| s.sigma_minus).max(),
        stopping_probes: times.len(),
        st_bound_violations,
        st_bound_violations_local,
        level_k,
        interval_length_ratio: interval.map(|a| a.length() / profile.delta.sqrt()),
        eta,
        lyapunov,
        residual_max: pair.max_residual(),
        grid_points: pair.len(),
        profile,
    })
}

/// `ε(E) = 2λ⁴ η(E) σ⁺_E / log_λ(1/δ)` per sweep row, as `(E, ε, η)`.
pub fn epsilon_trace<T: Real>(lambda: T, rows: &[SweepRow<T>]) -> Vec<(T, T, T)> {
    rows.iter()
        .map(|r| {
            let sigma = T::from_count(r.sigma_plus_max.unwrap_or(0));
            let log = r.profile.delta.recip().ln() / lambda.ln();
            let eps = if r.eta == T::zero() { T::zero() } else { T::c(2.0) * lambda.powi(4) * r.eta * sigma / log };
            (r.energy, eps, r.eta)
        })
        .collect()
}

/// Summary of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsReport<T> {
    pub gap_samples: Vec<GapProfile<T>>,
    pub linear: LinearFit<T>,
    pub norm_u: NormFit<T>,
    pub norm_s: NormFit<T>,
    /// `(E, ε, η)`.
    pub epsilon_of_e: Vec<(T, T, T)>,
    /// `(E, |I(E)|/√δ)` where a ladder level was selected.
    pub interval_length_ratio: Vec<(T, T)>,
    /// `(E, δ'')` at interior energies.
    pub second_differences: Vec<(T, T)>,
}

/// Runs all fits over completed sweep rows.
pub fn asymptotics_report<T: Real>(lambda: T, rows: &[SweepRow<T>]) -> Result<AsymptoticsReport<T>> {
    let lin: Vec<(T, T)> = rows.iter().map(|r| (r.e0_minus_e, r.profile.delta)).collect();
    let nu: Vec<(T, T)> = rows.iter().map(|r| (r.profile.delta, r.c1_norm_u)).collect();
    let ns: Vec<(T, T)> = rows.iter().map(|r| (r.profile.delta, r.c1_norm_s)).collect();
    let de: Vec<(T, T)> = rows.iter().map(|r| (r.energy, r.profile.delta)).collect();
    Ok(AsymptoticsReport {
        gap_samples: rows.iter().map(|r| r.profile.clone()).collect(),
        linear: fit_linear_gap(&lin)?,
        norm_u: fit_norm_exponent(&nu)?,
        norm_s: fit_norm_exponent(&ns)?,
        epsilon_of_e: epsilon_trace(lambda, rows),
        interval_length_ratio: rows.iter().filter_map(|r| r.interval_length_ratio.map(|q| (r.energy, q))).collect(),
        second_differences: second_differences(&de),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_linear_data_is_fitted_exactly() {
        let pts: Vec<(f64, f64)> = (0..12).map(|j| (0.1 * 0.5f64.powi(j), 0.1 * 0.5f64.powi(j))).collect();
        let f = fit_linear_gap(&pts).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-14);
        assert!((f.r2 - 1.0).abs() < 1e-14);
        assert!(f.intercept_affine.abs() < 1e-14);
    }

    #[test]
    fn synthetic_power_law_is_fitted_exactly() {
        let pts: Vec<(f64, f64)> = (0..12).map(|j| {
            let d = 0.1 * 0.5f64.powi(j);
            (d, d.powf(-0.5))
        }).collect();
        let f = fit_norm_exponent(&pts).unwrap();
        assert!((f.exponent + 0.5).abs() < 1e-12);
        assert_eq!(f.eps_hat, 0.0);
    }

    #[test]
    fn narrow_span_is_rejected() {
        let pts: Vec<(f64, f64)> = (0..12).map(|j| (1.0 + 0.1 * j as f64, 1.0)).collect();
        assert!(matches!(fit_linear_gap(&pts), Err(LabError::SpanTooNarrow { .. })));
        assert!(matches!(fit_norm_exponent(&pts[..4]), Err(LabError::SpanTooNarrow { .. })));
    }

    #[test]
    fn second_difference_of_quadratic() {
        let pts: Vec<(f64, f64)> = [0.0, 0.5, 0.75, 0.875].iter().map(|&e| (e, 3.0 * e * e - e)).collect();
        for (_, s) in second_differences(&pts) {
            assert!((s - 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_eta_gives_zero_epsilon() {
        assert_eq!(default_schedule_scale(&CocycleParams::<f64>::reference(30.0, 0.0)), 1.0 / 60.0);
        let e = energy_schedule(0.0, 1.0, 3);
        assert_eq!(e, vec![-1.0, -0.5, -0.25]);
    }

    #[test]
    fn bracket_with_both_ends_convergent_is_invalid() {
        let p = CocycleParams::<f64>::reference(30.0, 0.0);
        let opts = EdgeOptions { probe_points: 64, ..EdgeOptions::for_params(&p) };
        assert!(matches!(find_edge(&p, (-10.0, -9.0), 1e-6, &opts), Err(LabError::BracketInvalid { .. })));
    }

    #[test]
    fn gap_decreases_toward_the_edge() {
        let p = CocycleParams::<f64>::reference(30.0, 0.0);
        let cfg = HorizonConfig::for_params(&p);
        let d: Vec<f64> = [-0.3, -0.2, -0.1].iter().map(|&e| min_gap(&p.with_energy(e), 256, &cfg).unwrap().1).collect();
        assert!(d[0] > d[1] && d[1] > d[2]);
    }

    #[test]
    fn symmetric_potential_puts_minimum_next_to_the_potential_minimum() {
        // With the minimum of v at 0, the closest approach of the sections
        // happens one step after the potential well, near θ = ω.
        let p = CocycleParams::<f64>::reference(30.0, -1.0);
        let cfg = HorizonConfig::for_params(&p);
        let (tc, _) = min_gap(&p, 512, &cfg).unwrap();
        assert!((tc - p.rotation.omega).wrap_signed().abs() < 0.01, "θ_c = {tc}");
    }

    #[test]
    fn least_squares_recovers_polynomial() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 / 10.0 - 1.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 - v + 0.5 * v * v).collect();
        let c = least_squares(&x, &y, 3).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-12 && (c[1] + 1.0).abs() < 1e-12 && (c[2] - 0.5).abs() < 1e-12);
    }
}
