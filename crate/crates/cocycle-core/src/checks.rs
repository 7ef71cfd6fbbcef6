//! Property suite: algebraic identities along randomised coupled orbits,
//! counting bounds for interval systems, region transitions and ladder
//! conditions. Failures are reported as data, with the first offending orbit
//! and step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arcs::CircleArc;
use crate::cocycle::{
    derivative_difference, forward_with_theta_derivative, log_distance_product, log_distortion_product, CocycleParams,
    FibreMap, ProjectiveOrbit,
};
use crate::error::Result;
use crate::ladder::{check_condition_c1, check_condition_c2, ScaleLadder, Verdict};
use crate::rotation::{empirical_visit_frequency, IntervalSystem, TimeDirection};
use crate::scalar::Real;

/// Where a check first failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    /// Index of the sampled orbit or system.
    pub sample: usize,
    /// Step along the orbit (`k` in `r_k`).
    pub step: usize,
    pub theta: f64,
    pub detail: String,
}

/// Outcome of one property.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub verdict: Verdict,
    /// Number of individual comparisons made.
    pub checked: u64,
    /// Worst observed error in the check's own metric.
    pub max_error: f64,
    pub tolerance: f64,
    pub failure: Option<Failure>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Collection of check results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub checks: Vec<CheckResult>,
}

impl CheckReport {
    /// Whether no check failed (inconclusive checks do not count as failures).
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.verdict != Verdict::Fail)
    }

    /// Looks a check up by name.
    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Running accumulator for one check.
#[derive(Debug, Clone)]
struct Tally {
    name: &'static str,
    tolerance: f64,
    checked: u64,
    max_error: f64,
    failure: Option<Failure>,
}

impl Tally {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self { name, tolerance, checked: 0, max_error: 0.0, failure: None }
    }

    fn record(&mut self, err: f64, at: impl FnOnce() -> Failure) {
        self.checked += 1;
        let err = if err.is_nan() { f64::INFINITY } else { err };
        self.max_error = self.max_error.max(err);
        if err > self.tolerance && self.failure.is_none() {
            self.failure = Some(at());
        }
    }

    fn merge(&mut self, other: Tally) {
        self.checked += other.checked;
        self.max_error = self.max_error.max(other.max_error);
        if self.failure.is_none() {
            self.failure = other.failure;
        }
    }

    fn finish(self) -> CheckResult {
        let verdict = if self.failure.is_some() {
            Verdict::Fail
        } else if self.checked == 0 {
            Verdict::Inconclusive
        } else {
            Verdict::Pass
        };
        CheckResult {
            name: self.name.into(),
            verdict,
            checked: self.checked,
            max_error: self.max_error,
            tolerance: self.tolerance,
            failure: self.failure,
        }
    }
}

/// Settings of the identity suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityConfig {
    pub orbits: usize,
    pub max_length: usize,
    pub seed: u64,
    /// Relative tolerance for every identity.
    pub tolerance: f64,
    /// Orbits are cut once a difference of two fibre values is smaller than
    /// the values themselves by this factor: beyond that point the directly
    /// computed difference has lost too many digits to serve as a reference.
    pub cancellation_limit: f64,
}

impl Default for IdentityConfig {
    fn default() -> Self {
        Self { orbits: 1000, max_length: 40, seed: 1, tolerance: 1e-8, cancellation_limit: 1e6 }
    }
}

/// Names of the identity checks, in report order.
pub const IDENTITY_CHECKS: [&str; 8] = [
    "orbit_replay",
    "order_preservation",
    "distance_recursion",
    "distance_product",
    "product_relation",
    "distortion_monotonicity",
    "distortion_inequality",
    "derivative_difference",
];

/// Name of the remainder-bound check.
pub const REMAINDER_CHECK: &str = "remainder_bound";

fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

struct Sample<T> {
    r: ProjectiveOrbit<T>,
    z: ProjectiveOrbit<T>,
    s: ProjectiveOrbit<T>,
    /// Steps `0..=valid` are inside `B` and well separated.
    valid: usize,
}

fn sample_orbits<T: Real, M: FibreMap<T> + ?Sized>(
    map: &M,
    params: &CocycleParams<T>,
    rng: &mut ChaCha8Rng,
    cfg: &IdentityConfig,
) -> Option<(Sample<T>, T, T)> {
    let bands = params.bands();
    let (lo, hi) = bands.b();
    let (lo, hi) = (lo.f64().ln(), hi.f64().ln());
    let theta0 = T::c(rng.gen::<f64>());
    let mut seeds: Vec<f64> = (0..3).map(|_| rng.gen_range(lo..hi).exp()).collect();
    seeds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let l2 = params.lambda_sq.f64();
    let dr0 = T::c(rng.gen_range(-l2..l2));
    let ds0 = T::c(rng.gen_range(-l2..l2));
    let n = cfg.max_length;
    let s = ProjectiveOrbit::forward(map, theta0, T::c(seeds[0]), n).ok()?;
    let z = ProjectiveOrbit::forward(map, theta0, T::c(seeds[1]), n).ok()?;
    let r = ProjectiveOrbit::forward(map, theta0, T::c(seeds[2]), n).ok()?;
    let limit = T::c(cfg.cancellation_limit);
    let ok = |k: usize| {
        let inside = [r.r[k], z.r[k], s.r[k]].iter().all(|&x| bands.in_b(x));
        let sep = |a: T, b: T| (a - b).abs() * limit >= a.abs().max(b.abs());
        inside && sep(r.r[k], s.r[k]) && sep(r.r[k], z.r[k]) && sep(z.r[k], s.r[k])
    };
    let mut valid = 0;
    while valid < n && ok(valid + 1) {
        valid += 1;
    }
    if !ok(0) {
        return None;
    }
    Some((Sample { r, z, s, valid }, dr0, ds0))
}

/// Runs the algebraic identities on `cfg.orbits` random coupled orbit triples
/// `s₀ ≤ z₀ ≤ r₀` in `B`, iterated with `map` (which may be a fault-injected
/// wrapper of `params`). Each orbit is truncated at the first step where a
/// value leaves `B` or two values become too close (see
/// [`IdentityConfig::cancellation_limit`]).
pub fn identity_suite<T: Real, M: FibreMap<T> + ?Sized>(map: &M, params: &CocycleParams<T>, cfg: &IdentityConfig) -> Vec<CheckResult> {
    let tol = cfg.tolerance;
    let lam_b4 = params.band_lambda().f64().powi(4);
    let results: Vec<Vec<Tally>> = (0..cfg.orbits)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64));
            let mut t: Vec<Tally> = IDENTITY_CHECKS.iter().map(|n| Tally::new(n, tol)).collect();
            t.push(Tally::new(REMAINDER_CHECK, tol));
            let Some((smp, dr0, ds0)) = sample_orbits(map, params, &mut rng, cfg) else {
                return t;
            };
            let Sample { r, z, s, valid } = smp;
            let at = |k: usize, detail: String| {
                let theta = r.thetas[k].f64();
                move || Failure { sample: i, step: k, theta, detail }
            };
            let f = |x: T| x.f64();
            // Replay against the clean map.
            for k in 0..valid {
                for o in [&r, &z, &s] {
                    let clean = params.step(o.thetas[k], o.r[k]).map(f).unwrap_or(f64::NAN);
                    let e = rel(f(o.r[k + 1]), clean);
                    t[0].record(e, at(k, format!("r_{} = {:e}, Φ(θ_k, r_k) = {clean:e}", k + 1, f(o.r[k + 1]))));
                }
            }
            for k in 0..=valid {
                let e = (f(s.r[k]) - f(z.r[k])).max(f(z.r[k]) - f(r.r[k])).max(0.0);
                t[1].record(e, at(k, "order of coupled fibre values changed".into()));
            }
            for k in 0..valid {
                for (a, b) in [(&r, &s), (&r, &z), (&z, &s)] {
                    let lhs = f(a.r[k + 1]) - f(b.r[k + 1]);
                    let rhs = (f(a.r[k]) - f(b.r[k])) / (f(a.r[k]) * f(b.r[k]));
                    let e = rel(lhs, rhs);
                    t[2].record(e, at(k, format!("r_(k+1) − s_(k+1) = {lhs:e}, (r_k − s_k)/(r_k s_k) = {rhs:e}")));
                }
            }
            for k in 0..valid {
                let d = log_distance_product(&r, &s, 0, k).map(f).unwrap_or(f64::NAN).exp();
                let lhs = d * (f(r.r[0]) - f(s.r[0]));
                let rhs = f(r.r[k + 1]) - f(s.r[k + 1]);
                t[3].record(rel(lhs, rhs), at(k, format!("D_(0,k)(r₀ − s₀) = {lhs:e}, r_(k+1) − s_(k+1) = {rhs:e}")));
                let lrz = log_distance_product(&r, &z, 0, k).map(f).unwrap_or(f64::NAN);
                let lrs = log_distance_product(&r, &s, 0, k).map(f).unwrap_or(f64::NAN);
                let lsz = log_distortion_product(&s, &z, 0, k).map(f).unwrap_or(f64::NAN);
                t[4].record((lrz - lrs - lsz).exp_m1().abs(), at(k, "D(r,z) ≠ D(r,s)·Π(s,z)".into()));
                let psr = log_distortion_product(&s, &r, 0, k).map(f).unwrap_or(f64::NAN);
                let pzr = log_distortion_product(&z, &r, 0, k).map(f).unwrap_or(f64::NAN);
                let e = (psr - pzr).max(pzr).max(0.0);
                t[5].record(e, at(k, format!("log Π(s,r) = {psr:e}, log Π(z,r) = {pzr:e}")));
                // exp(−λ_B⁴ Σ_j 1/D_{j,k}) ≤ Π_{0,k}(s, r) ≤ 1, compared in logs.
                let mut sum = 0.0;
                let mut log_d = 0.0;
                for j in (0..=k).rev() {
                    log_d -= f(r.log_terms[j]) + f(s.log_terms[j]);
                    sum += (-log_d).exp();
                }
                let lower = -lam_b4 * sum;
                let e = (lower - psr).max(psr).max(0.0);
                t[6].record(e, at(k, format!("log Π = {psr:e} outside [{lower:e}, 0]")));
            }
            // Derivative-difference reconstruction along the clean map.
            if let (Ok((rr, dr)), Ok((ss, ds))) = (
                forward_with_theta_derivative(params, r.theta0, r.r[0], dr0, valid + 1),
                forward_with_theta_derivative(params, s.theta0, s.r[0], ds0, valid + 1),
            ) {
                for k in 0..valid {
                    let Ok(dd) = derivative_difference(&rr, &dr, &ss, &ds, k) else { break };
                    if dd.cancellation().f64() > cfg.cancellation_limit {
                        break;
                    }
                    t[7].record(dd.mismatch().f64(), at(k, format!("direct {:e}, reconstructed {:e}", f(dd.direct), f(dd.dominant + dd.remainder))));
                    let bound = 2.0 * lam_b4 * (k as f64 + 1.0) * f(dd.max_ds);
                    let e = if bound > 0.0 { ((f(dd.remainder).abs() - bound) / bound).max(0.0) } else { 0.0 };
                    t[8].record(e, at(k, format!("|R| = {:e} > {bound:e}", f(dd.remainder))));
                }
            }
            t
        })
        .collect();
    let mut total: Vec<Tally> = IDENTITY_CHECKS.iter().map(|n| Tally::new(n, tol)).collect();
    total.push(Tally::new(REMAINDER_CHECK, tol));
    for per in results {
        for (acc, t) in total.iter_mut().zip(per) {
            acc.merge(t);
        }
    }
    total.into_iter().map(Tally::finish).collect()
}

/// Settings of the counting-lemma suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountingConfig {
    pub systems: usize,
    pub steps: u64,
    pub seed: u64,
}

impl Default for CountingConfig {
    fn default() -> Self {
        Self { systems: 100, steps: 10_000, seed: 7 }
    }
}

/// Empirical visit frequencies against both analytic bounds, over random
/// collections of one to three interval systems (one or two arcs each, with
/// lengths log-uniform in `[10⁻³, 5·10⁻²]`) whose `(r, l, a)` constants are
/// measured on the orbit, alternating forward and backward time.
pub fn counting_suite<T: Real>(params: &CocycleParams<T>, cfg: &CountingConfig) -> Result<CheckResult> {
    let rot = &params.rotation;
    let per: Vec<Tally> = (0..cfg.systems)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x2545_F491_4F6C_DD1D).wrapping_add(i as u64));
            let direction = if i % 2 == 0 { TimeDirection::Forward } else { TimeDirection::Backward };
            let theta0 = T::c(rng.gen::<f64>());
            let count = rng.gen_range(1..=3);
            let systems: Vec<IntervalSystem<T>> = (0..count)
                .map(|_| {
                    let arcs = (0..rng.gen_range(1..=2))
                        .map(|_| {
                            let len = rng.gen_range(1e-3f64.ln()..5e-2f64.ln()).exp();
                            CircleArc::new(T::c(rng.gen::<f64>()), T::c(len * 0.5))
                        })
                        .collect();
                    IntervalSystem::with_measured_constants(arcs, rot, theta0, cfg.steps, direction)
                })
                .collect();
            let mut t = Tally::new("visit_frequency", 0.0);
            let rep = empirical_visit_frequency(&systems, rot, theta0, cfg.steps, direction)?;
            let f = rep.frequency.f64();
            let bound = rep.bound_no_buildup.f64().min(rep.bound_with_accumulation.f64());
            t.record((f - bound).max(0.0), || Failure {
                sample: i,
                step: cfg.steps as usize,
                theta: theta0.f64(),
                detail: format!("frequency {f} exceeds bound {bound}"),
            });
            Ok(t)
        })
        .collect::<Result<_>>()?;
    let mut total = Tally::new("visit_frequency", 0.0);
    for t in per {
        total.merge(t);
    }
    Ok(total.finish())
}

/// Region transition: for `θ₀ ∉ I₀` and `z₀ ∈ B ∖ B^s`, one step lands in
/// `B^u`; dually, for `θ₀ − ω ∉ I₀` and `z₀ ∈ B ∖ B^u`, one inverse step lands
/// in `B^s`. Energies are drawn from `[−1, 1]`.
pub fn region_transition<T: Real>(params: &CocycleParams<T>, samples: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let crit = params.critical_arc();
    let bands = params.bands();
    let (lo, hi) = bands.b();
    let (bs_hi, bu_lo) = (bands.bs().1, bands.bu().0);
    let mut t = Tally::new("region_transition", 0.0);
    for i in 0..samples {
        let theta = T::c(rng.gen::<f64>());
        let p = params.with_energy(T::c(rng.gen_range(-1.0..1.0)));
        let z = T::c(rng.gen_range(lo.f64().ln()..hi.f64().ln()).exp());
        if !crit.arc.contains(theta) && z > bs_hi {
            let z1 = p.step(theta, z).unwrap_or(T::nan());
            t.record(if bands.in_bu(z1) { 0.0 } else { 1.0 }, || Failure {
                sample: i,
                step: 1,
                theta: theta.f64(),
                detail: format!("z₀ = {:e} ↦ {:e} ∉ B^u", z.f64(), z1.f64()),
            });
        }
        let prev = params.rotation.unstep(theta);
        if !crit.arc.contains(prev) && z < bu_lo {
            let z1 = p.unstep(prev, z).unwrap_or(T::nan());
            t.record(if bands.in_bs(z1) { 0.0 } else { 1.0 }, || Failure {
                sample: i,
                step: 1,
                theta: theta.f64(),
                detail: format!("z₀ = {:e} ↤ {:e} ∉ B^s", z.f64(), z1.f64()),
            });
        }
    }
    t.finish()
}

/// Ladder conditions `(C2)_n` for the computable levels and `(C1)₀`.
pub fn ladder_checks<T: Real>(params: &CocycleParams<T>, c1_samples: usize) -> Result<Vec<CheckResult>> {
    let ladder = ScaleLadder::build(params, 1)?;
    let mut out = Vec::new();
    for n in 0..=1 {
        let name: &'static str = if n == 0 { "ladder_c2_0" } else { "ladder_c2_1" };
        let mut t = Tally::new(name, 0.0);
        if !ladder.degenerate {
            if let Ok(ok) = check_condition_c2(&ladder, n) {
                t.record(if ok { 0.0 } else { 1.0 }, || Failure { sample: n, step: 0, theta: 0.0, detail: format!("(C2)_{n} violated") });
            }
        }
        out.push(t.finish());
    }
    let mut c1 = CheckResult {
        name: "ladder_c1_0".into(),
        verdict: Verdict::Inconclusive,
        checked: 0,
        max_error: 0.0,
        tolerance: 0.0,
        failure: None,
    };
    if !ladder.degenerate {
        let rep = check_condition_c1(&ladder, params, 0, c1_samples, 1_000_000)?;
        c1.verdict = rep.verdict;
        c1.checked = rep.samples as u64 * 2;
        c1.failure = rep.counterexample.map(|c| Failure {
            sample: 0,
            step: c.step as usize,
            theta: c.theta,
            detail: format!("{} (θ₀ = {}, r₀ = {:e}, r = {:e})", c.reason, c.theta0, c.r0, c.r),
        });
        c1.max_error = if c1.failure.is_some() { 1.0 } else { 0.0 };
    }
    out.push(c1);
    Ok(out)
}

/// Settings of the full suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub identity: IdentityConfig,
    pub counting: CountingConfig,
    pub transition_samples: usize,
    pub c1_samples: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            identity: IdentityConfig::default(),
            counting: CountingConfig::default(),
            transition_samples: 10_000,
            c1_samples: 1000,
        }
    }
}

/// Runs every check. `map` drives the identity suite; pass `params` itself
/// unless a fault is being injected.
pub fn run_suite<T: Real, M: FibreMap<T> + ?Sized>(map: &M, params: &CocycleParams<T>, cfg: &SuiteConfig) -> Result<CheckReport> {
    let mut checks = identity_suite(map, params, &cfg.identity);
    checks.push(counting_suite(params, &cfg.counting)?);
    checks.push(region_transition(params, cfg.transition_samples, cfg.identity.seed));
    checks.extend(ladder_checks(params, cfg.c1_samples)?);
    Ok(CheckReport { checks })
}

/// Forward growth from the collision window: `log D_{0,i} ≥ ((i+1)/2) log λ`
/// for `0 ≤ i ≤ σ⁺`, along the orbits of `ψ^u(θ)` and `ψ^s(θ)`. Returns the
/// smallest margin `log D_{0,i} − ((i+1)/2) log λ` (non-negative when the
/// property holds).
pub fn forward_growth_margin<T: Real>(params: &CocycleParams<T>, theta: T, r0: T, s0: T, sigma_plus: u64) -> Result<T> {
    let n = sigma_plus as usize + 1;
    let r = ProjectiveOrbit::forward(params, theta, r0, n)?;
    let s = ProjectiveOrbit::forward(params, theta, s0, n)?;
    let log_lam = params.lambda().ln();
    let mut worst = T::infinity();
    for i in 0..=sigma_plus as usize {
        let d = log_distance_product(&r, &s, 0, i)?;
        worst = worst.min(d - T::from_count(i as u64 + 1) / T::c(2.0) * log_lam);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::FaultyFibreMap;

    #[test]
    fn identities_hold_on_clean_map() {
        let p = CocycleParams::<f64>::reference(30.0, -2.0);
        let cfg = IdentityConfig { orbits: 200, ..IdentityConfig::default() };
        for c in identity_suite(&p, &p, &cfg) {
            assert_eq!(c.verdict, Verdict::Pass, "{c:?}");
        }
    }

    #[test]
    fn fault_is_pinpointed() {
        let p = CocycleParams::<f64>::reference(30.0, -2.0);
        let arc = CircleArc::new(0.3, 0.05);
        let bad = FaultyFibreMap { inner: p.clone(), fault_arc: arc, magnitude: 1e-3 };
        let cfg = IdentityConfig { orbits: 200, ..IdentityConfig::default() };
        let res = identity_suite(&bad, &p, &cfg);
        let dist = res.iter().find(|c| c.name == "distance_recursion").unwrap();
        assert_eq!(dist.verdict, Verdict::Fail);
        let f = dist.failure.as_ref().unwrap();
        assert!(arc.contains(f.theta), "failure at θ = {} outside the fault arc", f.theta);
        let replay = res.iter().find(|c| c.name == "orbit_replay").unwrap();
        assert_eq!(replay.verdict, Verdict::Fail);
    }

    #[test]
    fn counting_bounds_hold() {
        let p = CocycleParams::<f64>::reference(30.0, -2.0);
        let r = counting_suite(&p, &CountingConfig { systems: 20, steps: 2000, seed: 3 }).unwrap();
        assert_eq!(r.verdict, Verdict::Pass, "{r:?}");
    }

    #[test]
    fn region_transition_at_large_coupling() {
        let p = CocycleParams::<f64>::reference(1e8, 0.0);
        let r = region_transition(&p, 2000, 5);
        assert_eq!(r.verdict, Verdict::Pass, "{r:?}");
        // At the reference coupling the critical arc is the whole circle.
        let p = CocycleParams::<f64>::reference(30.0, 0.0);
        assert_eq!(region_transition(&p, 100, 5).verdict, Verdict::Inconclusive);
    }

    #[test]
    fn forward_growth_near_the_edge() {
        use crate::curves::{converged_jet, CurveKind, Horizon, HorizonConfig};
        let p = CocycleParams::<f64>::reference(30.0, -0.0499);
        let cfg = HorizonConfig::for_params(&p);
        let theta = p.rotation.omega;
        let u = converged_jet(&p, CurveKind::Unstable, theta, &cfg, Horizon::Auto).unwrap().0.psi;
        let s = converged_jet(&p, CurveKind::Stable, theta, &cfg, Horizon::Auto).unwrap().0.psi;
        let m = forward_growth_margin(&p, theta, u, s, 1).unwrap();
        assert!(m.is_finite());
    }
}
