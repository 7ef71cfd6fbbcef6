//! Acceptance criteria for the reference configuration `v = cos 2πθ`,
//! `λ² = 30`, `ω = (√5 − 1)/4`, plus the large-coupling ladder demo at
//! `λ = 10⁴`. Prints one PASS/FAIL line per criterion and exits non-zero if
//! any criterion fails. Every tolerance is pinned below.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use cocycle_core::asymptotics::{
    asymptotics_report, default_schedule_scale, energy_schedule, find_edge, min_gap, sweep_row, EdgeEstimate,
    EdgeOptions, SweepOptions, SweepRow,
};
use cocycle_core::checks::{counting_suite, identity_suite, CountingConfig, IdentityConfig, IDENTITY_CHECKS, REMAINDER_CHECK};
use cocycle_core::cocycle::CocycleParams;
use cocycle_core::curves::{derivative_recursion_check, evaluate, suggested_steps, CurveKind, Horizon, HorizonConfig};
use cocycle_core::ladder::{
    box_images, box_separation, box_touch_bracket, check_condition_c1, check_condition_c2, ScaleLadder, Verdict,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LAMBDA_SQ: f64 = 30.0;

// Criterion 1.
const IDENTITY_ORBITS: usize = 1000;
const IDENTITY_TOL: f64 = 1e-8;
const IDENTITY_BUDGET: Duration = Duration::from_secs(60);
// Criterion 2.
const DERIV_PROBES: usize = 100;
const DERIV_TOL: f64 = 1e-5;
const DERIV_E_RANGE: (f64, f64) = (-2.0, -0.1);
const DERIV_BUDGET: Duration = Duration::from_secs(300);
// Criterion 3.
const EDGE_BRACKET: (f64, f64) = (-1.0, 1.0);
const EDGE_TOL: f64 = 1e-12;
const EDGE_AGREEMENT: f64 = 3e-12;
const EDGE_OFFSET: f64 = 1e-10;
const EDGE_BUDGET: Duration = Duration::from_secs(600);
// Criteria 4–7 (shared sweep).
const SWEEP_POINTS: usize = 12;
const MIN_DECADES: f64 = 1.5;
const SLOPE_BAND: (f64, f64) = (1.0 - 4.0 / LAMBDA_SQ, 1.0 + 4.0 / LAMBDA_SQ);
const MIN_R2: f64 = 0.999;
const EXPONENT_BAND: (f64, f64) = (-0.55, -0.40);
const EXPONENT_GAP: f64 = 0.05;
const FIT_RESIDUAL_MAX: f64 = 0.05;
const QUAD_BAND: (f64, f64) = (LAMBDA_SQ / 10.0, 10.0 * LAMBDA_SQ);
const SECOND_DIFF_MAX: f64 = 32.0 / LAMBDA_SQ;
const SWEEP_BUDGET: Duration = Duration::from_secs(1800);
// Criterion 8.
const COUNT_SYSTEMS: usize = 100;
const COUNT_STEPS: u64 = 10_000;
// Criterion 9.
const LADDER_LAMBDA_SQ: f64 = 1e8;
const LADDER_E: f64 = -5.0;
const C1_SAMPLES: usize = 1000;
const BOX_GRID: usize = 513;
const BOX_TOUCH_TOL: f64 = 1e-9;
const BOX_BRACKET: (f64, f64) = (-5.0, 5.0);
const BOX_E_TOL: f64 = 1e-12;
const LADDER_BUDGET: Duration = Duration::from_secs(600);

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(n: u32, title: &str, start: Instant, budget: Duration, o: Outcome) -> bool {
    let elapsed = start.elapsed();
    let pass = o.pass && elapsed <= budget;
    println!(
        "criterion {n} [{}] {title}: {} (runtime {:.1}s, budget {}s)",
        if pass { "PASS" } else { "FAIL" },
        o.detail,
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    pass
}

fn reference(e: f64) -> CocycleParams<f64> {
    CocycleParams::reference(LAMBDA_SQ, e)
}

fn criterion_1() -> Outcome {
    let p = reference(-2.0);
    let cfg = IdentityConfig { orbits: IDENTITY_ORBITS, tolerance: IDENTITY_TOL, ..IdentityConfig::default() };
    let res = identity_suite(&p, &p, &cfg);
    let names: Vec<&str> = IDENTITY_CHECKS.iter().copied().chain([REMAINDER_CHECK]).collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for name in names {
        let c = res.iter().find(|c| c.name == name).expect("check present");
        pass &= c.verdict == Verdict::Pass && c.checked > 0;
        parts.push(format!("{name} n={} max={:.1e}", c.checked, c.max_error));
    }
    Outcome { pass, detail: format!("{IDENTITY_ORBITS} orbits, tol {IDENTITY_TOL:e}; {}", parts.join(", ")) }
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = [0.0f64; 4];
    let mut failures = 0;
    let mut errors = Vec::new();
    for i in 0..DERIV_PROBES {
        let theta = rng.gen::<f64>();
        let e = rng.gen_range(DERIV_E_RANGE.0..DERIV_E_RANGE.1);
        let kind = if i % 2 == 0 { CurveKind::Unstable } else { CurveKind::Stable };
        let p = reference(e);
        let cfg = HorizonConfig::for_params(&p);
        let res = evaluate(&p, kind, theta, &cfg, Horizon::Auto).and_then(|pt| {
            let (ht, he) = suggested_steps(&pt);
            derivative_recursion_check(&p, kind, &pt, ht, he)
        });
        match res {
            Ok(c) => {
                let v = [c.d_theta, c.d2_theta, c.d_e, c.d2_e];
                for k in 0..4 {
                    worst[k] = worst[k].max(v[k]);
                }
                if c.max() > DERIV_TOL {
                    failures += 1;
                }
            }
            Err(err) => errors.push(format!("θ={theta:.4} E={e:.4}: {err}")),
        }
    }
    Outcome {
        pass: failures == 0 && errors.is_empty(),
        detail: format!(
            "{DERIV_PROBES} probes, tol {DERIV_TOL:e}; max rel ∂θ={:.1e} ∂²θ={:.1e} ∂E={:.1e} ∂²E={:.1e}; {failures} over tol; errors {:?}",
            worst[0], worst[1], worst[2], worst[3], errors
        ),
    }
}

fn criterion_3(edge: &Result<EdgeEstimate<f64>, String>) -> Outcome {
    let e = match edge {
        Ok(e) => e,
        Err(err) => return Outcome { pass: false, detail: format!("edge search failed: {err}") },
    };
    let width = e.bracket.1 - e.bracket.0;
    let diff = e.extrapolated.map(|x| (x - e.e0).abs()).unwrap_or(f64::INFINITY);
    let p = reference(e.e0 - EDGE_OFFSET);
    let gap = min_gap(&p, 512, &HorizonConfig::for_params(&p));
    let gap_ok = matches!(gap, Ok((_, d)) if d > 0.0);
    Outcome {
        pass: width < EDGE_TOL && diff <= EDGE_AGREEMENT && gap_ok,
        detail: format!(
            "E₀ = {:.17} (bracket width {width:.1e} < {EDGE_TOL:e}), extrapolated {:?}, |Δ| = {diff:.1e} ≤ {EDGE_AGREEMENT:e}; δ(E₀ − {EDGE_OFFSET:e}) = {:?}",
            e.e0,
            e.extrapolated,
            gap.map(|g| g.1).map_err(|x| x.to_string())
        ),
    }
}

fn span_decades(xs: &[f64]) -> f64 {
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(0.0, f64::max);
    (hi / lo).log10()
}

fn criterion_4(rows: &[SweepRow<f64>]) -> Outcome {
    let rep = match asymptotics_report(reference(0.0).lambda(), rows) {
        Ok(r) => r,
        Err(e) => return Outcome { pass: false, detail: e.to_string() },
    };
    let x: Vec<f64> = rows.iter().map(|r| r.e0_minus_e).collect();
    let decades = span_decades(&x);
    let l = rep.linear;
    Outcome {
        pass: rows.len() == SWEEP_POINTS
            && decades >= MIN_DECADES
            && l.slope >= SLOPE_BAND.0
            && l.slope <= SLOPE_BAND.1
            && l.r2 >= MIN_R2,
        detail: format!(
            "{} samples over {decades:.2} decades; slope {:.5} ± {:.1e} in [{:.4}, {:.4}], r² = {:.7} ≥ {MIN_R2}",
            rows.len(),
            l.slope,
            l.stderr,
            SLOPE_BAND.0,
            SLOPE_BAND.1,
            l.r2
        ),
    }
}

fn criterion_5(rows: &[SweepRow<f64>]) -> Outcome {
    let rep = match asymptotics_report(reference(0.0).lambda(), rows) {
        Ok(r) => r,
        Err(e) => return Outcome { pass: false, detail: e.to_string() },
    };
    let (u, s) = (rep.norm_u, rep.norm_s);
    Outcome {
        pass: u.exponent >= EXPONENT_BAND.0 && u.exponent <= EXPONENT_BAND.1 && (s.exponent - u.exponent).abs() <= EXPONENT_GAP,
        detail: format!(
            "exponent_u {:.4} ± {:.3} in [{}, {}], exponent_s {:.4} ± {:.3}, |Δ| = {:.4} ≤ {EXPONENT_GAP}; ε̂_u = {:.3}",
            u.exponent,
            u.stderr,
            EXPONENT_BAND.0,
            EXPONENT_BAND.1,
            s.exponent,
            s.stderr,
            (s.exponent - u.exponent).abs(),
            u.eps_hat
        ),
    }
}

fn criterion_6(rows: &[SweepRow<f64>]) -> Outcome {
    let worst_res = rows.iter().map(|r| r.profile.fit_residual).fold(0.0, f64::max);
    let qmin = rows.iter().map(|r| r.profile.quad_coeff).fold(f64::INFINITY, f64::min);
    let qmax = rows.iter().map(|r| r.profile.quad_coeff).fold(0.0, f64::max);
    let res_ok = rows.iter().all(|r| r.profile.fit_residual < FIT_RESIDUAL_MAX);
    let quad_ok = rows.iter().all(|r| r.profile.quad_coeff >= QUAD_BAND.0 && r.profile.quad_coeff <= QUAD_BAND.1);
    Outcome {
        pass: !rows.is_empty() && res_ok && quad_ok,
        detail: format!(
            "fit residual max {worst_res:.4} < {FIT_RESIDUAL_MAX} [{}]; quad_coeff range [{qmin:.2}, {qmax:.2}] within [{}, {}] [{}]",
            if res_ok { "ok" } else { "violated" },
            QUAD_BAND.0,
            QUAD_BAND.1,
            if quad_ok { "ok" } else { "violated" }
        ),
    }
}

fn criterion_7(rows: &[SweepRow<f64>]) -> Outcome {
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.energy, r.profile.delta)).collect();
    let sd = cocycle_core::asymptotics::second_differences(&pts);
    let worst = sd.iter().map(|s| s.1.abs()).fold(0.0, f64::max);
    Outcome {
        pass: sd.len() + 2 == rows.len() && worst <= SECOND_DIFF_MAX,
        detail: format!("{} interior energies; max |δ''| = {worst:.3e} ≤ {SECOND_DIFF_MAX:.4}", sd.len()),
    }
}

fn criterion_8(rows: &[SweepRow<f64>]) -> Outcome {
    let p = reference(-2.0);
    let count = counting_suite(&p, &CountingConfig { systems: COUNT_SYSTEMS, steps: COUNT_STEPS, seed: 8 });
    let probes: usize = rows.iter().map(|r| r.stopping_probes).sum();
    let violations: usize = rows.iter().map(|r| r.st_bound_violations).sum();
    let count_ok = matches!(&count, Ok(c) if c.verdict == Verdict::Pass && c.checked == COUNT_SYSTEMS as u64);
    Outcome {
        pass: count_ok && probes > 0 && violations == 0,
        detail: format!(
            "{COUNT_SYSTEMS} systems × {COUNT_STEPS} steps: {}; STBound σ⁺ ≤ 3 + 2 log_λ(1/δ) at {probes} probes, {violations} violations",
            match &count {
                Ok(c) => format!("{:?} (max excess {:.1e})", c.verdict, c.max_error),
                Err(e) => e.to_string(),
            }
        ),
    }
}

fn criterion_9() -> Outcome {
    let p = CocycleParams::<f64>::reference(LADDER_LAMBDA_SQ, LADDER_E);
    let ladder = match ScaleLadder::build(&p, 1) {
        Ok(l) => l,
        Err(e) => return Outcome { pass: false, detail: e.to_string() },
    };
    let c2_0 = check_condition_c2(&ladder, 0);
    let c2_1 = check_condition_c2(&ladder, 1);
    let c1 = check_condition_c1(&ladder, &p, 0, C1_SAMPLES, 1_000_000);
    let sep = box_images(&ladder, &p, 0, BOX_GRID).map(|(u, s)| box_separation(&u, &s));
    let touch = box_touch_bracket(&ladder, &p, 0, BOX_GRID, BOX_BRACKET.0, BOX_BRACKET.1, BOX_E_TOL).and_then(|(lo, hi)| {
        let (u, s) = box_images(&ladder, &p.with_energy(hi), 0, BOX_GRID)?;
        Ok((lo, hi, box_separation(&u, &s)))
    });
    let pass = matches!(c2_0, Ok(true))
        && matches!(c2_1, Ok(true))
        && matches!(&c1, Ok(r) if r.verdict == Verdict::Pass && r.samples == C1_SAMPLES)
        && matches!(sep, Ok(s) if s > 0.0)
        && matches!(touch, Ok((_, _, s)) if s.abs() <= BOX_TOUCH_TOL);
    Outcome {
        pass,
        detail: format!(
            "M₀ = {:?}, M₁ = {:?}; (C2)₀ {:?}, (C2)₁ {:?}; (C1)₀ at E = {LADDER_E}: {:?}; box separation at E = {LADDER_E}: {:?}; touch bracket/separation {:?} (tol {BOX_TOUCH_TOL:e})",
            ladder.levels[0].m,
            ladder.levels[1].m,
            c2_0,
            c2_1,
            c1.map(|r| (r.verdict, r.samples)),
            sep,
            touch
        ),
    }
}

fn main() -> ExitCode {
    let mut all = true;

    let t = Instant::now();
    all &= report(1, "identity suite", t, IDENTITY_BUDGET, criterion_1());

    let t = Instant::now();
    all &= report(2, "derivative recursions vs finite differences", t, DERIV_BUDGET, criterion_2());

    let t = Instant::now();
    let base = reference(0.0);
    let edge = find_edge(&base, EDGE_BRACKET, EDGE_TOL, &EdgeOptions::for_params(&base)).map_err(|e| e.to_string());
    all &= report(3, "edge location", t, EDGE_BUDGET, criterion_3(&edge));

    let t = Instant::now();
    let rows: Vec<SweepRow<f64>> = match &edge {
        Ok(e) => {
            let opts = SweepOptions::for_params(&base);
            let ladder = ScaleLadder::build(&base, 1).ok();
            energy_schedule(e.e0, default_schedule_scale(&base), SWEEP_POINTS)
                .into_iter()
                .filter_map(|en| sweep_row(&base.with_energy(en), e.e0, ladder.as_ref(), &opts).ok())
                .collect()
        }
        Err(_) => Vec::new(),
    };
    let sweep_time = t.elapsed();
    let shared = |c: Outcome| Outcome { pass: c.pass && sweep_time <= SWEEP_BUDGET, detail: format!("{} (shared sweep {:.1}s)", c.detail, sweep_time.as_secs_f64()) };
    let t0 = Instant::now();
    all &= report(4, "linear law", t0, SWEEP_BUDGET, shared(criterion_4(&rows)));
    all &= report(5, "norm law", t0, SWEEP_BUDGET, shared(criterion_5(&rows)));
    all &= report(6, "quadratic shape", t0, SWEEP_BUDGET, shared(criterion_6(&rows)));
    all &= report(7, "second E-derivative bound", t0, SWEEP_BUDGET, shared(criterion_7(&rows)));

    let t = Instant::now();
    all &= report(8, "counting lemmas and stopping-time bound", t, SWEEP_BUDGET, criterion_8(&rows));

    let t = Instant::now();
    all &= report(9, "ladder certification at λ = 10⁴", t, LADDER_BUDGET, criterion_9());

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
