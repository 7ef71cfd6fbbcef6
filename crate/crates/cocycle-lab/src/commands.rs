//! The six subcommands.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use cocycle_core::arcs::CircleArc;
use cocycle_core::asymptotics::{
    energy_schedule, find_edge, fit_linear_gap, fit_norm_exponent, gap_profile, second_differences, sweep_row,
    EdgeEstimate, EdgeOptions, SweepOptions, SweepRow,
};
use cocycle_core::checks::{run_suite, CountingConfig, IdentityConfig, SuiteConfig};
use cocycle_core::cocycle::FaultyFibreMap;
use cocycle_core::curves::{curve_norms, CurvePair};
use cocycle_core::ladder::{box_touch_bracket, ScaleLadder, BOX_STEP_CAP};
use cocycle_core::Params64;

use crate::config::{EnergyMode, LoadedConfig};
use crate::error::CliError;
use crate::output::{cell, num, to_json, write_atomic, Run};

pub const CURVE_HEADER: &str =
    "theta,psi_u,psi_s,d_theta_u,d_theta_s,d2_theta_u,d2_theta_s,d_E_u,d_E_s,residual_u,residual_s";
pub const SWEEP_HEADER: &str = "E,E0_minus_E,delta,theta_c,quad_coeff,c1_norm_u,c1_norm_s,c2_norm_u,sigma_plus_max,sigma_minus_max,level_k,eta,lyapunov,residual_max,status";

const CHECKPOINT: &str = "sweep.checkpoint.json";

fn single_energy(cfg: &LoadedConfig) -> Result<f64, CliError> {
    match cfg.config.energy.values.as_slice() {
        [e] => Ok(*e),
        v => Err(CliError::Validation(format!("expected exactly one energy in energy.values, got {}", v.len()))),
    }
}

fn edge_options(cfg: &LoadedConfig, base: &Params64) -> EdgeOptions<f64> {
    let mut o = EdgeOptions::for_params(base);
    o.gap_floor = cfg.config.tolerances.gap_floor;
    o.horizon = cfg.horizon(base);
    o
}

#[derive(Debug, Serialize)]
struct CurveSummary {
    energy: f64,
    lambda_sq: f64,
    points: usize,
    delta: f64,
    theta_c: f64,
    quad_coeff: f64,
    fit_residual: f64,
    non_unique_minimum: bool,
    c1_norm_u: f64,
    c1_norm_s: f64,
    c2_norm_u: f64,
    c2_norm_s: f64,
    max_residual: f64,
    max_horizon: u64,
    /// `ψ^s < ψ^u` at every grid point.
    ordered: bool,
}

/// Both invariant sections on the adaptive grid at a single energy.
pub fn curve(cfg: &LoadedConfig) -> Result<(), CliError> {
    if cfg.config.energy.mode != EnergyMode::Single {
        return Err(CliError::Validation("curve needs energy.mode = \"single\"".into()));
    }
    let energy = single_energy(cfg)?;
    let params = cfg.params(energy)?;
    let horizon = cfg.horizon(&params);
    let mut run = Run::start("curve", &cfg.config);
    let pair = CurvePair::compute(&params, &cfg.grid(), &horizon)?;
    let profile = gap_profile(&params, &pair, &horizon)?;
    let (c1u, c2u) = curve_norms(&pair.unstable);
    let (c1s, c2s) = curve_norms(&pair.stable);

    if cfg.config.wants("csv") {
        let mut csv = String::with_capacity(pair.len() * 200);
        csv.push_str(CURVE_HEADER);
        csv.push('\n');
        for (u, s) in pair.unstable.iter().zip(&pair.stable) {
            writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{},{},{}",
                num(u.theta),
                num(u.psi),
                num(s.psi),
                num(u.d_theta),
                num(s.d_theta),
                num(u.d2_theta),
                num(s.d2_theta),
                num(u.d_e),
                num(s.d_e),
                num(u.residual),
                num(s.residual)
            )
            .expect("string write");
        }
        run.write("curve.csv", csv.as_bytes())?;
    }
    let summary = CurveSummary {
        energy,
        lambda_sq: params.lambda_sq,
        points: pair.len(),
        delta: profile.delta,
        theta_c: profile.theta_c,
        quad_coeff: profile.quad_coeff,
        fit_residual: profile.fit_residual,
        non_unique_minimum: profile.non_unique_minimum,
        c1_norm_u: c1u,
        c1_norm_s: c1s,
        c2_norm_u: c2u,
        c2_norm_s: c2s,
        max_residual: pair.max_residual(),
        max_horizon: pair.unstable.iter().chain(&pair.stable).map(|p| p.horizon).max().unwrap_or(0),
        ordered: (0..pair.len()).all(|i| pair.gap(i) > 0.0),
    };
    if cfg.config.wants("json") {
        run.write("curve_summary.json", &to_json(&summary))?;
    }
    run.task(format!("curve E={energy}"), "ok", None);
    println!(
        "curve: E = {energy}, {} points, δ = {:e} at θ_c = {}, max residual {:e}",
        summary.points, summary.delta, summary.theta_c, summary.max_residual
    );
    run.finish()
}

/// Locates the lowest spectral edge inside `energy.bracket`.
pub fn edge(cfg: &LoadedConfig) -> Result<(), CliError> {
    let base = cfg.params(0.0)?;
    let mut run = Run::start("edge", &cfg.config);
    let [lo, hi] = cfg.config.energy.bracket;
    let est = find_edge(&base, (lo, hi), cfg.config.tolerances.edge_tol, &edge_options(cfg, &base))?;
    run.set_bracket_history(est.history.clone());
    run.write("edge.json", &to_json(&est))?;
    run.task("edge", "ok", Some(format!("{:?}", est.method)));
    for w in &est.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "edge: E₀ = {} (bracket [{}, {}], {} iterations, {:?}, extrapolated {:?})",
        est.e0, est.bracket.0, est.bracket.1, est.iterations, est.method, est.extrapolated
    );
    run.finish()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RowRecord {
    energy: f64,
    row: Option<SweepRow<f64>>,
    error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Checkpoint {
    config_hash: String,
    e0: f64,
    edge: Option<EdgeEstimate<f64>>,
    rows: Vec<RowRecord>,
}

/// One sample of the fit inputs, as stored in the sweep CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSample {
    pub energy: f64,
    pub e0_minus_e: f64,
    pub delta: f64,
    pub c1_norm_u: f64,
    pub c1_norm_s: f64,
}

#[derive(Debug, Serialize)]
struct LinearOut {
    slope: f64,
    stderr: f64,
    r2: f64,
    intercept_affine: f64,
    slope_affine: f64,
}

#[derive(Debug, Serialize)]
struct NormOut {
    exponent: f64,
    stderr: f64,
    eps_hat: f64,
}

#[derive(Debug, Serialize)]
struct EdgeOut {
    #[serde(rename = "E0")]
    e0: f64,
    bracket: Option<(f64, f64)>,
}

#[derive(Debug, Serialize)]
struct FitReport {
    samples: usize,
    linear: Option<LinearOut>,
    norm_u: Option<NormOut>,
    norm_s: Option<NormOut>,
    edge: EdgeOut,
    /// `(E, δ'')` at interior energies.
    second_differences: Vec<(f64, f64)>,
    errors: Vec<String>,
}

fn fit_report(samples: &[FitSample], e0: f64, bracket: Option<(f64, f64)>) -> FitReport {
    let mut errors = Vec::new();
    let lin: Vec<(f64, f64)> = samples.iter().map(|s| (s.e0_minus_e, s.delta)).collect();
    let linear = match fit_linear_gap(&lin) {
        Ok(f) => Some(LinearOut {
            slope: f.slope,
            stderr: f.stderr,
            r2: f.r2,
            intercept_affine: f.intercept_affine,
            slope_affine: f.slope_affine,
        }),
        Err(e) => {
            errors.push(format!("linear: {e}"));
            None
        }
    };
    let mut norm = |name: &str, pts: Vec<(f64, f64)>| match fit_norm_exponent(&pts) {
        Ok(f) => Some(NormOut { exponent: f.exponent, stderr: f.stderr, eps_hat: f.eps_hat }),
        Err(e) => {
            errors.push(format!("{name}: {e}"));
            None
        }
    };
    let norm_u = norm("norm_u", samples.iter().map(|s| (s.delta, s.c1_norm_u)).collect());
    let norm_s = norm("norm_s", samples.iter().map(|s| (s.delta, s.c1_norm_s)).collect());
    let de: Vec<(f64, f64)> = samples.iter().map(|s| (s.energy, s.delta)).collect();
    FitReport {
        samples: samples.len(),
        linear,
        norm_u,
        norm_s,
        edge: EdgeOut { e0, bracket },
        second_differences: second_differences(&de),
        errors,
    }
}

fn sweep_csv(rows: &[RowRecord]) -> String {
    let mut csv = String::new();
    csv.push_str(SWEEP_HEADER);
    csv.push('\n');
    for rec in rows {
        match &rec.row {
            Some(r) => writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},ok",
                num(r.energy),
                num(r.e0_minus_e),
                num(r.profile.delta),
                num(r.profile.theta_c),
                num(r.profile.quad_coeff),
                num(r.c1_norm_u),
                num(r.c1_norm_s),
                num(r.c2_norm_u),
                cell(r.sigma_plus_max),
                cell(r.sigma_minus_max),
                r.level_k,
                num(r.eta),
                num(r.lyapunov),
                num(r.residual_max)
            ),
            None => {
                let reason = rec.error.as_deref().unwrap_or("failed").replace([',', '\n', '"'], " ");
                writeln!(csv, "{},,,,,,,,,,,,,,error: {reason}", num(rec.energy))
            }
        }
        .expect("string write");
    }
    csv
}

/// Parses the sweep CSV back into fit samples (successful rows only).
pub fn parse_sweep_csv(text: &str) -> Result<Vec<FitSample>, CliError> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| CliError::Validation(format!("sweep CSV lacks column {name}")))
    };
    let (ie, ix, id, iu, is, ist) =
        (col("E")?, col("E0_minus_E")?, col("delta")?, col("c1_norm_u")?, col("c1_norm_s")?, col("status")?);
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != header.len() {
            return Err(CliError::Validation(format!("sweep CSV row {} has {} fields", n + 1, f.len())));
        }
        if f[ist] != "ok" {
            continue;
        }
        let num = |i: usize| {
            f[i].parse::<f64>()
                .map_err(|e| CliError::Validation(format!("sweep CSV row {}: {:?}: {e}", n + 1, f[i])))
        };
        out.push(FitSample { energy: num(ie)?, e0_minus_e: num(ix)?, delta: num(id)?, c1_norm_u: num(iu)?, c1_norm_s: num(is)? });
    }
    Ok(out)
}

/// Geometric sweep towards the edge with per-row checkpointing.
///
/// `stop_after` ends the run (leaving the checkpoint) after that many newly
/// computed rows; it exists to exercise resumption.
pub fn sweep(cfg: &LoadedConfig, stop_after: Option<usize>) -> Result<(), CliError> {
    let c = &cfg.config;
    let base = cfg.params(0.0)?;
    let mut run = Run::start("sweep", c);
    let hash = c.hash();
    let ckpt_path = run.path(CHECKPOINT);

    let mut ckpt = match std::fs::read(&ckpt_path) {
        Ok(bytes) => match serde_json::from_slice::<Checkpoint>(&bytes) {
            Ok(k) if k.config_hash == hash => {
                run.task("resume", "ok", Some(format!("{} rows from checkpoint", k.rows.len())));
                Some(k)
            }
            _ => {
                eprintln!("warning: ignoring checkpoint from a different configuration");
                None
            }
        },
        Err(_) => None,
    };
    if ckpt.is_none() {
        let (e0, edge) = match c.energy.e0 {
            Some(e0) => (e0, None),
            None => {
                let [lo, hi] = c.energy.bracket;
                let est = find_edge(&base, (lo, hi), c.tolerances.edge_tol, &edge_options(cfg, &base))?;
                (est.e0, Some(est))
            }
        };
        ckpt = Some(Checkpoint { config_hash: hash, e0, edge, rows: Vec::new() });
    }
    let mut ckpt = ckpt.expect("initialised");
    if let Some(est) = &ckpt.edge {
        run.set_bracket_history(est.history.clone());
        run.task("edge", "ok", Some(format!("E₀ = {}", est.e0)));
    }

    let e0 = ckpt.e0;
    let scale = c.energy.scale.unwrap_or_else(|| cocycle_core::asymptotics::default_schedule_scale(&base));
    let energies = energy_schedule(e0, scale, c.energy.points);
    let mut opts = SweepOptions::for_params(&base);
    opts.grid = cfg.grid();
    opts.horizon = cfg.horizon(&base);
    let ladder = ScaleLadder::build(&base, 1).ok();

    let mut fresh = 0;
    for (j, &energy) in energies.iter().enumerate() {
        if j < ckpt.rows.len() {
            continue;
        }
        if stop_after.is_some_and(|n| fresh >= n) {
            println!("sweep: stopped after {fresh} new rows; checkpoint saved ({} of {})", ckpt.rows.len(), energies.len());
            return Ok(());
        }
        let rec = match sweep_row(&base.with_energy(energy), e0, ladder.as_ref(), &opts) {
            Ok(row) => RowRecord { energy, row: Some(row), error: None },
            Err(e) => {
                eprintln!("warning: E = {energy}: {e}");
                RowRecord { energy, row: None, error: Some(e.to_string()) }
            }
        };
        ckpt.rows.push(rec);
        write_atomic(&ckpt_path, &to_json(&ckpt))?;
        fresh += 1;
    }

    for rec in &ckpt.rows {
        match &rec.error {
            None => run.task(format!("E={}", rec.energy), "ok", None),
            Some(e) => run.task(format!("E={}", rec.energy), "failed", Some(e.clone())),
        }
    }
    let csv = sweep_csv(&ckpt.rows);
    if c.wants("csv") {
        run.write("sweep.csv", csv.as_bytes())?;
    }
    if let Some(est) = &ckpt.edge {
        run.write("edge.json", &to_json(est))?;
    }
    let samples = parse_sweep_csv(&csv)?;
    let report = fit_report(&samples, e0, ckpt.edge.as_ref().map(|e| e.bracket));
    if c.wants("json") {
        run.write("fit.json", &to_json(&report))?;
    }
    let _ = std::fs::remove_file(&ckpt_path);
    println!(
        "sweep: {} of {} energies ok; slope {:?}, exponent_u {:?}",
        samples.len(),
        energies.len(),
        report.linear.as_ref().map(|l| l.slope),
        report.norm_u.as_ref().map(|n| n.exponent)
    );
    run.finish()
}

#[derive(Debug, Serialize)]
struct LadderOut {
    n: usize,
    #[serde(rename = "I_center")]
    i_center: f64,
    #[serde(rename = "I_halflength")]
    i_halflength: f64,
    #[serde(rename = "M")]
    m: Option<u64>,
    #[serde(rename = "N")]
    n_return: Option<u64>,
    #[serde(rename = "E_minus")]
    e_minus: Option<f64>,
    #[serde(rename = "E_plus")]
    e_plus: Option<f64>,
    log10_length: f64,
    log10_m: f64,
    log10_n: f64,
}

/// Scale ladder levels with box-touch energy brackets.
pub fn ladder(cfg: &LoadedConfig) -> Result<(), CliError> {
    let c = &cfg.config;
    let params = cfg.params(c.energy.values.first().copied().unwrap_or(0.0))?;
    let mut run = Run::start("ladder", c);
    let ladder = ScaleLadder::build(&params, c.ladder.max_level)?;
    for w in &ladder.warnings {
        eprintln!("warning: {w}");
    }
    let mut out = Vec::new();
    for lv in &ladder.levels {
        let boxes_possible = lv.is_representable() && lv.m.is_some_and(|m| m <= BOX_STEP_CAP);
        let bracket = if boxes_possible {
            let [lo, hi] = c.ladder.bracket;
            match box_touch_bracket(&ladder, &params, lv.n, c.ladder.box_grid, lo, hi, c.tolerances.edge_tol) {
                Ok(b) => {
                    run.task(format!("level {}", lv.n), "ok", None);
                    Some(b)
                }
                Err(e) => {
                    eprintln!("warning: level {}: {e}", lv.n);
                    run.task(format!("level {}", lv.n), "failed", Some(e.to_string()));
                    None
                }
            }
        } else {
            run.task(format!("level {}", lv.n), "skipped", Some("box images out of range".into()));
            None
        };
        out.push(LadderOut {
            n: lv.n,
            i_center: lv.arc.center,
            i_halflength: lv.arc.half_length,
            m: lv.m,
            n_return: lv.n_return,
            e_minus: bracket.map(|b| b.0),
            e_plus: bracket.map(|b| b.1),
            log10_length: lv.log10_length,
            log10_m: lv.log10_m,
            log10_n: lv.log10_n_return,
        });
    }
    let json = to_json(&out);
    run.write("ladder.json", &json)?;
    print!("{}", String::from_utf8_lossy(&json));
    run.finish()
}

#[derive(Debug, Serialize)]
struct CheckOut {
    lambda_sq: f64,
    energy: f64,
    fault_injected: bool,
    all_passed: bool,
    checks: Vec<cocycle_core::checks::CheckResult>,
}

/// Runs the identity, counting and ladder property suite.
pub fn check(cfg: &LoadedConfig) -> Result<(), CliError> {
    let c = &cfg.config;
    let energy = single_energy(cfg)?;
    let params = cfg.params(energy)?;
    let mut run = Run::start("check", c);
    let k = &c.check;
    let suite = SuiteConfig {
        identity: IdentityConfig {
            orbits: k.orbits,
            max_length: k.max_length,
            seed: k.seed,
            tolerance: k.tolerance,
            ..IdentityConfig::default()
        },
        counting: CountingConfig { systems: k.systems, steps: k.steps, seed: k.seed.wrapping_add(6) },
        transition_samples: k.transition_samples,
        c1_samples: k.c1_samples,
    };
    let fault = k.fault_step != 0.0;
    let report = if fault {
        let map = FaultyFibreMap {
            inner: params.clone(),
            fault_arc: CircleArc::new(k.fault_arc[0], k.fault_arc[1]),
            magnitude: k.fault_step,
        };
        run_suite(&map, &params, &suite)?
    } else {
        run_suite(&params, &params, &suite)?
    };
    for r in &report.checks {
        println!("{:<26} {:<12} checked {:>7}  max error {:.3e}", r.name, format!("{:?}", r.verdict), r.checked, r.max_error);
        run.task(r.name.clone(), &format!("{:?}", r.verdict).to_lowercase(), None);
    }
    let out = CheckOut { lambda_sq: params.lambda_sq, energy, fault_injected: fault, all_passed: report.all_passed(), checks: report.checks };
    run.write("check.json", &to_json(&out))?;
    run.finish()
}

/// Recomputes the fit report from an existing sweep CSV in the output directory.
pub fn fit(cfg: &LoadedConfig) -> Result<(), CliError> {
    let c = &cfg.config;
    let mut run = Run::start("fit", c);
    let csv_path = run.path("sweep.csv");
    let text = std::fs::read_to_string(&csv_path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", csv_path.display())))?;
    let samples = parse_sweep_csv(&text)?;
    let edge: Option<EdgeEstimate<f64>> =
        std::fs::read(run.path("edge.json")).ok().and_then(|b| serde_json::from_slice(&b).ok());
    let (e0, bracket) = match (&edge, c.energy.e0, samples.first()) {
        (Some(e), _, _) => (e.e0, Some(e.bracket)),
        (None, Some(e0), _) => (e0, None),
        (None, None, Some(s)) => (s.energy + s.e0_minus_e, None),
        (None, None, None) => return Err(CliError::Validation("sweep CSV has no successful rows".into())),
    };
    let report = fit_report(&samples, e0, bracket);
    if let Some(e) = report.errors.first() {
        return Err(CliError::Validation(e.clone()));
    }
    run.write("fit.json", &to_json(&report))?;
    run.task("fit", "ok", None);
    println!(
        "fit: {} samples; slope {:?}; exponents {:?} / {:?}",
        report.samples,
        report.linear.as_ref().map(|l| l.slope),
        report.norm_u.as_ref().map(|n| n.exponent),
        report.norm_s.as_ref().map(|n| n.exponent)
    );
    run.finish()
}
