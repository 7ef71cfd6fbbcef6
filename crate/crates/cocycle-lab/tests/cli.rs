//! End-to-end runs of the `cocycle-lab` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_cocycle-lab");

/// A reduced grid keeps the end-to-end runs fast.
const SMALL_GRID: [&str; 2] = ["grid.base_points=512", "grid.refine_depth=2"];

fn run(sub: &str, dir: &Path, sets: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.arg(sub).arg("--set").arg(format!("output.dir={:?}", dir.to_str().unwrap()));
    for s in sets {
        cmd.arg("--set").arg(s);
    }
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "status {:?}\nstdout: {}\nstderr: {}", out.status, String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
}

fn json(path: PathBuf) -> Value {
    serde_json::from_slice(&std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

fn digests(dir: &Path, command: &str) -> Vec<(String, String)> {
    let m = json(dir.join(format!("{command}.manifest.json")));
    m["outputs"].as_array().unwrap().iter().map(|o| (o["path"].as_str().unwrap().into(), o["sha256"].as_str().unwrap().into())).collect()
}

#[test]
fn nonpositive_coupling_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    for v in ["0.0", "-4.0"] {
        let out = run("curve", dir.path(), &[&format!("lambda_sq={v}")], &[]);
        assert_eq!(out.status.code(), Some(2));
        assert!(String::from_utf8_lossy(&out.stderr).contains("lambda_sq"));
    }
}

#[test]
fn double_double_precision_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("edge", dir.path(), &["precision=\"dd\""], &[]).status.code(), Some(2));
}

#[test]
fn invalid_bracket_has_its_own_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("edge", dir.path(), &["energy.bracket=[-10.0, -9.0]"], &[]);
    assert_eq!(out.status.code(), Some(4));
    let out = run("edge", dir.path(), &["energy.bracket=[1.0, -1.0]"], &[]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn energy_above_the_edge_is_a_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("curve", dir.path(), &["energy.values=[5.0]", SMALL_GRID[0], SMALL_GRID[1]], &[]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn curve_is_ordered_and_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok(&run("curve", a.path(), &SMALL_GRID, &[]));
    ok(&run("curve", b.path(), &SMALL_GRID, &[("COCYCLE_LAB_THREADS", "1")]));
    assert_eq!(digests(a.path(), "curve"), digests(b.path(), "curve"));

    let text = std::fs::read_to_string(a.path().join("curve.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "theta,psi_u,psi_s,d_theta_u,d_theta_s,d2_theta_u,d2_theta_s,d_E_u,d_E_s,residual_u,residual_s"
    );
    let mut n = 0;
    for l in lines {
        let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(f.len(), 11);
        assert!(f[2] < f[1], "ψ^s ≥ ψ^u at θ = {}", f[0]);
        n += 1;
    }
    let summary = json(a.path().join("curve_summary.json"));
    assert_eq!(summary["points"].as_u64().unwrap(), n);
    assert_eq!(summary["ordered"], true);
}

#[test]
fn edge_matches_bisection_and_records_history() {
    let dir = tempfile::tempdir().unwrap();
    ok(&run("edge", dir.path(), &[], &[]));
    let e = json(dir.path().join("edge.json"));
    let (lo, hi) = (e["bracket"][0].as_f64().unwrap(), e["bracket"][1].as_f64().unwrap());
    assert!(hi - lo <= 1e-12);
    assert!(lo < -0.0488 && lo > -0.0490, "E₀ = {lo}");
    let m = json(dir.path().join("edge.manifest.json"));
    let hist = m["bracket_history"].as_array().unwrap();
    assert_eq!(hist[0], serde_json::json!([-1.0, 1.0]));
    assert_eq!(hist.len() as u64, e["iterations"].as_u64().unwrap() + 1);
    for w in hist.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        assert!(b[0].as_f64() >= a[0].as_f64() && b[1].as_f64() <= a[1].as_f64());
    }
}

#[test]
fn sweep_resume_and_thread_count_give_identical_bytes() {
    let full = tempfile::tempdir().unwrap();
    let resumed = tempfile::tempdir().unwrap();
    let sets = [SMALL_GRID[0], SMALL_GRID[1], "energy.e0=-0.04889872922558425"];
    ok(&run("sweep", full.path(), &sets, &[("COCYCLE_LAB_THREADS", "8")]));

    let mut cmd = Command::new(BIN);
    cmd.args(["sweep", "--stop-after", "5", "--set", &format!("output.dir={:?}", resumed.path().to_str().unwrap())]);
    for s in sets {
        cmd.args(["--set", s]);
    }
    ok(&cmd.env("COCYCLE_LAB_THREADS", "1").output().unwrap());
    assert!(resumed.path().join("sweep.checkpoint.json").exists());
    assert!(!resumed.path().join("sweep.csv").exists());
    ok(&run("sweep", resumed.path(), &sets, &[("COCYCLE_LAB_THREADS", "1")]));
    assert!(!resumed.path().join("sweep.checkpoint.json").exists());

    let a = std::fs::read(full.path().join("sweep.csv")).unwrap();
    let b = std::fs::read(resumed.path().join("sweep.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(digests(full.path(), "sweep"), digests(resumed.path(), "sweep"));

    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 13);
    assert!(text.lines().next().unwrap().starts_with(
        "E,E0_minus_E,delta,theta_c,quad_coeff,c1_norm_u,c1_norm_s,c2_norm_u,sigma_plus_max,sigma_minus_max,level_k,eta,lyapunov,residual_max"
    ));
    let fit = json(full.path().join("fit.json"));
    for key in ["slope", "stderr", "r2", "intercept_affine"] {
        assert!(fit["linear"][key].is_number(), "linear.{key}");
    }
    for side in ["norm_u", "norm_s"] {
        for key in ["exponent", "stderr", "eps_hat"] {
            assert!(fit[side][key].is_number(), "{side}.{key}");
        }
    }
    assert_eq!(fit["edge"]["E0"].as_f64().unwrap(), -0.04889872922558425);

    // Refitting the CSV reproduces the sweep's own report.
    let before = std::fs::read(full.path().join("fit.json")).unwrap();
    ok(&run("fit", full.path(), &sets, &[]));
    assert_eq!(std::fs::read(full.path().join("fit.json")).unwrap(), before);
}

#[test]
fn check_report_is_schema_valid_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    ok(&run("check", dir.path(), &[], &[]));
    let report = json(dir.path().join("check.json"));
    let schema = json(Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/check-report.schema.json"));
    let compiled = jsonschema::JSONSchema::compile(&schema).expect("schema compiles");
    assert!(compiled.is_valid(&report));
    assert_eq!(report["all_passed"], true);
    for c in report["checks"].as_array().unwrap() {
        assert_ne!(c["verdict"], "fail", "{c}");
    }
}

#[test]
fn fault_hook_is_pinpointed() {
    let dir = tempfile::tempdir().unwrap();
    ok(&run("check", dir.path(), &["check.fault_step=1e-3", "check.fault_arc=[0.3, 0.05]"], &[]));
    let report = json(dir.path().join("check.json"));
    let schema = json(Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/check-report.schema.json"));
    assert!(jsonschema::JSONSchema::compile(&schema).unwrap().is_valid(&report));
    assert_eq!(report["fault_injected"], true);
    assert_eq!(report["all_passed"], false);
    let dist = report["checks"].as_array().unwrap().iter().find(|c| c["name"] == "distance_recursion").unwrap();
    assert_eq!(dist["verdict"], "fail");
    let theta = dist["failure"]["theta"].as_f64().unwrap();
    assert!((theta - 0.3).abs() <= 0.05, "failure at θ = {theta}");
    assert!(dist["failure"]["step"].is_u64());
}

#[test]
fn ladder_prints_levels() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("ladder", dir.path(), &["lambda_sq=1e8"], &[]);
    ok(&out);
    let levels: Value = serde_json::from_slice(&out.stdout).unwrap();
    let l0 = &levels[0];
    for key in ["n", "I_center", "I_halflength", "M", "N", "E_minus", "E_plus"] {
        assert!(l0.get(key).is_some(), "missing {key}");
    }
    assert_eq!(l0["M"], 10);
    assert!(l0["E_minus"].as_f64().unwrap() < l0["E_plus"].as_f64().unwrap());
    assert_eq!(levels[1]["M"].as_u64(), Some(10_000_000_000));
    assert_eq!(json(dir.path().join("ladder.json")), levels);
}

#[test]
fn json_config_file_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"lambda_sq": 30.0, "energy": {"bracket": [-1.0, 1.0]}, "tolerances": {"edge_tol": 1e-6}}"#).unwrap();
    let out = Command::new(BIN)
        .args(["edge", "--config", cfg.to_str().unwrap(), "--set", &format!("output.dir={:?}", dir.path().to_str().unwrap())])
        .output()
        .unwrap();
    ok(&out);
    let e = json(dir.path().join("edge.json"));
    assert!(e["bracket"][1].as_f64().unwrap() - e["bracket"][0].as_f64().unwrap() <= 1e-6);
}
