//! Run configuration: a sectioned TOML file (JSON accepted), overridable
//! from the command line with `--set section.key=value`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use cocycle_core::cocycle::{CocycleParams, Normalization};
use cocycle_core::potential::PotentialSpec;
use cocycle_core::rotation::RotationNumber;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub lambda_sq: f64,
    /// Decimal literal or expression such as `(sqrt(5)-1)/4`.
    #[serde(deserialize_with = "number_or_string")]
    pub omega: String,
    pub potential: PotentialConfig,
    pub energy: EnergyConfig,
    pub grid: GridSection,
    pub tolerances: Tolerances,
    pub horizon: HorizonSection,
    pub output: OutputConfig,
    pub threads: Threads,
    pub precision: Precision,
    pub check: CheckSection,
    pub ladder: LadderSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            lambda_sq: 30.0,
            omega: "(sqrt(5)-1)/4".into(),
            potential: PotentialConfig::default(),
            energy: EnergyConfig::default(),
            grid: GridSection::default(),
            tolerances: Tolerances::default(),
            horizon: HorizonSection::default(),
            output: OutputConfig::default(),
            threads: Threads::Auto,
            precision: Precision::F64,
            check: CheckSection::default(),
            ladder: LadderSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialKind {
    /// `v(θ) = cos 2πθ`.
    Cosine,
    /// Periodic cubic spline through equally spaced samples read from `table_path`.
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialConfig {
    pub kind: PotentialKind,
    /// One sample per line (or comma/whitespace separated), relative to the config file.
    pub table_path: Option<PathBuf>,
    pub normalization: Normalization,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self { kind: PotentialKind::Cosine, table_path: None, normalization: Normalization::MinAtZero }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnergyMode {
    Single,
    Sweep,
    Edge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyConfig {
    pub mode: EnergyMode,
    /// Energies for single-energy commands (`curve`, `check`).
    pub values: Vec<f64>,
    /// Edge search bracket `[lo, hi]`.
    pub bracket: [f64; 2],
    /// Known edge; when absent `sweep` locates it first.
    pub e0: Option<f64>,
    /// Number of sweep energies `E_j = E₀ − scale · 2^{−j}`.
    pub points: usize,
    /// Schedule scale; defaults to `1/(2λ²)`.
    pub scale: Option<f64>,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self { mode: EnergyMode::Single, values: vec![-2.0], bracket: [-1.0, 1.0], e0: None, points: 12, scale: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub base_points: usize,
    pub refine_depth: u32,
    pub orbit_windows: u32,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = cocycle_core::curves::GridConfig::default();
        Self { base_points: g.base_points, refine_depth: g.refine_depth, orbit_windows: g.orbit_windows }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Absolute `ψ` tolerance between horizons; defaults to `10⁻⁹ λ²`.
    pub tol_psi: Option<f64>,
    pub tol_deriv: f64,
    pub gap_floor: f64,
    pub edge_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { tol_psi: None, tol_deriv: 1e-8, gap_floor: 0.0, edge_tol: 1e-12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HorizonSection {
    pub t_init: u64,
    pub t_max: u64,
}

impl Default for HorizonSection {
    fn default() -> Self {
        Self { t_init: 64, t_max: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Subset of `csv`, `json`.
    pub formats: Vec<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), formats: vec!["csv".into(), "json".into()] }
    }
}

/// Worker-thread count; `auto` lets the pool decide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Threads {
    Count(usize),
    Auto,
}

impl Serialize for Threads {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Threads::Count(n) => s.serialize_u64(*n as u64),
            Threads::Auto => s.serialize_str("auto"),
        }
    }
}

impl<'de> Deserialize<'de> for Threads {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(usize),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(n) => Ok(Threads::Count(n)),
            Raw::Text(t) if t == "auto" => Ok(Threads::Auto),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("expected \"auto\" or a thread count, got {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F64,
    /// Double-double; accepted by the parser but not implemented.
    Dd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckSection {
    pub orbits: usize,
    pub max_length: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub systems: usize,
    pub steps: u64,
    pub transition_samples: usize,
    pub c1_samples: usize,
    /// Test hook: when non-zero, the fibre map is corrupted by
    /// `fault_step · r` on the arc `fault_arc = [centre, half-length]`.
    pub fault_step: f64,
    pub fault_arc: [f64; 2],
}

impl Default for CheckSection {
    fn default() -> Self {
        Self {
            orbits: 1000,
            max_length: 40,
            seed: 1,
            tolerance: 1e-8,
            systems: 100,
            steps: 10_000,
            transition_samples: 10_000,
            c1_samples: 1000,
            fault_step: 0.0,
            fault_arc: [0.3, 0.05],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LadderSection {
    pub max_level: usize,
    /// Energy bracket searched for the box-touch energies.
    pub bracket: [f64; 2],
    /// Angular samples of each box image.
    pub box_grid: usize,
}

impl Default for LadderSection {
    fn default() -> Self {
        Self { max_level: 1, bracket: [-5.0, 5.0], box_grid: 513 }
    }
}

/// Accepts `omega = 0.3` as well as `omega = "(sqrt(5)-1)/4"`.
fn number_or_string<'de, D: serde::Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Number(f64),
        Text(String),
    }
    Ok(match Raw::deserialize(d)? {
        Raw::Number(v) => format!("{v:?}"),
        Raw::Text(t) => t,
    })
}

/// A validated configuration plus the directory it was read from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

impl RunConfig {
    /// Reads `path` (TOML, or JSON when the extension is `.json` or the text
    /// starts with `{`), applies `key=value` overrides and validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<LoadedConfig, CliError> {
        let (mut value, base_dir) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", p.display())))?;
                let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                (parse_text(&text, p)?, base)
            }
            None => (serde_json::Value::Object(Default::default()), PathBuf::new()),
        };
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let config: RunConfig =
            serde_json::from_value(value).map_err(|e| CliError::Validation(format!("invalid config: {e}")))?;
        config.validate()?;
        Ok(LoadedConfig { config, base_dir })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Validation(m));
        if !(self.lambda_sq > 0.0 && self.lambda_sq.is_finite()) {
            return bad(format!("lambda_sq must be positive and finite, got {}", self.lambda_sq));
        }
        let t = &self.tolerances;
        for (name, v) in [("tol_deriv", t.tol_deriv), ("edge_tol", t.edge_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("tolerances.{name} must be positive, got {v}"));
            }
        }
        if let Some(v) = t.tol_psi {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("tolerances.tol_psi must be positive, got {v}"));
            }
        }
        if !(t.gap_floor >= 0.0 && t.gap_floor.is_finite()) {
            return bad(format!("tolerances.gap_floor must be non-negative, got {}", t.gap_floor));
        }
        if !self.grid.base_points.is_power_of_two() || self.grid.base_points < 8 {
            return bad(format!("grid.base_points must be a power of two ≥ 8, got {}", self.grid.base_points));
        }
        if self.horizon.t_init == 0 || self.horizon.t_max < self.horizon.t_init {
            return bad("horizon.t_init must be positive and at most horizon.t_max".into());
        }
        if self.precision == Precision::Dd {
            return bad("precision \"dd\" (double-double) is not supported; use \"f64\"".into());
        }
        if let Threads::Count(0) = self.threads {
            return bad("threads must be positive or \"auto\"".into());
        }
        if self.energy.values.iter().any(|e| !e.is_finite()) {
            return bad("energy.values must be finite".into());
        }
        if self.energy.scale.is_some_and(|s| !(s > 0.0 && s.is_finite())) {
            return bad("energy.scale must be positive".into());
        }
        if self.potential.kind == PotentialKind::Table && self.potential.table_path.is_none() {
            return bad("potential.kind = \"table\" needs potential.table_path".into());
        }
        if self.check.tolerance <= 0.0 {
            return bad("check.tolerance must be positive".into());
        }
        for f in &self.output.formats {
            if f != "csv" && f != "json" {
                return bad(format!("unknown output format {f:?}"));
            }
        }
        RotationNumber::<f64>::parse(&self.omega).map_err(|e| CliError::Validation(format!("omega: {e}")))?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON serialisation.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        hex::encode(Sha256::digest(json))
    }

    pub fn wants(&self, format: &str) -> bool {
        self.output.formats.iter().any(|f| f == format)
    }
}

impl LoadedConfig {
    /// Cocycle parameters at `energy`.
    pub fn params(&self, energy: f64) -> Result<CocycleParams<f64>, CliError> {
        let c = &self.config;
        let rotation = RotationNumber::parse(&c.omega)?;
        let potential = match c.potential.kind {
            PotentialKind::Cosine => PotentialSpec::cosine(),
            PotentialKind::Table => {
                let rel = c.potential.table_path.as_ref().expect("validated");
                let path = self.base_dir.join(rel);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
                let samples = text
                    .split(|ch: char| ch == ',' || ch.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<f64>().map_err(|e| CliError::Validation(format!("bad sample {s:?}: {e}"))))
                    .collect::<Result<Vec<_>, _>>()?;
                PotentialSpec::tabulated(samples)?
            }
        };
        Ok(CocycleParams::new(c.lambda_sq, energy, rotation, potential, c.potential.normalization)?)
    }

    pub fn horizon(&self, params: &CocycleParams<f64>) -> cocycle_core::curves::HorizonConfig<f64> {
        let c = &self.config;
        let mut h = cocycle_core::curves::HorizonConfig::for_params(params);
        h.t_init = c.horizon.t_init;
        h.t_max = c.horizon.t_max;
        h.tol_deriv = c.tolerances.tol_deriv;
        if let Some(t) = c.tolerances.tol_psi {
            h.tol_psi = t;
        }
        h
    }

    pub fn grid(&self) -> cocycle_core::curves::GridConfig {
        let g = &self.config.grid;
        cocycle_core::curves::GridConfig {
            base_points: g.base_points,
            refine_depth: g.refine_depth,
            orbit_windows: g.orbit_windows,
        }
    }
}

fn parse_text(text: &str, path: &Path) -> Result<serde_json::Value, CliError> {
    let is_json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
    if is_json {
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("invalid JSON config: {e}")))
    } else {
        let t: toml::Value = toml::from_str(text).map_err(|e| CliError::Validation(format!("invalid TOML config: {e}")))?;
        serde_json::to_value(t).map_err(|e| CliError::Validation(e.to_string()))
    }
}

/// Applies `a.b.c=value`. The value is read as a TOML literal (number,
/// boolean, array, quoted string) and falls back to a bare string.
fn apply_override(root: &mut serde_json::Value, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Validation(format!("--set expects key=value, got {spec:?}")))?;
    let value = match toml::from_str::<toml::Table>(&format!("v = {}", raw.trim())) {
        Ok(mut t) => serde_json::to_value(t.remove("v").expect("key present")).map_err(|e| CliError::Validation(e.to_string()))?,
        Err(_) => serde_json::Value::String(raw.trim().to_string()),
    };
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Validation(format!("bad override key {key:?}")));
    }
    let mut node = root;
    for p in &parts[..parts.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::Validation(format!("override {key:?} descends into a non-table")))?;
        node = obj.entry(p.to_string()).or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| CliError::Validation(format!("override {key:?} descends into a non-table")))?;
    obj.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load_str(text: &str, ext: &str, sets: &[&str]) -> Result<RunConfig, CliError> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(format!("run.{ext}"));
        std::fs::write(&p, text).unwrap();
        let sets: Vec<String> = sets.iter().map(|s| s.to_string()).collect();
        RunConfig::load(Some(&p), &sets).map(|l| l.config)
    }

    #[test]
    fn empty_config_is_the_reference_case() {
        let c = load_str("", "toml", &[]).unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.lambda_sq, 30.0);
    }

    #[test]
    fn toml_and_json_agree() {
        let t = load_str("lambda_sq = 40.0\nthreads = 2\n[energy]\nvalues = [-1.5]\n", "toml", &[]).unwrap();
        let j = load_str(r#"{"lambda_sq": 40.0, "threads": 2, "energy": {"values": [-1.5]}}"#, "json", &[]).unwrap();
        assert_eq!(t, j);
        assert_eq!(t.threads, Threads::Count(2));
    }

    #[test]
    fn round_trip_is_lossless() {
        let mut c = RunConfig::default();
        c.energy.e0 = Some(-0.048_898_729_225_584_25);
        c.tolerances.tol_psi = Some(3e-8);
        let text = toml::to_string(&c).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&json).unwrap(), c);
    }

    #[test]
    fn overrides_apply_with_types() {
        let c = load_str("", "toml", &["energy.values=[-3.0]", "grid.base_points=1024", "omega=0.3", "threads=auto"]).unwrap();
        assert_eq!(c.energy.values, vec![-3.0]);
        assert_eq!(c.grid.base_points, 1024);
        assert_eq!(c.omega, "0.3");
        assert_eq!(c.threads, Threads::Auto);
    }

    #[test]
    fn invalid_values_are_rejected() {
        for (text, sets) in [
            ("lambda_sq = 0.0", vec![]),
            ("lambda_sq = -1.0", vec![]),
            ("", vec!["grid.base_points=1000"]),
            ("", vec!["tolerances.edge_tol=0"]),
            ("", vec!["precision=\"dd\""]),
            ("", vec!["omega=1.5"]),
            ("", vec!["no_such_key=1"]),
            ("", vec!["threads=0"]),
        ] {
            let r = load_str(text, "toml", &sets);
            assert!(matches!(r, Err(CliError::Validation(_))), "{text} {sets:?} → {r:?}");
        }
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.lambda_sq = 31.0;
        assert_ne!(a.hash(), b.hash());
    }
}
