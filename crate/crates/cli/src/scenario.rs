//! Scenario files: TOML tables parsed into a validated [`Scenario`].

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use pucci_lab::equation::{check_apq1, check_pqm};
use pucci_lab::{Branch, PucciPair};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("malformed scenario: {0}")]
    Malformed(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Abp,
    AbpSuperlinear,
    WeakHarnack,
    Harnack,
    Holder,
    LocalMax,
    Cz,
    Barrier,
    Blowup,
    Partition,
    Convergence,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("kind serializes");
        f.write_str(s.as_str().expect("string"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PucciConfig {
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
}

impl Default for PucciConfig {
    fn default() -> Self {
        PucciConfig { lambda: 1.0, big_lambda: 2.0 }
    }
}

/// Gradient coefficient `μ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MuConfig {
    Constant {
        value: f64,
    },
    PowerSingularity {
        center: Vec<f64>,
        #[serde(default)]
        center_time: f64,
        exponent: f64,
        scale: f64,
        cap: Option<f64>,
    },
    RandomBumps {
        count: usize,
        amplitude: f64,
        width: Option<f64>,
    },
}

impl Default for MuConfig {
    fn default() -> Self {
        MuConfig::Constant { value: 0.0 }
    }
}

/// Source term `f` or boundary data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldConfig {
    Zero,
    Constant { value: f64 },
    Expr { expr: String },
    RandomBumps { count: usize, amplitude: f64, width: Option<f64> },
    /// Piecewise-constant random data with `pieces` steps per axis.
    RoughSteps { pieces: usize, amplitude: f64 },
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig::Zero
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub nt: usize,
    /// Spatial half-width; defaults by kind.
    pub half_width: Option<f64>,
    pub t_lo: Option<f64>,
    pub t_hi: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub delta_hat: f64,
    pub delta1: f64,
    /// Fixed-point and barrier audit tolerance.
    pub tolerance: f64,
    /// Allowed change factor across one refinement.
    pub refinement_factor: f64,
    /// Minimum observed order for `convergence`.
    pub min_order: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { delta_hat: 1.0, delta1: 0.1, tolerance: 1e-6, refinement_factor: 2.0, min_order: 1.8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CzConfig {
    pub resolution: u32,
    pub sigma: Vec<f64>,
    pub m: Vec<u32>,
    pub instances: usize,
    pub write_sets: bool,
}

impl Default for CzConfig {
    fn default() -> Self {
        CzConfig { resolution: 0, sigma: vec![0.3, 0.5, 0.9], m: vec![1, 2, 5, 36], instances: 60, write_sets: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub amplitude: f64,
    pub kappa: f64,
    pub t_top: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { amplitude: 1.0, kappa: std::f64::consts::PI / 2.0, t_top: 0.25 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlowupConfig {
    pub a0: Option<f64>,
    pub beta0: Option<f64>,
    pub start_x: Vec<f64>,
    pub start_t: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    kind: Kind,
    dimension: usize,
    #[serde(default)]
    branch: Option<Branch>,
    #[serde(default)]
    pucci: PucciConfig,
    #[serde(default)]
    mu: MuConfig,
    #[serde(default = "default_exponent")]
    q: f64,
    #[serde(default = "one")]
    m: f64,
    #[serde(default)]
    f: FieldConfig,
    #[serde(default = "default_exponent")]
    p: f64,
    #[serde(default)]
    boundary: FieldConfig,
    grid: GridConfig,
    #[serde(default = "one_usize")]
    refinement_levels: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    eps0_grid: Option<Vec<f64>>,
    #[serde(default)]
    thresholds: Thresholds,
    #[serde(default)]
    cz: Option<CzConfig>,
    #[serde(default)]
    oracle: Option<OracleConfig>,
    #[serde(default)]
    blowup: Option<BlowupConfig>,
}

fn default_exponent() -> f64 {
    8.0
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

/// A validated scenario.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Scenario {
    pub name: String,
    pub kind: Kind,
    pub dimension: usize,
    pub branch: Option<Branch>,
    pub pucci: PucciConfig,
    pub mu: MuConfig,
    pub q: f64,
    pub m: f64,
    pub f: FieldConfig,
    pub p: f64,
    pub boundary: FieldConfig,
    pub grid: GridConfig,
    pub refinement_levels: usize,
    pub seed: u64,
    pub eps0_grid: Vec<f64>,
    pub thresholds: Thresholds,
    pub cz: CzConfig,
    pub oracle: OracleConfig,
    pub blowup: Option<BlowupConfig>,
    /// SHA-256 of the configuration text.
    pub config_digest: String,
}

impl Scenario {
    pub fn pair(&self) -> PucciPair {
        PucciPair::new(self.pucci.lambda, self.pucci.big_lambda).expect("validated")
    }
}

pub fn parse_scenario(path: &Path) -> Result<Scenario, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read { path: path.display().to_string(), message: e.to_string() })?;
    parse_scenario_str(&text)
}

pub fn parse_scenario_str(text: &str) -> Result<Scenario, ConfigError> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| ConfigError::Malformed(e.message().to_string()))?;
    let digest = hex::encode(Sha256::digest(text.as_bytes()));
    validate(raw, digest)
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

fn validate(raw: RawScenario, config_digest: String) -> Result<Scenario, ConfigError> {
    let n = raw.dimension;
    if !(1..=2).contains(&n) {
        return invalid(format!("dimension must be 1 or 2, got {n}"));
    }
    if raw.name.is_empty() || !raw.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
        return invalid(format!("name must be nonempty ASCII letters, digits, '-' or '_', got {:?}", raw.name));
    }
    if let Err(e) = PucciPair::new(raw.pucci.lambda, raw.pucci.big_lambda) {
        return invalid(format!("pucci: {e}"));
    }
    check_apq1(n, raw.p, raw.q).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    if !(raw.m >= 1.0 && raw.m.is_finite()) {
        return invalid(format!("m >= 1 required, got {}", raw.m));
    }
    if raw.m > 1.0 {
        check_pqm(n, raw.p, raw.q, raw.m).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    }
    match &raw.mu {
        MuConfig::Constant { value } if !(*value >= 0.0 && value.is_finite()) => return invalid(format!("mu.value must be finite and >= 0, got {value}")),
        MuConfig::PowerSingularity { center, exponent, scale, cap, .. } => {
            if center.len() != n {
                return invalid(format!("mu.center has {} coordinates, dimension is {n}", center.len()));
            }
            if !(*exponent > 0.0 && *scale >= 0.0) {
                return invalid("mu.exponent must be > 0 and mu.scale >= 0");
            }
            let aq = exponent * raw.q;
            let d = (n + 2) as f64;
            if !(aq < d) {
                return invalid(format!("power_singularity: a·q = {aq} >= n+2 = {d}, so mu is not in L^q near the singular point"));
            }
            if let Some(c) = cap {
                if !(*c > 0.0) {
                    return invalid("mu.cap must be positive");
                }
            }
        }
        MuConfig::RandomBumps { amplitude, width, .. } => {
            if !(*amplitude >= 0.0) || width.is_some_and(|w| !(w > 0.0)) {
                return invalid("mu random_bumps needs amplitude >= 0 and width > 0");
            }
        }
        _ => {}
    }
    for (label, fc) in [("f", &raw.f), ("boundary", &raw.boundary)] {
        check_field(label, fc, n)?;
    }
    let g = &raw.grid;
    if g.nx < 3 || g.nt < 1 {
        return invalid(format!("grid needs nx >= 3 and nt >= 1, got nx={}, nt={}", g.nx, g.nt));
    }
    if g.half_width.is_some_and(|w| !(w > 0.0)) {
        return invalid("grid.half_width must be positive");
    }
    if let (Some(a), Some(b)) = (g.t_lo, g.t_hi) {
        if !(b > a) {
            return invalid(format!("grid time window ({a}, {b}] is empty"));
        }
    }
    if !(1..=5).contains(&raw.refinement_levels) {
        return invalid(format!("refinement_levels must be in 1..=5, got {}", raw.refinement_levels));
    }
    if raw.kind == Kind::Convergence && raw.refinement_levels < 2 {
        return invalid("convergence needs refinement_levels >= 2");
    }
    let eps0_grid = raw.eps0_grid.unwrap_or_else(|| pucci_lab::estimators::DEFAULT_EPS0_GRID.to_vec());
    if eps0_grid.is_empty() || eps0_grid.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return invalid("eps0_grid must be a nonempty list of positive numbers");
    }
    let t = &raw.thresholds;
    for (name, v) in [("delta_hat", t.delta_hat), ("delta1", t.delta1), ("tolerance", t.tolerance), ("min_order", t.min_order)] {
        if !(v > 0.0 && v.is_finite()) {
            return invalid(format!("thresholds.{name} must be positive, got {v}"));
        }
    }
    if !(t.refinement_factor >= 1.0) {
        return invalid("thresholds.refinement_factor must be >= 1");
    }
    let mut cz = raw.cz.unwrap_or_default();
    if cz.resolution == 0 {
        cz.resolution = if n == 1 { 4 } else { 3 };
    }
    if (n + 2) as u32 * cz.resolution > 24 {
        return invalid(format!("cz.resolution {} too large for dimension {n}", cz.resolution));
    }
    if cz.sigma.iter().any(|s| !(*s > 0.0 && *s < 1.0)) || cz.m.iter().any(|m| *m == 0) || cz.sigma.is_empty() || cz.m.is_empty() {
        return invalid("cz.sigma must lie in (0,1) and cz.m must be positive");
    }
    let oracle = raw.oracle.unwrap_or_default();
    if !(oracle.kappa > 0.0 && oracle.amplitude != 0.0 && oracle.t_top > 0.0) {
        return invalid("oracle needs kappa > 0, t_top > 0 and a nonzero amplitude");
    }
    if let Some(b) = &raw.blowup {
        if b.start_x.len() != n {
            return invalid(format!("blowup.start_x has {} coordinates, dimension is {n}", b.start_x.len()));
        }
    }
    Ok(Scenario {
        name: raw.name,
        kind: raw.kind,
        dimension: n,
        branch: raw.branch,
        pucci: raw.pucci,
        mu: raw.mu,
        q: raw.q,
        m: raw.m,
        f: raw.f,
        p: raw.p,
        boundary: raw.boundary,
        grid: raw.grid,
        refinement_levels: raw.refinement_levels,
        seed: raw.seed,
        eps0_grid,
        thresholds: raw.thresholds,
        cz,
        oracle,
        blowup: raw.blowup,
        config_digest,
    })
}

fn check_field(label: &str, fc: &FieldConfig, n: usize) -> Result<(), ConfigError> {
    match fc {
        FieldConfig::Expr { expr } => {
            let e = pucci_lab::grid::expr::Expr::parse(expr).map_err(|e| ConfigError::Invalid(format!("{label}.expr: {e}")))?;
            e.check_dim(n).map_err(|e| ConfigError::Invalid(format!("{label}.expr: {e}")))
        }
        FieldConfig::Constant { value } if !value.is_finite() => invalid(format!("{label}.value must be finite")),
        FieldConfig::RandomBumps { width, .. } if width.is_some_and(|w| !(w > 0.0)) => invalid(format!("{label}.width must be positive")),
        FieldConfig::RoughSteps { pieces, .. } if *pieces == 0 => invalid(format!("{label}.pieces must be positive")),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "minimal"
kind = "abp"
dimension = 1
[grid]
nx = 17
nt = 600
"#;

    #[test]
    fn minimal_config_parses() {
        let s = parse_scenario_str(MINIMAL).unwrap();
        assert_eq!(s.mu, MuConfig::Constant { value: 0.0 });
        assert_eq!(s.f, FieldConfig::Zero);
        assert_eq!(s.eps0_grid.len(), 20);
        assert_eq!(s.config_digest.len(), 64);
    }

    #[test]
    fn non_integrable_singularity_is_rejected() {
        let text = r#"
name = "sing"
kind = "abp"
dimension = 1
q = 4.0
p = 4.0
[mu]
type = "power_singularity"
center = [0.0]
exponent = 1.0
scale = 1.0
[grid]
nx = 17
nt = 600
"#;
        let e = parse_scenario_str(text).unwrap_err().to_string();
        assert!(e.contains("a·q = 4 >= n+2 = 3"), "{e}");
    }

    #[test]
    fn pqm_case_iii_is_accepted() {
        let text = MINIMAL.replace("dimension = 1", "dimension = 1\nm = 2.0\np = 5.0\nq = 5.0");
        assert!(parse_scenario_str(&text).is_ok());
    }

    #[test]
    fn pqm_case_iv_message() {
        let text = MINIMAL.replace("dimension = 1", "dimension = 1\nm = 4.0\np = 2.5\nq = 6.0");
        let e = parse_scenario_str(&text).unwrap_err().to_string();
        assert!(e.contains("pqm case iv: mq(n+2-p) < (n+2)(q-p) violated"), "{e}");
    }

    #[test]
    fn unknown_keys_are_malformed() {
        let text = MINIMAL.replace("dimension = 1", "dimension = 1\nbogus = 3");
        assert!(matches!(parse_scenario_str(&text), Err(ConfigError::Malformed(_))));
    }

    #[test]
    fn bad_expression_is_reported() {
        let text = format!("{MINIMAL}\n[f]\ntype = \"expr\"\nexpr = \"sin(y)\"\n");
        let e = parse_scenario_str(&text).unwrap_err().to_string();
        assert!(e.contains("f.expr"), "{e}");
    }
}
