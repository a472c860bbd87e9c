//! Checkers and constant fitters for the quantitative estimates.
//!
//! Every checker is a pure function of a grid field and an equation spec. It
//! returns an [`EstimateReport`] holding the fitted constants, a verdict with a
//! witness, and optionally a refinement trace assembled by
//! [`EstimateReport::with_refinement`].

mod abp;
mod blowup;
mod decay;
mod harnack;
mod holder;
mod partition;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equation::SpecError;
use crate::geometry::{GeometryError, ParabolicCube};
use crate::grid::barrier::BarrierError;
use crate::grid::solver::SolveError;
use crate::grid::{GridError, GridFunction};

pub use abp::{abp_check, abp_superlinear_check, parabolic_diameter, AbpOptions};
pub use blowup::{blowup_chase, BlowupParams, ChaseStep, ChaseTermination, ChaseTrace};
pub use decay::{default_s_grid, distribution_decay, DecayFit};
pub use harnack::{basic_measure_report, harnack_chain_bound, harnack_report, local_max_report, weak_harnack_report, DEFAULT_EPS0_GRID};
pub use holder::{holder_report, HolderOptions};
pub use partition::{time_partition, TimePartition};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("field does not cover {region}")]
    Coverage { region: String },
    #[error("contract violation: field takes the negative value {min:e}")]
    Negative { min: f64 },
    #[error("start point ({x:?}, {t}) lies outside the closure of J3")]
    StartOutsideJ3 { x: Vec<f64>, t: f64 },
    #[error("only {usable} usable radii on this grid (need at least 3)")]
    TooFewRadii { usable: usize },
    #[error("time slice {level} (t = {time}) alone has L^q norm {norm:e} > delta_hat = {delta_hat:e}")]
    SingularSlice { level: usize, time: f64, norm: f64, delta_hat: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Barrier(#[from] BarrierError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    Abp,
    AbpSuperlinear,
    WeakHarnack,
    Decay,
    Holder,
    LocalMax,
    Harnack,
    BlowupChase,
    Partition,
    BasicMeasure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub passed: bool,
    pub witness: String,
}

impl Verdict {
    pub fn pass(witness: impl Into<String>) -> Self {
        Verdict { passed: true, witness: witness.into() }
    }

    pub fn fail(witness: impl Into<String>) -> Self {
        Verdict { passed: false, witness: witness.into() }
    }
}

/// Fitted values at one grid level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub level: usize,
    pub nx: usize,
    pub nt: usize,
    pub h: f64,
    pub values: BTreeMap<String, f64>,
}

/// A named numeric table, emitted as CSV next to the JSON report.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Values printed with Rust's shortest round-trip formatting.
    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:?}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub schema_version: u32,
    pub kind: EstimateKind,
    /// Fitted constants keyed `C0, C1, C3, C4, eps0, A0, beta0, alpha, gamma, alpha0, theta, M, k` plus auxiliary values.
    pub fitted: BTreeMap<String, f64>,
    /// Digest of the equation spec the field was checked against.
    pub inputs: String,
    pub verdict: Verdict,
    pub refinement_trace: Vec<TraceEntry>,
    pub flags: Vec<String>,
    pub tables: BTreeMap<String, Table>,
}

impl EstimateReport {
    pub fn new(kind: EstimateKind, inputs: impl Into<String>) -> Self {
        EstimateReport {
            schema_version: SCHEMA_VERSION,
            kind,
            fitted: BTreeMap::new(),
            inputs: inputs.into(),
            verdict: Verdict::pass(""),
            refinement_trace: Vec::new(),
            flags: Vec::new(),
            tables: BTreeMap::new(),
        }
    }

    /// Records a value; non-finite values are dropped and flagged.
    pub fn set(&mut self, name: &str, value: f64) {
        if value.is_finite() {
            self.fitted.insert(name.to_string(), value);
        } else {
            self.flags.push(format!("{name} is not finite ({value})"));
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.fitted.get(name).copied()
    }

    pub fn flag(&mut self, msg: impl Into<String>) {
        self.flags.push(msg.into());
    }

    /// Combines reports computed on successively refined grids (coarsest first).
    ///
    /// The result carries the finest level's constants. It passes iff every
    /// level passes and each of `keys` changes by a factor of at most `factor`
    /// between consecutive levels.
    pub fn with_refinement(levels: Vec<(usize, usize, f64, EstimateReport)>, keys: &[&str], factor: f64) -> Option<EstimateReport> {
        let trace: Vec<TraceEntry> = levels
            .iter()
            .enumerate()
            .map(|(level, (nx, nt, h, r))| TraceEntry { level, nx: *nx, nt: *nt, h: *h, values: r.fitted.clone() })
            .collect();
        let mut failures = Vec::new();
        for (i, (_, _, _, r)) in levels.iter().enumerate() {
            if !r.verdict.passed {
                failures.push(format!("level {i}: {}", r.verdict.witness));
            }
        }
        for key in keys {
            for w in trace.windows(2) {
                let (a, b) = (w[0].values.get(*key), w[1].values.get(*key));
                match (a, b) {
                    (Some(&a), Some(&b)) if refinement_stable(a, b, factor) => {}
                    (Some(&a), Some(&b)) => failures.push(format!("{key} moved from {a:e} (level {}) to {b:e} (level {})", w[0].level, w[1].level)),
                    _ => failures.push(format!("{key} missing at level {} or {}", w[0].level, w[1].level)),
                }
            }
        }
        let (_, _, _, mut last) = levels.into_iter().last()?;
        last.verdict = if failures.is_empty() {
            Verdict::pass(format!("{} levels; {} stable within factor {factor}", trace.len(), keys.join(", ")))
        } else {
            Verdict::fail(failures.join("; "))
        };
        last.refinement_trace = trace;
        Some(last)
    }
}

/// `max(a,b)/min(a,b) ≤ factor`, with two zeros counting as stable.
pub fn refinement_stable(a: f64, b: f64, factor: f64) -> bool {
    if a == 0.0 && b == 0.0 {
        return true;
    }
    a > 0.0 && b > 0.0 && a.max(b) <= factor * a.min(b)
}

/// Least-squares line `y = intercept + slope·x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
}

/// Fits a line; `None` with fewer than two points or constant `x`.
pub fn fit_line(points: &[(f64, f64)]) -> Option<LineFit> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 1e-300) {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    Some(LineFit { slope, intercept, residual })
}

/// Fits `y ≈ A x^b` in log space over the points with `x, y > 0`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Option<LineFit> {
    let logs: Vec<(f64, f64)> = points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    fit_line(&logs)
}

/// Fails with [`EstimateError::Coverage`] unless the grid box contains `region`.
pub(crate) fn require_cover(u: &GridFunction, region: &ParabolicCube, name: &str) -> Result<(), EstimateError> {
    let g = u.grid();
    let eps = 1e-9;
    let ok = region.dim() == g.n()
        && (0..g.n()).all(|a| g.lo(a) <= region.lo_f64(a) + eps && g.hi(a) >= region.hi_f64(a) - eps)
        && g.t_lo() <= region.t_lo_f64() + eps
        && g.t_hi() >= region.t_hi_f64() - eps;
    if ok {
        Ok(())
    } else {
        Err(EstimateError::Coverage { region: name.to_string() })
    }
}

/// Residual audit tolerance `10h²`.
pub fn audit_tolerance(u: &GridFunction) -> f64 {
    10.0 * u.grid().h().powi(2)
}
