//! Blow-up chase: the sequence of growing suprema on shrinking backward cylinders.

use serde::Serialize;

use super::{EstimateError, EstimateKind, EstimateReport, Verdict};
use crate::geometry::make_catalog;
use crate::grid::norms::RegionWeights;
use crate::grid::GridFunction;
use crate::geometry::ParabolicCube;

/// Parameters `ν`, `ℓ_j`, `n₀` derived from a decay fit `(A₀, β₀)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlowupParams {
    pub n: usize,
    pub a0: f64,
    pub beta0: f64,
    /// `2(2A₀)^{1/β₀}`
    pub alpha: f64,
    /// `α/(α-1)`
    pub nu: f64,
    /// First index with `Σ_{j ≥ n₀} ℓ_j ≤ 1/4`.
    pub n0: u64,
    /// `Σ_{j ≥ n₀} ℓ_j`
    pub tail: f64,
}

impl BlowupParams {
    pub fn new(n: usize, a0: f64, beta0: f64) -> Result<Self, EstimateError> {
        if !(a0 > 0.0 && a0.is_finite() && beta0 > 0.0 && beta0.is_finite()) || !(1..=3).contains(&n) {
            return Err(EstimateError::Invalid(format!("blow-up parameters need A0, beta0 > 0 and n in 1..=3 (A0={a0}, beta0={beta0}, n={n})")));
        }
        let alpha = 2.0 * (2.0 * a0).powf(1.0 / beta0);
        let nu = alpha / (alpha - 1.0);
        if !(nu > 1.0 && nu.is_finite()) {
            return Err(EstimateError::Invalid(format!("nu = {nu} is not a finite number above 1")));
        }
        let mut p = BlowupParams { n, a0, beta0, alpha, nu, n0: 0, tail: 0.0 };
        let ratio = p.ratio();
        let first = p.ell(0);
        // Σ_{j≥k} ℓ_j = ℓ_0 ρ^k / (1-ρ) ≤ 1/4
        let k = ((0.25 * (1.0 - ratio) / first).ln() / ratio.ln()).ceil().max(1.0);
        let mut n0 = k as u64;
        while n0 > 1 && p.tail_from(n0 - 1) <= 0.25 {
            n0 -= 1;
        }
        while p.tail_from(n0) > 0.25 {
            n0 += 1;
        }
        p.n0 = n0;
        p.tail = p.tail_from(n0);
        Ok(p)
    }

    /// `ℓ_{j+1}/ℓ_j = ν^{-β₀/(n+2)}`.
    pub fn ratio(&self) -> f64 {
        self.nu.powf(-self.beta0 / (self.n as f64 + 2.0))
    }

    /// `ℓ_j = 2(2^{β₀+1} A₀ ν^{-jβ₀})^{1/(n+2)}`.
    pub fn ell(&self, j: u64) -> f64 {
        let d = self.n as f64 + 2.0;
        2.0 * (2f64.powf(self.beta0 + 1.0) * self.a0).powf(1.0 / d) * self.ratio().powf(j as f64)
    }

    pub fn tail_from(&self, j: u64) -> f64 {
        self.ell(j) / (1.0 - self.ratio())
    }

    /// `ν^{j-1}`
    pub fn threshold(&self, j: u64) -> f64 {
        self.nu.powf(j as f64 - 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChaseStep {
    pub j: u64,
    pub x: Vec<f64>,
    pub t: f64,
    pub value: f64,
    pub ell: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChaseTermination {
    /// `v(start) < ν^{n₀-1}`.
    BelowStartThreshold,
    /// `sup_{Q̂_j} v < ν^j`.
    ThresholdNotMet { j: u64, sup: f64, needed: f64 },
    /// `Q̂_j` leaves the grid box.
    LeftDomain { j: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChaseTrace {
    pub steps: Vec<ChaseStep>,
    pub termination: ChaseTermination,
    /// Every visited point lies in `[-3/4,3/4]^n × [1/8,1/2]`.
    pub stayed_in_envelope: bool,
    /// `log_ν(sup v / ν^{n₀-1}) + 1`
    pub length_bound: f64,
}

fn in_envelope(x: &[f64], t: f64) -> bool {
    x.iter().all(|v| v.abs() <= 0.75 + 1e-12) && (0.125 - 1e-12..=0.5 + 1e-12).contains(&t)
}

/// Follows `v(p_j) ≥ ν^{j-1} ⇒ sup_{Q̂_j(p_j)} v ≥ ν^j` from `start` ∈ closure(J₃).
pub fn blowup_chase(v: &GridFunction, params: &BlowupParams, start: (&[f64], f64)) -> Result<(ChaseTrace, EstimateReport), EstimateError> {
    let grid = v.grid();
    let n = grid.n();
    if params.n != n {
        return Err(EstimateError::Invalid(format!("parameters built for n = {} but the field has n = {n}", params.n)));
    }
    let (x0, t0) = start;
    let j3 = make_catalog(n)?.j3;
    if x0.len() != n || !j3.contains_closed(x0, t0) {
        return Err(EstimateError::StartOutsideJ3 { x: x0.to_vec(), t: t0 });
    }
    let v0 = v.interpolate(x0, t0).ok_or(EstimateError::Coverage { region: "J3".into() })?;
    let sup_v = v.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let length_bound = if sup_v > 0.0 { (sup_v / params.threshold(params.n0)).ln() / params.nu.ln() + 1.0 } else { 0.0 };

    let mut steps = Vec::new();
    let termination;
    if v0 < params.threshold(params.n0) {
        termination = ChaseTermination::BelowStartThreshold;
    } else {
        // largest j with v0 ≥ ν^{j-1}
        let mut j = ((v0.ln() / params.nu.ln()).floor() as u64 + 1).max(params.n0);
        while j > params.n0 && v0 < params.threshold(j) {
            j -= 1;
        }
        let (mut x, mut t, mut value) = (x0.to_vec(), t0, v0);
        loop {
            let ell = params.ell(j);
            steps.push(ChaseStep { j, x: x.clone(), t, value, ell });
            let depth = ell * ell / 10.0;
            let inside = (0..n).all(|a| x[a] - ell >= grid.lo(a) - 1e-12 && x[a] + ell <= grid.hi(a) + 1e-12) && t - depth >= grid.t_lo() - 1e-12;
            if !inside {
                termination = ChaseTermination::LeftDomain { j };
                break;
            }
            let window = ParabolicCube::from_f64(&x, ell, t, depth)?;
            let w = match RegionWeights::new(grid, &window) {
                Ok(w) => w,
                Err(_) => {
                    termination = ChaseTermination::LeftDomain { j };
                    break;
                }
            };
            let (k, idx, best) = w.argmax(v);
            let needed = params.threshold(j + 1);
            if best < needed {
                termination = ChaseTermination::ThresholdNotMet { j, sup: best, needed };
                break;
            }
            let p = grid.point(idx);
            x = p[..n].to_vec();
            t = grid.time(k);
            value = best;
            j += 1;
        }
    }
    let stayed = steps.iter().all(|s| in_envelope(&s.x, s.t));
    let trace = ChaseTrace { steps, termination, stayed_in_envelope: stayed, length_bound };

    let mut r = EstimateReport::new(EstimateKind::BlowupChase, format!("A0={} beta0={} n={}", params.a0, params.beta0, n));
    r.set("A0", params.a0);
    r.set("beta0", params.beta0);
    r.set("alpha", params.alpha);
    r.set("nu", params.nu);
    r.set("n0", params.n0 as f64);
    r.set("chase_length", trace.steps.len() as f64);
    let within = trace.steps.len() as f64 <= length_bound.max(0.0) + 1.0;
    r.verdict = if within && trace.stayed_in_envelope {
        Verdict::pass(format!("{} steps, terminated by {:?}", trace.steps.len(), trace.termination))
    } else if !within {
        Verdict::fail(format!("chase length {} exceeds the bound {length_bound}", trace.steps.len()))
    } else {
        Verdict::fail("chase left [-3/4,3/4]^n x [1/8,1/2]")
    };
    Ok((trace, r))
}
