//! Power-law decay of superlevel-set measures on `J₁`.

use serde::Serialize;

use super::{fit_power_law, require_cover, EstimateError, EstimateKind, EstimateReport, Table, Verdict};
use crate::geometry::make_catalog;
use crate::grid::norms::{superlevel_measure, RegionWeights};
use crate::grid::GridFunction;

const S_POINTS: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    /// Raised so that `A₀ s^{-β₀}` dominates every measured point.
    pub a0: f64,
    pub beta0: f64,
    /// Intercept of the least-squares fit before raising.
    pub a0_fit: f64,
    pub residual: f64,
}

/// 24 geometric points from the smallest positive value of `u` on `J₁` to its maximum.
pub fn default_s_grid(u: &GridFunction) -> Result<Vec<f64>, EstimateError> {
    let cat = make_catalog(u.grid().n())?;
    let w = RegionWeights::new(u.grid(), &cat.j1)?;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &(k, _) in &w.time {
        for &(idx, _) in &w.space {
            let v = u.at(k, idx);
            if v > 0.0 {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    if !lo.is_finite() {
        return Ok(Vec::new());
    }
    let ratio = (hi / lo).powf(1.0 / (S_POINTS - 1) as f64);
    Ok((0..S_POINTS).map(|i| if i + 1 == S_POINTS { hi } else { lo * ratio.powi(i as i32) }).collect())
}

/// Fits `|{u ≥ s} ∩ J₁| ≤ A₀ s^{-β₀}` on `s_grid` (default: [`default_s_grid`]).
pub fn distribution_decay(u: &GridFunction, s_grid: Option<&[f64]>) -> Result<(Option<DecayFit>, EstimateReport), EstimateError> {
    let min = u.values().iter().copied().fold(f64::INFINITY, f64::min);
    if min < -1e-10 {
        return Err(EstimateError::Negative { min });
    }
    let cat = make_catalog(u.grid().n())?;
    require_cover(u, &cat.j1, "J1")?;
    let owned;
    let s_grid = match s_grid {
        Some(s) => s,
        None => {
            owned = default_s_grid(u)?;
            &owned
        }
    };
    let mut table = Table::new(&["s", "measure"]);
    let mut points = Vec::new();
    for &s in s_grid {
        let m = superlevel_measure(u, &cat.j1, s)?;
        table.push(vec![s, m]);
        points.push((s, m));
    }
    let mut r = EstimateReport::new(EstimateKind::Decay, "field");
    r.tables.insert("decay".into(), table);
    let positive: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.0 > 0.0 && p.1 > 0.0).collect();
    if positive.is_empty() {
        r.flag("degenerate fit: every superlevel measure is zero");
        r.verdict = Verdict::fail("all measures zero");
        return Ok((None, r));
    }
    let fit = fit_power_law(&positive);
    let Some(fit) = fit.filter(|f| f.slope < 0.0) else {
        r.flag("degenerate fit: step-like distribution without power decay");
        r.verdict = Verdict::fail("no decreasing power law through the measured points");
        return Ok((None, r));
    };
    let beta0 = -fit.slope;
    let a0_fit = fit.intercept.exp();
    let a0 = positive.iter().map(|(s, m)| m * s.powf(beta0)).fold(a0_fit, f64::max);
    let dominated = points.iter().all(|&(s, m)| s <= 0.0 || m <= a0 * s.powf(-beta0) * (1.0 + 1e-12));
    r.set("A0", a0);
    r.set("beta0", beta0);
    r.set("A0_fit", a0_fit);
    r.set("fit_residual", fit.residual);
    r.verdict = if dominated {
        Verdict::pass(format!("{a0:e} s^-{beta0:.4} dominates {} points", points.len()))
    } else {
        Verdict::fail("envelope below a measured point")
    };
    Ok((Some(DecayFit { a0, beta0, a0_fit, residual: fit.residual }), r))
}
