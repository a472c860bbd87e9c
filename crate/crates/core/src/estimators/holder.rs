//! Oscillation decay on the nested cylinders `Q_r` below `(0, 10)`.

use super::{fit_power_law, EstimateError, EstimateKind, EstimateReport, Table, Verdict};
use crate::equation::EquationSpec;
use crate::geometry::{make_catalog, ParabolicCube};
use crate::grid::norms::{holder_seminorm, lp_norm, sample_field, RegionWeights};
use crate::grid::GridFunction;

#[derive(Clone, Debug)]
pub struct HolderOptions {
    /// Radii `10^{-1}, …, 10^{-levels}`.
    pub levels: u32,
    /// Pair subsample stride for the direct seminorm.
    pub sample: usize,
}

impl Default for HolderOptions {
    fn default() -> Self {
        HolderOptions { levels: 6, sample: 4 }
    }
}

/// Number of grid nodes (per axis, in time) inside a region.
fn node_counts(u: &GridFunction, region: &ParabolicCube) -> Option<(usize, usize)> {
    let w = RegionWeights::new(u.grid(), region).ok()?;
    let per_axis = (w.space.len() as f64).powf(1.0 / u.grid().n() as f64).round() as usize;
    Some((per_axis, w.time.len()))
}

fn covers(u: &GridFunction, region: &ParabolicCube) -> bool {
    let g = u.grid();
    let eps = 1e-9;
    (0..g.n()).all(|a| g.lo(a) <= region.lo_f64(a) + eps && g.hi(a) >= region.hi_f64(a) - eps)
        && g.t_lo() <= region.t_lo_f64() + eps
        && g.t_hi() >= region.t_hi_f64() - eps
}

/// Fits `γ` in `ω(r/10) ≤ γ ω(r) + r^{α₀}` for the normalized field
/// `u / (‖u‖_∞ + ‖f‖_{L^p})`, and `α = min(-log γ / log 10, α₀)`.
///
/// A radius is usable when `Q_r` lies in the grid box and holds at least two
/// nodes per axis and two time levels.
pub fn holder_report(u: &GridFunction, spec: &EquationSpec, opts: &HolderOptions) -> Result<EstimateReport, EstimateError> {
    let n = u.grid().n();
    let cat = make_catalog(n)?;
    let alpha0 = 2.0 - (n as f64 + 2.0) / spec.p;
    let whole = u.grid().cube();
    let f = sample_field(&spec.f, u.grid())?;
    let norm = lp_norm(u, &whole, f64::INFINITY)? + lp_norm(&f, &whole, spec.p)?;

    let mut radii = Vec::new();
    for l in 1..=opts.levels {
        let r = 10f64.powi(-(l as i32));
        let q = cat.q_r(r)?;
        if !covers(u, &q) {
            continue;
        }
        match node_counts(u, &q) {
            Some((sx, st)) if sx >= 2 && st >= 2 => radii.push((r, q)),
            _ => break,
        }
    }
    if radii.len() < 3 {
        return Err(EstimateError::TooFewRadii { usable: radii.len() });
    }

    let mut table = Table::new(&["r", "omega"]);
    let mut omega = Vec::with_capacity(radii.len());
    for (r, q) in &radii {
        let w = RegionWeights::new(u.grid(), q)?;
        let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
        for &(k, _) in &w.time {
            for &(idx, _) in &w.space {
                let v = u.at(k, idx);
                hi = hi.max(v);
                lo = lo.min(v);
            }
        }
        let om = if norm > 0.0 { (hi - lo) / norm } else { 0.0 };
        table.push(vec![*r, om]);
        omega.push((*r, om));
    }

    let mut gamma: f64 = 0.0;
    let mut gammas = Table::new(&["r", "gamma_r"]);
    for w in omega.windows(2) {
        let ((r, big), (_, small)) = (w[0], w[1]);
        if big > 0.0 {
            let g = (small - r.powf(alpha0)).max(0.0) / big;
            gammas.push(vec![r, g]);
            gamma = gamma.max(g);
        }
    }
    let alpha = if gamma > 0.0 { (-gamma.ln() / 10f64.ln()).min(alpha0) } else { alpha0 };
    let recursion_holds = omega.windows(2).all(|w| w[1].1 <= gamma * w[0].1 + w[0].0.powf(alpha0) + 1e-15);

    let mut r = EstimateReport::new(EstimateKind::Holder, spec.digest());
    r.set("alpha0", alpha0);
    r.set("gamma", gamma);
    r.set("alpha", alpha);
    r.set("normalization", norm);
    r.set("usable_radii", radii.len() as f64);
    if let Some(fit) = fit_power_law(&omega) {
        r.set("alpha_direct", fit.slope);
        r.set("alpha_direct_residual", fit.residual);
    }
    let (_, top) = &radii[0];
    let eff = alpha.min(1.0);
    if eff > 0.0 {
        r.set("holder_seminorm", holder_seminorm(u, top, eff, opts.sample)? / norm.max(f64::MIN_POSITIVE));
    }
    r.tables.insert("oscillation".into(), table);
    r.tables.insert("gamma".into(), gammas);
    r.verdict = if !(gamma < 1.0) {
        Verdict::fail(format!("gamma = {gamma} is not below 1"))
    } else if !(alpha > 0.0 && alpha <= alpha0) {
        Verdict::fail(format!("alpha = {alpha} outside (0, alpha0 = {alpha0}]"))
    } else if !recursion_holds {
        Verdict::fail("oscillation recursion fails at a measured radius")
    } else {
        Verdict::pass(format!("gamma = {gamma:.4}, alpha = {alpha:.4} over {} radii", radii.len()))
    };
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpaceTimeGrid;
    use crate::pucci::{Branch, PucciPair};

    fn grid() -> SpaceTimeGrid {
        SpaceTimeGrid::new(1, &[0.0], 1.0, 9.9, 10.0, 201, 20000).unwrap()
    }

    fn spec() -> EquationSpec {
        EquationSpec::new(1, Branch::Plus, PucciPair::new(1.0, 2.0).unwrap()).with_source(crate::equation::Field::zero(), 6.0)
    }

    #[test]
    fn constant_field_caps_at_alpha0() {
        let u = GridFunction::constant(grid(), 3.0).unwrap();
        let r = holder_report(&u, &spec(), &HolderOptions::default()).unwrap();
        assert_eq!(r.get("gamma"), Some(0.0));
        assert_eq!(r.get("alpha"), Some(2.0 - 3.0 / 6.0));
        assert!(r.verdict.passed);
    }

    #[test]
    fn linear_field_oscillates_linearly() {
        let u = GridFunction::from_fn(grid(), |x, _| x[0]).unwrap();
        let r = holder_report(&u, &spec(), &HolderOptions::default()).unwrap();
        let om = &r.tables["oscillation"].rows;
        for row in om {
            assert!((row[1] - 20.0 * row[0]).abs() < 1e-9, "{row:?}");
        }
        assert!(r.get("alpha").unwrap() >= 1.0f64.min(1.5) - 1e-9);
        assert!((r.get("alpha_direct").unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn coarse_grid_has_too_few_radii() {
        let g = SpaceTimeGrid::new(1, &[0.0], 1.0, 9.9, 10.0, 33, 40).unwrap();
        let u = GridFunction::constant(g, 1.0).unwrap();
        assert!(matches!(holder_report(&u, &spec(), &HolderOptions::default()), Err(EstimateError::TooFewRadii { .. })));
    }
}
