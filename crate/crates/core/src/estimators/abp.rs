//! Maximum-principle slack ratios.

use super::{audit_tolerance, EstimateError, EstimateKind, EstimateReport, Verdict};
use crate::equation::{check_apqm1, EquationSpec};
use crate::grid::norms::{lp_norm, sample_coefficient, sample_field, sup, sup_parabolic_boundary, RegionWeights};
use crate::grid::solver::{residual_audit, AuditKind};
use crate::grid::GridFunction;

/// Parabolic diameter `sqrt(diam_x² + depth)` of the grid box.
pub fn parabolic_diameter(u: &GridFunction) -> f64 {
    let g = u.grid();
    let side = 2.0 * g.half_width();
    (g.n() as f64 * side * side + (g.t_hi() - g.t_lo())).sqrt()
}

#[derive(Clone, Debug)]
pub struct AbpOptions {
    /// Subsolution audit tolerance; `None` uses `10h²`.
    pub tolerance: Option<f64>,
    /// Threshold `δ` of the small regime `‖f‖^{m-1}‖μ‖ ≤ δ`.
    pub small_delta: f64,
}

impl Default for AbpOptions {
    fn default() -> Self {
        AbpOptions { tolerance: None, small_delta: 0.1 }
    }
}

struct Slack {
    slack: f64,
    boundary_sup: f64,
    f_norm: f64,
    f_norm_plus: f64,
    scale: f64,
}

fn slack(u: &GridFunction, spec: &EquationSpec) -> Result<Slack, EstimateError> {
    let grid = u.grid();
    let q = grid.cube();
    let boundary_sup = sup_parabolic_boundary(u);
    let top = sup(u, &q)?;
    let f = sample_field(&spec.f, grid)?;
    let f_norm = lp_norm(&f, &q, spec.p)?;
    let level = boundary_sup.max(0.0);
    let w = RegionWeights::new(grid, &q)?;
    let f_norm_plus = w.integrate_with(u, &f, |uv, fv| if uv > level { fv.abs().powf(spec.p) } else { 0.0 }).powf(1.0 / spec.p);
    let alpha0 = 2.0 - (grid.n() as f64 + 2.0) / spec.p;
    Ok(Slack { slack: (top - boundary_sup).max(0.0), boundary_sup, f_norm, f_norm_plus, scale: parabolic_diameter(u).powf(alpha0) })
}

/// Fits `C₁ = (sup_Q u - sup_{∂_pQ} u)⁺ / (d_Q^{2-(n+2)/p} ‖f‖_{L^p(Q)})` for a discrete
/// subsolution `u` on its grid box `Q`, together with the variant over `Q₊[u]`.
pub fn abp_check(u: &GridFunction, spec: &EquationSpec, opts: &AbpOptions) -> Result<EstimateReport, EstimateError> {
    let tol = opts.tolerance.unwrap_or_else(|| audit_tolerance(u));
    let audit = residual_audit(u, spec, AuditKind::Subsolution, tol)?;
    let s = slack(u, spec)?;
    let mut r = EstimateReport::new(EstimateKind::Abp, spec.digest());
    r.set("slack", s.slack);
    r.set("boundary_sup", s.boundary_sup);
    r.set("f_norm", s.f_norm);
    r.set("d_Q", parabolic_diameter(u));
    r.set("audit_max_residual", audit.max_residual);
    let tiny = 1e-12 * (1.0 + s.boundary_sup.abs());
    r.verdict = if !audit.passed {
        Verdict::fail(format!("subsolution audit failed: max residual {:e} > {:e}", audit.max_residual, tol))
    } else if s.f_norm == 0.0 {
        if s.slack > tiny {
            r.flag("comparison-principle violation: positive slack with zero source");
            Verdict::fail(format!("slack {:e} with f = 0", s.slack))
        } else {
            r.set("C1", 0.0);
            r.flag("C1 undefined: zero source, zero slack");
            Verdict::pass("zero slack with zero source")
        }
    } else {
        let c1 = s.slack / (s.scale * s.f_norm);
        r.set("C1", c1);
        if s.f_norm_plus > 0.0 {
            r.set("C1_restricted", s.slack / (s.scale * s.f_norm_plus));
        }
        Verdict::pass(format!("C1 = {c1:e}"))
    };
    Ok(r)
}

/// Fits `C` in `sup u - sup_{∂_pQ} u ≤ C d_Q^{α₀} (1 + ‖f‖^{(m-1)q}‖μ‖^q)^{(p-1)/p} ‖f‖`.
pub fn abp_superlinear_check(u: &GridFunction, spec: &EquationSpec, opts: &AbpOptions) -> Result<EstimateReport, EstimateError> {
    if spec.m > 1.0 {
        check_apqm1(spec.dim, spec.p, spec.q, spec.m)?;
    }
    let mut r = abp_check(u, spec, opts)?;
    r.kind = EstimateKind::AbpSuperlinear;
    let grid = u.grid();
    let mu = sample_coefficient(&spec.mu, grid)?;
    let mu_norm = lp_norm(&mu, &grid.cube(), spec.q)?;
    let f_norm = r.get("f_norm").unwrap_or(0.0);
    let envelope = (1.0 + f_norm.powf((spec.m - 1.0) * spec.q) * mu_norm.powf(spec.q)).powf((spec.p - 1.0) / spec.p);
    r.set("mu_norm", mu_norm);
    r.set("envelope", envelope);
    if let Some(c1) = r.get("C1") {
        r.set("C", c1 / envelope);
    }
    let small = f_norm.powf(spec.m - 1.0) * mu_norm;
    r.set("small_regime_value", small);
    r.set("small_regime_delta", opts.small_delta);
    if small > opts.small_delta {
        r.flag(format!("outside the small regime: {small:e} > {:e}", opts.small_delta));
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equation::{Coefficient, Field};
    use crate::geometry::{apply_scaling, transform_spec, ScalingMap};
    use crate::grid::solver::{solve_parabolic, Boundary};
    use crate::grid::SpaceTimeGrid;
    use crate::pucci::{Branch, PucciPair};

    fn spec(f: Field) -> EquationSpec {
        EquationSpec::new(1, Branch::Minus, PucciPair::new(1.0, 2.0).unwrap()).with_source(f, 4.0)
    }

    fn bump() -> Field {
        Field::new("bump", |x, t| (1.0 - x[0] * x[0]).max(0.0) * (1.0 + t))
    }

    #[test]
    fn zero_source_has_zero_slack() {
        let g = SpaceTimeGrid::new(1, &[0.0], 1.0, 0.0, 1.0, 17, 600).unwrap();
        let s = spec(Field::zero());
        let u = solve_parabolic(&s, &g, &Boundary::Field(Field::new("b", |x, _| x[0]))).unwrap();
        let r = abp_check(&u, &s, &AbpOptions::default()).unwrap();
        assert!(r.verdict.passed);
        assert_eq!(r.get("slack"), Some(0.0));
    }

    #[test]
    fn positive_source_gives_finite_ratio() {
        let g = SpaceTimeGrid::new(1, &[0.0], 1.0, 0.0, 1.0, 33, 2400).unwrap();
        let s = spec(bump());
        let u = solve_parabolic(&s, &g, &Boundary::Field(Field::zero())).unwrap();
        let r = abp_check(&u, &s, &AbpOptions::default()).unwrap();
        assert!(r.verdict.passed, "{:?}", r);
        let c1 = r.get("C1").unwrap();
        assert!(c1 > 0.0 && c1.is_finite());
        assert!(r.get("C1_restricted").unwrap() >= c1);
    }

    #[test]
    fn rescaling_to_unit_diameter_keeps_c1() {
        let g = SpaceTimeGrid::new(1, &[0.0], 2.0, 0.0, 4.0, 33, 2400).unwrap();
        let s = spec(bump());
        let u = solve_parabolic(&s, &g, &Boundary::Field(Field::zero())).unwrap();
        let d = parabolic_diameter(&u);
        let map = ScalingMap::new(vec![0.0], 0.0, d, 1.0, 0.0).unwrap();
        let unit = SpaceTimeGrid::new(1, &[0.0], 2.0 / d, 0.0, 4.0 / (d * d), 33, 2400).unwrap();
        let w = apply_scaling(&map, &u, &unit).unwrap();
        let ws = transform_spec(&map, &s);
        let a = abp_check(&u, &s, &AbpOptions::default()).unwrap().get("C1").unwrap();
        let rb = abp_check(&w, &ws, &AbpOptions::default()).unwrap();
        assert!(rb.verdict.passed, "{:?}", rb.verdict);
        let cb = rb.get("C1").unwrap();
        assert!((parabolic_diameter(&w) - 1.0).abs() < 1e-12);
        assert!((a - cb).abs() <= 1e-8 * a, "{a} vs {cb}");
    }

    #[test]
    fn superlinear_with_zero_mu_reduces_to_linear() {
        let g = SpaceTimeGrid::new(1, &[0.0], 1.0, 0.0, 1.0, 17, 600).unwrap();
        let s = spec(bump()).with_mu(Coefficient::zero(), 8.0).with_growth(1.5);
        let s = EquationSpec { p: 8.0, ..s };
        let u = solve_parabolic(&s, &g, &Boundary::Field(Field::zero())).unwrap();
        let r = abp_superlinear_check(&u, &s, &AbpOptions::default()).unwrap();
        assert_eq!(r.get("C"), r.get("C1"));
        assert_eq!(r.get("envelope"), Some(1.0));
    }
}
