//! Weak Harnack, local maximum and Harnack ratios on the fixed cube catalog.

use super::{audit_tolerance, require_cover, EstimateError, EstimateKind, EstimateReport, Table, Verdict};
use crate::equation::EquationSpec;
use crate::geometry::{make_catalog, Catalog};
use crate::grid::barrier::BarrierResult;
use crate::grid::norms::{inf, lp_norm, sample_field, superlevel_measure, sup, RegionWeights};
use crate::grid::solver::{residual_audit, AuditKind, ResidualAudit};
use crate::grid::GridFunction;

/// `{0.05, 0.1, …, 1.0}`.
pub const DEFAULT_EPS0_GRID: [f64; 20] =
    [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95, 1.0];

const NEGATIVE_TOLERANCE: f64 = 1e-10;
const SCALING_FACTORS: [f64; 2] = [0.5, 3.0];

fn catalog_for(u: &GridFunction) -> Result<Catalog, EstimateError> {
    Ok(make_catalog(u.grid().n())?)
}

/// `‖f‖_{L^p(Q)}` over the part of `Q` covered by the grid.
fn source_norm(u: &GridFunction, spec: &EquationSpec, cat: &Catalog) -> Result<f64, EstimateError> {
    let f = sample_field(&spec.f, u.grid())?;
    Ok(lp_norm(&f, &cat.q, spec.p)?)
}

fn check_nonnegative(u: &GridFunction) -> Result<(), EstimateError> {
    let min = u.values().iter().copied().fold(f64::INFINITY, f64::min);
    if min < -NEGATIVE_TOLERANCE {
        return Err(EstimateError::Negative { min });
    }
    Ok(())
}

/// `(∫_R (u⁺)^ε)^{1/ε}`.
fn quasi_norm(u: &GridFunction, w: &RegionWeights, eps: f64) -> f64 {
    w.integrate(u, |v| v.max(0.0).powf(eps)).powf(1.0 / eps)
}

fn audit_note(r: &mut EstimateReport, audit: &ResidualAudit) {
    r.set("audit_max_residual", audit.max_residual);
    r.set("audit_min_residual", audit.min_residual);
    if !audit.passed {
        r.flag(format!("{:?} audit failed at tolerance {:e}", audit.kind, audit.tolerance));
    }
}

/// Scans `C₀(ε) = (∫_{J₁} u^ε)^{1/ε} / (inf_{J₂} u + ‖f‖_{L^p(Q)})` over `eps0_grid`.
///
/// The selected `ε₀` is the largest scanned value with a finite ratio; the
/// scaling audit reruns the selected ratio on `(t u, t f)`.
pub fn weak_harnack_report(u: &GridFunction, spec: &EquationSpec, eps0_grid: &[f64]) -> Result<EstimateReport, EstimateError> {
    if eps0_grid.is_empty() || eps0_grid.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(EstimateError::Invalid("eps0 grid must be nonempty and positive".into()));
    }
    check_nonnegative(u)?;
    let cat = catalog_for(u)?;
    require_cover(u, &cat.j1, "J1")?;
    require_cover(u, &cat.j2, "J2")?;
    let audit = residual_audit(u, spec, AuditKind::Supersolution, audit_tolerance(u))?;
    let w1 = RegionWeights::new(u.grid(), &cat.j1)?;
    let inf2 = inf(u, &cat.j2)?;
    let fnorm = source_norm(u, spec, &cat)?;
    let ratio = |field: &GridFunction, scale: f64, eps: f64| -> f64 { quasi_norm(field, &w1, eps) / (scale * inf2.max(0.0) + scale * fnorm) };

    let mut r = EstimateReport::new(EstimateKind::WeakHarnack, spec.digest());
    audit_note(&mut r, &audit);
    let mut scan = Table::new(&["eps0", "C0"]);
    let mut selected = None;
    for &eps in eps0_grid {
        let c = ratio(u, 1.0, eps);
        scan.push(vec![eps, c]);
        if c.is_finite() && selected.map_or(true, |(e, _)| eps > e) {
            selected = Some((eps, c));
        }
    }
    r.tables.insert("eps0_scan".into(), scan);
    r.set("inf_J2", inf2);
    r.set("f_norm", fnorm);
    let Some((eps0, c0)) = selected else {
        r.verdict = Verdict::fail("denominator vanishes: inf_J2 u = 0 and f = 0");
        return Ok(r);
    };
    r.set("eps0", eps0);
    r.set("C0", c0);
    let mut defect: f64 = 0.0;
    for t in SCALING_FACTORS {
        let scaled = u.scaled(t)?;
        defect = defect.max((ratio(&scaled, t, eps0) - c0).abs() / c0.max(f64::MIN_POSITIVE));
    }
    r.set("scaling_defect", defect);
    r.verdict = if !audit.passed {
        Verdict::fail(format!("supersolution audit failed: min residual {:e}", audit.min_residual))
    } else if defect > 1e-8 {
        Verdict::fail(format!("ratio not scale invariant: relative defect {defect:e}"))
    } else {
        Verdict::pass(format!("C0 = {c0:e} at eps0 = {eps0}"))
    };
    Ok(r)
}

/// `C₃ = sup_{J₃} u / (‖u⁺‖_{L^{ε₀}(J₁)} + ‖f‖_{L^p(Q)})` for a discrete subsolution.
pub fn local_max_report(u: &GridFunction, spec: &EquationSpec, eps0: f64) -> Result<EstimateReport, EstimateError> {
    if !(eps0 > 0.0 && eps0.is_finite()) {
        return Err(EstimateError::Invalid(format!("eps0 must be positive, got {eps0}")));
    }
    let cat = catalog_for(u)?;
    require_cover(u, &cat.j1, "J1")?;
    let audit = residual_audit(u, spec, AuditKind::Subsolution, audit_tolerance(u))?;
    let w1 = RegionWeights::new(u.grid(), &cat.j1)?;
    let top = sup(u, &cat.j3)?;
    let denom = quasi_norm(u, &w1, eps0) + source_norm(u, spec, &cat)?;
    let mut r = EstimateReport::new(EstimateKind::LocalMax, spec.digest());
    audit_note(&mut r, &audit);
    r.set("eps0", eps0);
    r.set("sup_J3", top);
    r.set("denominator", denom);
    r.verdict = ratio_verdict(&mut r, "C3", top, denom, audit.passed);
    Ok(r)
}

/// `C₄ = sup_{J₃} u / (inf_{J₂} u + ‖f‖_{L^p(Q)})` for a nonnegative discrete solution.
pub fn harnack_report(u: &GridFunction, spec: &EquationSpec) -> Result<EstimateReport, EstimateError> {
    check_nonnegative(u)?;
    let cat = catalog_for(u)?;
    require_cover(u, &cat.j2, "J2")?;
    let audit = residual_audit(u, spec, AuditKind::Solution, audit_tolerance(u))?;
    let top = sup(u, &cat.j3)?;
    let denom = inf(u, &cat.j2)?.max(0.0) + source_norm(u, spec, &cat)?;
    let mut r = EstimateReport::new(EstimateKind::Harnack, spec.digest());
    audit_note(&mut r, &audit);
    r.set("sup_J3", top);
    r.set("denominator", denom);
    r.verdict = ratio_verdict(&mut r, "C4", top, denom, audit.passed);
    Ok(r)
}

fn ratio_verdict(r: &mut EstimateReport, name: &str, num: f64, denom: f64, audit_passed: bool) -> Verdict {
    if denom > 0.0 {
        let c = num.max(0.0) / denom;
        r.set(name, c);
        if audit_passed {
            Verdict::pass(format!("{name} = {c:e}"))
        } else {
            Verdict::fail(format!("{name} = {c:e} but the residual audit failed"))
        }
    } else if num > 0.0 {
        r.flag(format!("{name}: zero denominator with positive numerator (scheme audit trigger)"));
        Verdict::fail(format!("sup = {num:e} over a zero denominator"))
    } else {
        r.flag(format!("{name} undefined: zero numerator and denominator"));
        Verdict::pass("0/0")
    }
}

/// Composition bound `C₃(C₀ + 1)` for `C₄`.
pub fn harnack_chain_bound(c3: f64, c0: f64) -> f64 {
    c3 * (c0 + 1.0)
}

/// Measures `M = sup_{K₁} φ` from a barrier and
/// `θ = 1 - |{u ≥ M} ∩ K₁| / |K₁|` from a supersolution.
pub fn basic_measure_report(barrier: &BarrierResult, u: &GridFunction, spec: &EquationSpec) -> Result<EstimateReport, EstimateError> {
    check_nonnegative(u)?;
    let cat = catalog_for(u)?;
    require_cover(u, &cat.k1, "K1")?;
    let m = sup(&barrier.phi, &cat.k1)?;
    let big = superlevel_measure(u, &cat.k1, m)?;
    let k1 = RegionWeights::new(u.grid(), &cat.k1)?.measure();
    let theta = 1.0 - big / k1;
    let mut r = EstimateReport::new(EstimateKind::BasicMeasure, spec.digest());
    r.set("M", m);
    r.set("theta", theta);
    r.set("M_hat", barrier.m_hat);
    let reduced = require_cover(u, &cat.j2, "J2").is_ok() && inf(u, &cat.j2)? <= 1.0;
    if !reduced {
        r.flag("inf_J2 u > 1 or J2 not covered: the reduction hypothesis does not hold");
    }
    r.verdict = if theta > 0.0 {
        Verdict::pass(format!("|{{u >= M}} ∩ K1| = {big:e} <= (1 - {theta:e})|K1|"))
    } else {
        Verdict::fail(format!("u >= M = {m:e} on all of K1"))
    };
    Ok(r)
}
