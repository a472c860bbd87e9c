//! Explicit monotone time marching for `u_t + P±(D²u) ± μ|Du|^m - f = 0`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::stencil::{pucci_at, upwind_gradient, FrameSet};
use super::{GridError, GridFunction, SpaceTimeGrid};
use crate::equation::{pow_m, EquationSpec, Field, MuShape, SpecError};
use crate::pucci::Branch;

const PAR_THRESHOLD: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("CFL violation at step {step}: dt = {dt:e} exceeds the stable bound {required_dt:e}")]
    Cfl { step: usize, dt: f64, required_dt: f64 },
    #[error("non-finite value produced at step {step}")]
    NonFinite { step: usize },
    #[error("boundary data is not finite at time level {level}")]
    BadBoundary { level: usize },
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Data prescribed on the parabolic boundary (bottom face and lateral faces).
#[derive(Clone, Debug)]
pub enum Boundary {
    Field(Field),
    /// Values on the solver grid; only parabolic-boundary nodes are read.
    Grid(GridFunction),
}

impl Boundary {
    fn fill_layer(&self, grid: &SpaceTimeGrid, k: usize, layer: &mut [f64], lateral_only: bool) -> Result<(), SolveError> {
        let t = grid.time(k);
        let n = grid.n();
        if let Boundary::Grid(g) = self {
            if g.grid() != grid {
                return Err(GridError::Mismatch.into());
            }
        }
        for (idx, v) in layer.iter_mut().enumerate() {
            if lateral_only && !grid.is_lateral(idx) {
                continue;
            }
            *v = match self {
                Boundary::Field(f) => f.eval(&grid.point(idx)[..n], t),
                Boundary::Grid(g) => g.at(k, idx),
            };
            if !v.is_finite() {
                return Err(SolveError::BadBoundary { level: k });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
pub struct SolveOptions {
    /// Keep every `store_every`-th time level (0 or 1 keeps all).
    pub store_every: usize,
    pub frames: FrameSet,
    /// Replaces `spec.f` by node values on the solver grid.
    pub source: Option<GridFunction>,
}

/// Largest stable step `h²/(4nΛ + 2h·G)` for gradient coefficient bound `G`.
pub fn stable_dt(grid: &SpaceTimeGrid, big_lambda: f64, g_max: f64) -> f64 {
    let h = grid.h();
    h * h / (4.0 * grid.n() as f64 * big_lambda + 2.0 * h * g_max)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SolveStats {
    pub steps: usize,
    pub max_gradient_coefficient: f64,
    pub min_stable_dt: f64,
}

pub fn solve_parabolic(spec: &EquationSpec, grid: &SpaceTimeGrid, boundary: &Boundary) -> Result<GridFunction, SolveError> {
    solve_parabolic_with(spec, grid, boundary, &SolveOptions::default()).map(|(u, _)| u)
}

pub fn solve_parabolic_with(
    spec: &EquationSpec,
    grid: &SpaceTimeGrid,
    boundary: &Boundary,
    opts: &SolveOptions,
) -> Result<(GridFunction, SolveStats), SolveError> {
    if spec.dim != grid.n() {
        return Err(SpecError::Dimension(spec.dim).into());
    }
    if !(spec.m >= 1.0) {
        return Err(SpecError::GrowthPower(spec.m).into());
    }
    if let Some(src) = &opts.source {
        if src.grid() != grid {
            return Err(GridError::Mismatch.into());
        }
    }
    let every = opts.store_every.max(1);
    let out_grid = grid.coarsen_time(every)?;
    let dt = grid.dt();
    let h = grid.h();
    let base_dt = stable_dt(grid, spec.pucci.big_lambda(), 0.0);
    if dt > base_dt {
        return Err(SolveError::Cfl { step: 0, dt, required_dt: base_dt });
    }

    let s = grid.space_len();
    let n = grid.n();
    let mut values = Vec::with_capacity(out_grid.len());
    let mut cur = vec![0.0; s];
    boundary.fill_layer(grid, 0, &mut cur, false)?;
    values.extend_from_slice(&cur);
    let mut next = vec![0.0; s];

    let mu_zero = spec.mu.is_zero();
    let mu_const = match spec.mu.shape() {
        MuShape::Constant(c) if spec.mu.cap().is_none() => Some(*c),
        _ => None,
    };
    let sign = spec.branch.sign();
    let m = spec.m;
    let mut stats = SolveStats { steps: grid.nt(), max_gradient_coefficient: 0.0, min_stable_dt: base_dt };

    for k in 0..grid.nt() {
        let t = grid.time(k);
        let src_layer = opts.source.as_ref().map(|g| g.layer(k));
        let update = |idx: usize, out: &mut f64| -> f64 {
            if grid.is_lateral(idx) {
                return 0.0;
            }
            let p = pucci_at(grid, &cur, idx, &spec.pucci, spec.branch, &opts.frames);
            let f = match src_layer {
                Some(l) => l[idx],
                None => spec.f.eval(&grid.point(idx)[..n], t),
            };
            let (gterm, gcoef) = if mu_zero {
                (0.0, 0.0)
            } else {
                let mu = match mu_const {
                    Some(c) => c,
                    None => spec.mu.sample(&grid.point(idx)[..n], t, h, dt),
                };
                let g = upwind_gradient(grid, &cur, idx, spec.branch);
                let coef = if m == 1.0 { mu.abs() } else { mu.abs() * m * pow_m(g, m - 1.0) };
                (sign * mu * pow_m(g, m), coef)
            };
            *out = cur[idx] - dt * (p + gterm - f);
            gcoef
        };
        let g_max = if s >= PAR_THRESHOLD {
            next.par_iter_mut().enumerate().map(|(i, o)| update(i, o)).reduce(|| 0.0, f64::max)
        } else {
            next.iter_mut().enumerate().map(|(i, o)| update(i, o)).fold(0.0, f64::max)
        };
        if g_max > 0.0 {
            let required = stable_dt(grid, spec.pucci.big_lambda(), g_max);
            stats.max_gradient_coefficient = stats.max_gradient_coefficient.max(g_max);
            stats.min_stable_dt = stats.min_stable_dt.min(required);
            if dt > required {
                return Err(SolveError::Cfl { step: k, dt, required_dt: required });
            }
        }
        boundary.fill_layer(grid, k + 1, &mut next, true)?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(SolveError::NonFinite { step: k });
        }
        std::mem::swap(&mut cur, &mut next);
        if (k + 1) % every == 0 {
            values.extend_from_slice(&cur);
        }
    }
    Ok((GridFunction::new(out_grid, values)?, stats))
}

/// Pointwise scheme residual `(u^{k+1}-u^k)/dt + P±_h(u^k) ± μ|D_h u^k|^m - f` on
/// interior nodes of levels `0..nt`; zero elsewhere.
pub fn scheme_residual(u: &GridFunction, spec: &EquationSpec, frames: &FrameSet) -> Result<GridFunction, SolveError> {
    let grid = u.grid();
    if spec.dim != grid.n() {
        return Err(SpecError::Dimension(spec.dim).into());
    }
    let s = grid.space_len();
    let n = grid.n();
    let (h, dt) = (grid.h(), grid.dt());
    let sign = spec.branch.sign();
    let mut values = vec![0.0; grid.len()];
    values[..grid.nt() * s].par_chunks_mut(s).enumerate().for_each(|(k, out)| {
        let cur = u.layer(k);
        let nxt = u.layer(k + 1);
        let t = grid.time(k);
        for (idx, r) in out.iter_mut().enumerate() {
            if grid.is_lateral(idx) {
                continue;
            }
            let x = grid.point(idx);
            let p = pucci_at(grid, cur, idx, &spec.pucci, spec.branch, frames);
            let g = if spec.mu.is_zero() {
                0.0
            } else {
                sign * spec.mu.sample(&x[..n], t, h, dt) * pow_m(upwind_gradient(grid, cur, idx, spec.branch), spec.m)
            };
            *r = (nxt[idx] - cur[idx]) / dt + p + g - spec.f.eval(&x[..n], t);
        }
    });
    Ok(GridFunction::new(grid.clone(), values)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuditKind {
    /// residual ≤ tol
    Subsolution,
    /// residual ≥ -tol
    Supersolution,
    Solution,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualAudit {
    pub kind: AuditKind,
    pub branch: Branch,
    pub max_residual: f64,
    pub min_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Checks the sign of the scheme residual of `spec` on `u`.
pub fn residual_audit(u: &GridFunction, spec: &EquationSpec, kind: AuditKind, tol: f64) -> Result<ResidualAudit, SolveError> {
    let r = scheme_residual(u, spec, &FrameSet::default())?;
    let g = u.grid();
    let s = g.space_len();
    let interior = r.values()[..g.nt() * s]
        .iter()
        .enumerate()
        .filter(|(i, _)| !g.is_lateral(i % s))
        .map(|(_, v)| *v);
    let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
    for v in interior {
        hi = hi.max(v);
        lo = lo.min(v);
    }
    let passed = match kind {
        AuditKind::Subsolution => hi <= tol,
        AuditKind::Supersolution => lo >= -tol,
        AuditKind::Solution => hi <= tol && lo >= -tol,
    };
    Ok(ResidualAudit { kind, branch: spec.branch, max_residual: hi, min_residual: lo, tolerance: tol, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equation::Coefficient;
    use crate::pucci::PucciPair;

    fn spec1(branch: Branch) -> EquationSpec {
        EquationSpec::new(1, branch, PucciPair::new(1.0, 2.0).unwrap())
    }

    #[test]
    fn constants_are_preserved() {
        let g = SpaceTimeGrid::new(1, &[0.0], 1.0, 0.0, 1.0, 17, 600).unwrap();
        for b in [Branch::Plus, Branch::Minus] {
            let u = solve_parabolic(&spec1(b), &g, &Boundary::Field(Field::constant(3.5))).unwrap();
            assert!(u.values().iter().all(|&v| v == 3.5));
        }
    }

    #[test]
    fn cfl_violation_is_refused() {
        let g = SpaceTimeGrid::new(1, &[0.0], 1.0, 0.0, 1.0, 65, 10).unwrap();
        let err = solve_parabolic(&spec1(Branch::Plus), &g, &Boundary::Field(Field::zero())).unwrap_err();
        match err {
            SolveError::Cfl { step: 0, required_dt, .. } => {
                assert!((required_dt - g.h() * g.h() / 8.0).abs() < 1e-15);
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn large_gradient_coefficient_trips_adaptive_cfl() {
        let g = SpaceTimeGrid::new(1, &[0.0], 1.0, 0.0, 0.1, 17, 1000).unwrap();
        let s = spec1(Branch::Plus).with_mu(Coefficient::constant(1e4), 8.0);
        let err = solve_parabolic(&s, &g, &Boundary::Field(Field::new("x", |x, _| x[0]))).unwrap_err();
        assert!(matches!(err, SolveError::Cfl { step: 0, .. }), "{err}");
        assert!(g.dt() <= stable_dt(&g, 2.0, 0.0));
    }

    #[test]
    fn residual_of_solution_vanishes() {
        let g = SpaceTimeGrid::new(2, &[0.0, 0.0], 1.0, 0.0, 0.1, 17, 120).unwrap();
        let s = EquationSpec::new(2, Branch::Plus, PucciPair::new(1.0, 2.0).unwrap())
            .with_mu(Coefficient::constant(0.5), 8.0)
            .with_source(Field::new("f", |x, _| x[0].sin()), 8.0);
        let bc = Boundary::Field(Field::new("b", |x, t| (x[0] * x[1]).cos() + t));
        let u = solve_parabolic(&s, &g, &bc).unwrap();
        let a = residual_audit(&u, &s, AuditKind::Solution, 1e-9).unwrap();
        assert!(a.passed, "{a:?}");
        let minus = s.clone().with_branch(Branch::Minus);
        let sub = residual_audit(&u, &minus, AuditKind::Subsolution, 1e-9).unwrap();
        assert!(sub.passed, "{sub:?}");
    }

    #[test]
    fn store_every_subsamples_levels() {
        let g = SpaceTimeGrid::new(1, &[0.0], 1.0, 0.0, 1.0, 9, 128).unwrap();
        let bc = Boundary::Field(Field::new("b", |x, _| 1.0 - x[0] * x[0]));
        let full = solve_parabolic(&spec1(Branch::Plus), &g, &bc).unwrap();
        let opts = SolveOptions { store_every: 8, ..Default::default() };
        let (sub, _) = solve_parabolic_with(&spec1(Branch::Plus), &g, &bc, &opts).unwrap();
        assert_eq!(sub, full.coarsen_time(8).unwrap());
    }
}
