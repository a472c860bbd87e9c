//! Picard iteration for superlinear gradient growth.
//!
//! Each step solves the equation with the gradient term frozen at the previous
//! iterate: `u_t + P±(D²u) = f ∓ μ|Dv|^m`, starting from the solution with
//! `μ = 0`.

use serde::Serialize;
use thiserror::Error;

use super::norms::{lp_norm, sample_coefficient, w21p_norm};
use super::solver::{scheme_residual, solve_parabolic_with, Boundary, SolveError, SolveOptions};
use super::stencil::{upwind_gradient, FrameSet};
use super::{GridError, GridFunction};
use crate::equation::{pow_m, Coefficient, EquationSpec, SpecError};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `sup |v_k - v_{k-1}|`
    pub difference: f64,
    /// `sup |scheme residual of v_k|` for the full equation.
    pub residual: f64,
}

/// The smallness quantity `‖μ‖_{L^q}(‖f‖_{L^p} + ‖ψ‖_{W^{2,1}_p})^{m-1}` against `δ₁`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmallnessCheck {
    pub value: f64,
    pub delta1: f64,
    pub satisfied: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FixedPointError {
    #[error("iteration diverged after {} iterations (last difference {:e})", .log.len(), .log.last().map_or(f64::NAN, |r| r.difference))]
    Diverged { log: Vec<IterationRecord>, smallness: SmallnessCheck },
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Clone, Debug)]
pub struct FixedPointOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub delta1: f64,
    pub frames: FrameSet,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions { tolerance: 1e-6, max_iterations: 50, delta1: 0.1, frames: FrameSet::default() }
    }
}

#[derive(Clone, Debug)]
pub struct FixedPointResult {
    pub u: GridFunction,
    pub log: Vec<IterationRecord>,
    pub converged: bool,
    pub smallness: SmallnessCheck,
}

impl FixedPointResult {
    pub fn iterations(&self) -> usize {
        self.log.len()
    }

    pub fn final_residual(&self) -> f64 {
        self.log.last().map_or(0.0, |r| r.residual)
    }
}

/// Computes the smallness quantity on the grid of `psi`.
pub fn smallness(spec: &EquationSpec, psi: &GridFunction, delta1: f64) -> Result<SmallnessCheck, GridError> {
    let grid = psi.grid();
    let cube = grid.cube();
    let mu = sample_coefficient(&spec.mu, grid)?;
    let f = GridFunction::from_fn(grid.clone(), |x, t| spec.f.eval(x, t))?;
    let mu_q = lp_norm(&mu, &cube, spec.q)?;
    let inner = lp_norm(&f, &cube, spec.p)? + w21p_norm(psi, &cube, spec.p)?;
    let value = mu_q * inner.powf(spec.m - 1.0);
    Ok(SmallnessCheck { value, delta1, satisfied: value <= delta1 })
}

fn sup_interior(r: &GridFunction) -> f64 {
    let g = r.grid();
    let s = g.space_len();
    r.values()[..g.nt() * s].iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Runs the iteration with boundary values taken from `psi`.
pub fn superlinear_fixed_point(spec: &EquationSpec, psi: &GridFunction, opts: &FixedPointOptions) -> Result<FixedPointResult, FixedPointError> {
    if !(spec.m >= 1.0) {
        return Err(SpecError::GrowthPower(spec.m).into());
    }
    let grid = psi.grid().clone();
    let small = smallness(spec, psi, opts.delta1)?;
    let boundary = Boundary::Grid(psi.clone());
    let linear = EquationSpec { mu: Coefficient::zero(), ..spec.clone() };
    let solve_opts = SolveOptions { store_every: 1, frames: opts.frames.clone(), source: None };
    let (mut v, _) = solve_parabolic_with(&linear, &grid, &boundary, &solve_opts)?;

    let mu = sample_coefficient(&spec.mu, &grid)?;
    let f = GridFunction::from_fn(grid.clone(), |x, t| spec.f.eval(x, t))?;
    let sign = spec.branch.sign();
    let s = grid.space_len();
    let mut log: Vec<IterationRecord> = Vec::new();
    let mut growth = 0;
    let diverged = |log: Vec<IterationRecord>| FixedPointError::Diverged { log, smallness: small.clone() };

    for it in 1..=opts.max_iterations {
        let mut src = f.values().to_vec();
        if !spec.mu.is_zero() {
            for k in 0..grid.nt() {
                let layer = v.layer(k);
                for idx in 0..s {
                    if grid.is_lateral(idx) {
                        continue;
                    }
                    let g = upwind_gradient(&grid, layer, idx, spec.branch);
                    src[k * s + idx] -= sign * mu.at(k, idx) * pow_m(g, spec.m);
                }
            }
        }
        let source = match GridFunction::new(grid.clone(), src) {
            Ok(s) => s,
            Err(_) => return Err(diverged(log)),
        };
        let o = SolveOptions { source: Some(source), ..solve_opts.clone() };
        let next = match solve_parabolic_with(&linear, &grid, &boundary, &o) {
            Ok((u, _)) => u,
            Err(SolveError::NonFinite { .. }) | Err(SolveError::Grid(GridError::NonFinite { .. })) => return Err(diverged(log)),
            Err(e) => return Err(e.into()),
        };
        let difference = next.max_abs_diff(&v)?;
        let residual = sup_interior(&scheme_residual(&next, spec, &opts.frames)?);
        if !difference.is_finite() || !residual.is_finite() {
            return Err(diverged(log));
        }
        if let Some(prev) = log.last() {
            growth = if difference > prev.difference { growth + 1 } else { 0 };
        }
        log.push(IterationRecord { iteration: it, difference, residual });
        v = next;
        if difference <= opts.tolerance {
            return Ok(FixedPointResult { u: v, log, converged: true, smallness: small.clone() });
        }
        if growth >= 3 {
            return Err(diverged(log));
        }
    }
    Ok(FixedPointResult { u: v, log, converged: false, smallness: small.clone() })
}
