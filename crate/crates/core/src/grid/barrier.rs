//! The barrier `φ = M̂ η ψ` with its source `g`.
//!
//! `ψ` solves the plus-branch equation with `f = 0` and bump data `ξ` on the
//! parabolic boundary, `σ = inf_{K₂} ψ`, `M̂ = 2/σ`, and the cutoff `η`
//! vanishes on `K_{1/4}` and equals 1 off `K₁`. Then
//! `g = M̂[ψη_t + P⁺(ψD²η + Dη⊗Dψ + Dψ⊗Dη) + μψ|Dη|]`.

use serde::Serialize;
use thiserror::Error;

use super::norms::inf;
use super::solver::{solve_parabolic_with, Boundary, SolveError, SolveOptions, SolveStats};
use super::stencil::centered_gradient;
use super::{GridError, GridFunction, SpaceTimeGrid};
use crate::equation::{Coefficient, EquationSpec, Field};
use crate::geometry::make_catalog;
use crate::pucci::{Branch, PucciPair, SymMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BarrierError {
    #[error("barrier is degenerate: inf of psi over K2 is {sigma:e}")]
    Degenerate { sigma: f64 },
    #[error("grid must contain the closure of K2 and K1")]
    Coverage,
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Clone, Debug)]
pub struct BarrierOptions {
    /// Multiplier of the bump `ξ`.
    pub xi_amplitude: f64,
    /// `σ` at or below this value is treated as degenerate.
    pub sigma_tolerance: f64,
    pub solve: SolveOptions,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        BarrierOptions { xi_amplitude: 1.0, sigma_tolerance: 1e-12, solve: SolveOptions::default() }
    }
}

#[derive(Clone, Debug)]
pub struct BarrierResult {
    pub phi: GridFunction,
    pub g: GridFunction,
    pub psi: GridFunction,
    pub sigma_found: f64,
    pub m_hat: f64,
    pub stats: SolveStats,
}

/// Invariant checks of a barrier on its grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BarrierAudit {
    pub min_phi: f64,
    pub min_phi_on_k2: f64,
    pub max_phi_on_parabolic_boundary: f64,
    pub max_g_outside_k1: f64,
    pub passed: bool,
}

fn smoothstep(z: f64) -> (f64, f64, f64) {
    if z <= 0.0 {
        (0.0, 0.0, 0.0)
    } else if z >= 1.0 {
        (1.0, 0.0, 0.0)
    } else {
        let z2 = z * z;
        (
            z2 * z * (10.0 - 15.0 * z + 6.0 * z2),
            30.0 * z2 * (1.0 - z) * (1.0 - z),
            60.0 * z * (1.0 - z) * (1.0 - 2.0 * z),
        )
    }
}

/// Spatial factor of the cutoff: 1 on `|s| ≤ 1/2`, 0 on `|s| ≥ 1`, with derivatives.
fn space_cut(s: f64) -> (f64, f64, f64) {
    let (v, d1, d2) = smoothstep(2.0 * (s.abs() - 0.5));
    let sg = s.signum();
    (1.0 - v, -2.0 * d1 * sg, -4.0 * d2)
}

/// Time factor of the cutoff: 1 on `t ≤ 1/4`, 0 on `t ≥ 1`, with derivative.
fn time_cut(t: f64) -> (f64, f64) {
    let (v, d1, _) = smoothstep((t - 0.25) / 0.75);
    (1.0 - v, -d1 / 0.75)
}

/// `(η, η_t, Dη, D²η)` at `(x, t)`.
pub fn cutoff(x: &[f64], t: f64) -> (f64, f64, [f64; 2], [[f64; 2]; 2]) {
    let n = x.len();
    let cs: Vec<(f64, f64, f64)> = x.iter().map(|&s| space_cut(s)).collect();
    let (d, dd) = time_cut(t);
    let prod = |skip: &[usize]| -> f64 { (0..n).filter(|i| !skip.contains(i)).map(|i| cs[i].0).product() };
    let c = prod(&[]);
    let mut grad = [0.0; 2];
    let mut hess = [[0.0; 2]; 2];
    for i in 0..n {
        grad[i] = -cs[i].1 * prod(&[i]) * d;
        for j in 0..n {
            hess[i][j] = if i == j { -cs[i].2 * prod(&[i]) * d } else { -cs[i].1 * cs[j].1 * prod(&[i, j]) * d };
        }
    }
    (1.0 - c * d, -c * dd, grad, hess)
}

/// The bump `ξ = Π cos³(πx_i) · cos³(2πt)`, supported in the closure of `K_{1/4}`.
pub fn bump(x: &[f64], t: f64) -> f64 {
    if t >= 0.25 || x.iter().any(|v| v.abs() >= 0.5) {
        return 0.0;
    }
    let s: f64 = x.iter().map(|v| (std::f64::consts::PI * v).cos().powi(3)).product();
    s * (2.0 * std::f64::consts::PI * t).cos().powi(3)
}

/// Builds `ψ`, `φ` and `g` on `grid`, whose box should be `Q`.
pub fn build_barrier(mu: &Coefficient, q: f64, pair: &PucciPair, grid: &SpaceTimeGrid, opts: &BarrierOptions) -> Result<BarrierResult, BarrierError> {
    let n = grid.n();
    let cat = make_catalog(n).map_err(|e| GridError::Box(e.to_string()))?;
    let cube = grid.cube();
    if !cat.k2.is_subset_of(&cube) || !cat.k1.is_subset_of(&cube) {
        return Err(BarrierError::Coverage);
    }
    let spec = EquationSpec::new(n, Branch::Plus, *pair).with_mu(mu.clone(), q);
    let amp = opts.xi_amplitude;
    let xi = Boundary::Field(Field::new("xi", move |x, t| amp * bump(x, t)));
    let (psi, stats) = solve_parabolic_with(&spec, grid, &xi, &opts.solve)?;
    let sigma = inf(&psi, &cat.k2)?;
    if !(sigma > opts.sigma_tolerance) {
        return Err(BarrierError::Degenerate { sigma });
    }
    let m_hat = 2.0 / sigma;
    let g_grid = psi.grid().clone();
    let (h, dt) = (g_grid.h(), g_grid.dt());
    let s = g_grid.space_len();
    let mut phi = vec![0.0; g_grid.len()];
    let mut g = vec![0.0; g_grid.len()];
    for k in 0..=g_grid.nt() {
        let t = g_grid.time(k);
        let layer = psi.layer(k);
        for idx in 0..s {
            let p = g_grid.point(idx);
            let x = &p[..n];
            let (eta, eta_t, deta, d2eta) = cutoff(x, t);
            let v = layer[idx];
            phi[k * s + idx] = m_hat * eta * v;
            if eta == 1.0 && eta_t == 0.0 && deta == [0.0; 2] {
                continue;
            }
            let dpsi = centered_gradient(&g_grid, layer, idx);
            let mut entries = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    entries[i * n + j] = v * d2eta[i][j] + deta[i] * dpsi[j] + dpsi[i] * deta[j];
                }
            }
            let x_mat = SymMatrix::from_row_major(n, &entries).expect("symmetric by construction");
            let p_plus = pair.eval(&x_mat, Branch::Plus).expect("n <= 2");
            let grad_norm = deta[..n].iter().map(|d| d * d).sum::<f64>().sqrt();
            let mu_v = if mu.is_zero() { 0.0 } else { mu.sample(x, t, h, dt) };
            g[k * s + idx] = m_hat * (v * eta_t + p_plus + mu_v * v * grad_norm);
        }
    }
    Ok(BarrierResult {
        phi: GridFunction::new(g_grid.clone(), phi)?,
        g: GridFunction::new(g_grid, g)?,
        psi,
        sigma_found: sigma,
        m_hat,
        stats,
    })
}

impl BarrierResult {
    /// Checks `φ ≥ 0`, `φ ≥ 2 - tol` on `K₂`, `φ = 0` on `∂_pQ` and `g = 0` off `K₁`.
    pub fn audit(&self, tol: f64) -> Result<BarrierAudit, BarrierError> {
        let grid = self.phi.grid();
        let n = grid.n();
        let cat = make_catalog(n).map_err(|e| GridError::Box(e.to_string()))?;
        let s = grid.space_len();
        let min_phi = self.phi.values().iter().copied().fold(f64::INFINITY, f64::min);
        let min_phi_on_k2 = inf(&self.phi, &cat.k2)?;
        let mut max_pb: f64 = 0.0;
        let mut max_g: f64 = 0.0;
        for k in 0..=grid.nt() {
            let t = grid.time(k);
            for idx in 0..s {
                let p = grid.point(idx);
                if k == 0 || grid.is_lateral(idx) {
                    max_pb = max_pb.max(self.phi.at(k, idx).abs());
                }
                if !cat.k1.contains_closed(&p[..n], t) {
                    max_g = max_g.max(self.g.at(k, idx).abs());
                }
            }
        }
        let passed = min_phi >= -tol && min_phi_on_k2 >= 2.0 - tol && max_pb <= tol && max_g == 0.0;
        Ok(BarrierAudit { min_phi, min_phi_on_k2, max_phi_on_parabolic_boundary: max_pb, max_g_outside_k1: max_g, passed })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q_grid() -> SpaceTimeGrid {
        // h = 1/4, dt = 1/160 ≤ h²/(4Λ) = 1/128
        SpaceTimeGrid::new(1, &[0.0], 10.0, 0.0, 10.0, 81, 1600).unwrap()
    }

    #[test]
    fn cutoff_values() {
        assert_eq!(cutoff(&[0.3], 0.2).0, 0.0);
        assert_eq!(cutoff(&[1.0], 0.2).0, 1.0);
        assert_eq!(cutoff(&[0.0], 1.0).0, 1.0);
        let (e, et, d, dd) = cutoff(&[0.75, 0.2], 0.5);
        assert!(e > 0.0 && e < 1.0 && et > 0.0 && d[0] > 0.0 && dd[0][0].is_finite());
        // derivatives against finite differences
        let hstep = 1e-6;
        let x = [0.7, -0.6];
        let (_, et, d, dd) = cutoff(&x, 0.4);
        let fd_t = (cutoff(&x, 0.4 + hstep).0 - cutoff(&x, 0.4 - hstep).0) / (2.0 * hstep);
        let fd_x = (cutoff(&[0.7 + hstep, -0.6], 0.4).0 - cutoff(&[0.7 - hstep, -0.6], 0.4).0) / (2.0 * hstep);
        let fd_xy = (cutoff(&[0.7, -0.6 + hstep], 0.4).2[0] - cutoff(&[0.7, -0.6 - hstep], 0.4).2[0]) / (2.0 * hstep);
        assert!((et - fd_t).abs() < 1e-6 && (d[0] - fd_x).abs() < 1e-6 && (dd[0][1] - fd_xy).abs() < 1e-5);
    }

    #[test]
    fn barrier_without_drift() {
        let b = build_barrier(&Coefficient::zero(), f64::INFINITY, &PucciPair::new(1.0, 2.0).unwrap(), &q_grid(), &BarrierOptions::default()).unwrap();
        let a = b.audit(1e-6).unwrap();
        assert!(a.passed, "{a:?}");
        assert!((a.min_phi_on_k2 - 2.0).abs() < 1e-12);
        assert!(b.sigma_found > 0.0);
    }

    #[test]
    fn doubling_the_bump_doubles_psi() {
        let pair = PucciPair::new(1.0, 2.0).unwrap();
        let g = SpaceTimeGrid::new(1, &[0.0], 10.0, 0.0, 10.0, 41, 400).unwrap();
        let one = build_barrier(&Coefficient::zero(), f64::INFINITY, &pair, &g, &BarrierOptions::default()).unwrap();
        let opts = BarrierOptions { xi_amplitude: 2.0, ..Default::default() };
        let two = build_barrier(&Coefficient::zero(), f64::INFINITY, &pair, &g, &opts).unwrap();
        let diff = two.psi.zip_with(&one.psi, |a, b| a - 2.0 * b).unwrap();
        assert!(diff.values().iter().all(|v| v.abs() < 1e-10));
        assert!((two.sigma_found - 2.0 * one.sigma_found).abs() < 1e-12);
    }
}
