//! Discrete norms over cube regions.
//!
//! Integrals use the node control volumes `[x_i - h/2, x_i + h/2]` (and the
//! analogous time cells) clipped to the grid box and to the closure of the
//! region, so constants integrate exactly. Pointwise quantities (sup, inf)
//! range over the nodes lying in the closed region.

use super::stencil::{centered_gradient, centered_hessian};
use super::{GridError, GridFunction, SpaceTimeGrid};
use crate::equation::{Coefficient, Field};
use crate::geometry::ParabolicCube;

/// Nodes of a grid lying in a region, with their clipped control-volume weights.
#[derive(Clone, Debug)]
pub struct RegionWeights {
    /// `(flat spatial index, weight)`; weight may be zero for nodes on the region's boundary.
    pub space: Vec<(usize, f64)>,
    /// `(time level, weight)`
    pub time: Vec<(usize, f64)>,
}

impl RegionWeights {
    pub fn new(grid: &SpaceTimeGrid, region: &ParabolicCube) -> Result<Self, GridError> {
        if region.dim() != grid.n() {
            return Err(GridError::Dimension(region.dim()));
        }
        let n = grid.n();
        let h = grid.h();
        let eps = 1e-12 * (1.0 + grid.half_width());
        let mut axes: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        for a in 0..n {
            let (lo, hi) = (region.lo_f64(a), region.hi_f64(a));
            let mut v = Vec::new();
            for i in 0..grid.nx() {
                let x = grid.coord(a, i);
                if x < lo - eps || x > hi + eps {
                    continue;
                }
                let cl = (x - 0.5 * h).max(grid.lo(a)).max(lo);
                let ch = (x + 0.5 * h).min(grid.hi(a)).min(hi);
                v.push((i, (ch - cl).max(0.0)));
            }
            axes.push(v);
        }
        let dt = grid.dt();
        let teps = 1e-12 * (1.0 + grid.t_hi().abs());
        let (tlo, thi) = (region.t_lo_f64(), region.t_hi_f64());
        let mut time = Vec::new();
        for k in 0..=grid.nt() {
            let t = grid.time(k);
            if t < tlo - teps || t > thi + teps {
                continue;
            }
            let cl = (t - 0.5 * dt).max(grid.t_lo()).max(tlo);
            let ch = (t + 0.5 * dt).min(grid.t_hi()).min(thi);
            time.push((k, (ch - cl).max(0.0)));
        }
        let mut space = Vec::new();
        if n == 1 {
            space = axes[0].clone();
        } else {
            for &(i, wi) in &axes[0] {
                for &(j, wj) in &axes[1] {
                    space.push((grid.flatten([i, j]), wi * wj));
                }
            }
        }
        if space.is_empty() || time.is_empty() {
            return Err(GridError::EmptyRegion);
        }
        Ok(RegionWeights { space, time })
    }

    pub fn measure(&self) -> f64 {
        let s: f64 = self.space.iter().map(|(_, w)| w).sum();
        let t: f64 = self.time.iter().map(|(_, w)| w).sum();
        s * t
    }

    /// `Σ w · g(u)` over the region.
    pub fn integrate(&self, u: &GridFunction, g: impl Fn(f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for &(k, wt) in &self.time {
            if wt == 0.0 {
                continue;
            }
            let layer = u.layer(k);
            let mut row = 0.0;
            for &(idx, ws) in &self.space {
                if ws != 0.0 {
                    row += ws * g(layer[idx]);
                }
            }
            acc += wt * row;
        }
        acc
    }

    /// `Σ w · g(u, v)` over the region; `u` and `v` share a grid.
    pub fn integrate_with(&self, u: &GridFunction, v: &GridFunction, g: impl Fn(f64, f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for &(k, wt) in &self.time {
            if wt == 0.0 {
                continue;
            }
            let (lu, lv) = (u.layer(k), v.layer(k));
            let mut row = 0.0;
            for &(idx, ws) in &self.space {
                if ws != 0.0 {
                    row += ws * g(lu[idx], lv[idx]);
                }
            }
            acc += wt * row;
        }
        acc
    }

    /// Node of largest value as `(level, flat index, value)`; the first one on ties.
    pub fn argmax(&self, u: &GridFunction) -> (usize, usize, f64) {
        let mut best = (0, 0, f64::NEG_INFINITY);
        for &(k, _) in &self.time {
            let layer = u.layer(k);
            for &(idx, _) in &self.space {
                if layer[idx] > best.2 {
                    best = (k, idx, layer[idx]);
                }
            }
        }
        best
    }

    fn fold(&self, u: &GridFunction, init: f64, f: impl Fn(f64, f64) -> f64) -> f64 {
        let mut acc = init;
        for &(k, _) in &self.time {
            let layer = u.layer(k);
            for &(idx, _) in &self.space {
                acc = f(acc, layer[idx]);
            }
        }
        acc
    }
}

/// `(∫_R |u|^p)^{1/p}` for `0 < p < ∞`; `max_R |u|` for `p = ∞`.
pub fn lp_norm(u: &GridFunction, region: &ParabolicCube, p: f64) -> Result<f64, GridError> {
    let w = RegionWeights::new(u.grid(), region)?;
    if p.is_infinite() {
        return Ok(w.fold(u, 0.0, |a, v| a.max(v.abs())));
    }
    if !(p > 0.0) {
        return Err(GridError::Io(format!("exponent must be positive, got {p}")));
    }
    Ok(w.integrate(u, |v| v.abs().powf(p)).powf(1.0 / p))
}

pub fn sup(u: &GridFunction, region: &ParabolicCube) -> Result<f64, GridError> {
    let w = RegionWeights::new(u.grid(), region)?;
    Ok(w.fold(u, f64::NEG_INFINITY, f64::max))
}

pub fn inf(u: &GridFunction, region: &ParabolicCube) -> Result<f64, GridError> {
    let w = RegionWeights::new(u.grid(), region)?;
    Ok(w.fold(u, f64::INFINITY, f64::min))
}

/// Largest value on the bottom face and lateral faces of the grid box.
pub fn sup_parabolic_boundary(u: &GridFunction) -> f64 {
    let g = u.grid();
    let mut best = u.layer(0).iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for k in 1..=g.nt() {
        let layer = u.layer(k);
        for (idx, &v) in layer.iter().enumerate() {
            if g.is_lateral(idx) {
                best = best.max(v);
            }
        }
    }
    best
}

/// `|{u ≥ s} ∩ R|`.
pub fn superlevel_measure(u: &GridFunction, region: &ParabolicCube, s: f64) -> Result<f64, GridError> {
    let w = RegionWeights::new(u.grid(), region)?;
    Ok(w.integrate(u, |v| if v >= s { 1.0 } else { 0.0 }))
}

/// Discrete `‖u‖_{W^{2,1}_p(R)} = ‖u‖ + ‖u_t‖ + Σ‖u_{x_k}‖ + Σ‖u_{x_k x_l}‖`.
///
/// Derivatives are forward in time and centered in space; they are taken on
/// interior nodes only (boundary nodes contribute zero).
pub fn w21p_norm(u: &GridFunction, region: &ParabolicCube, p: f64) -> Result<f64, GridError> {
    let g = u.grid();
    let n = g.n();
    let s = g.space_len();
    let nterms = 2 + n + n * n;
    let mut fields = vec![vec![0.0; g.len()]; nterms];
    for k in 0..=g.nt() {
        let layer = u.layer(k);
        for idx in 0..s {
            let i = k * s + idx;
            fields[0][i] = layer[idx];
            if k < g.nt() {
                fields[1][i] = (u.at(k + 1, idx) - layer[idx]) / g.dt();
            }
            if g.is_lateral(idx) {
                continue;
            }
            let grad = centered_gradient(g, layer, idx);
            let hess = centered_hessian(g, layer, idx);
            for a in 0..n {
                fields[2 + a][i] = grad[a];
                for b in 0..n {
                    fields[2 + n + a * n + b][i] = hess[a][b];
                }
            }
        }
    }
    let mut total = 0.0;
    for f in fields {
        total += lp_norm(&GridFunction::new(g.clone(), f)?, region, p)?;
    }
    Ok(total)
}

/// `max |u(P) - u(P')| / d(P, P')^α` with `d = sqrt(|x-y|² + |t-s|)`, over all
/// neighbouring node pairs in the closed region plus all pairs among a
/// deterministic stride subsample of about `sample` nodes.
pub fn holder_seminorm(u: &GridFunction, region: &ParabolicCube, alpha: f64, sample: usize) -> Result<f64, GridError> {
    let g = u.grid();
    let w = RegionWeights::new(g, region)?;
    let n = g.n();
    let mut nodes: Vec<(usize, usize)> = Vec::with_capacity(w.time.len() * w.space.len());
    for &(k, _) in &w.time {
        for &(idx, _) in &w.space {
            nodes.push((k, idx));
        }
    }
    let value = |&(k, idx): &(usize, usize)| u.at(k, idx);
    let dist = |a: &(usize, usize), b: &(usize, usize)| {
        let (pa, pb) = (g.point(a.1), g.point(b.1));
        let mut d2 = (g.time(a.0) - g.time(b.0)).abs();
        for i in 0..n {
            d2 += (pa[i] - pb[i]) * (pa[i] - pb[i]);
        }
        d2.sqrt()
    };
    let mut best: f64 = 0.0;
    let in_region: std::collections::HashSet<(usize, usize)> = nodes.iter().copied().collect();
    let s = g.space_len();
    for a in &nodes {
        let ij = g.unflatten(a.1);
        let mut neigh = vec![(a.0 + 1, a.1)];
        for ax in 0..n {
            let mut jj = ij;
            jj[ax] += 1;
            if jj[ax] < g.nx() {
                neigh.push((a.0, g.flatten(jj)));
            }
        }
        for b in neigh {
            if b.1 < s && in_region.contains(&b) {
                let d = dist(a, &b);
                if d > 0.0 {
                    best = best.max((value(a) - value(&b)).abs() / d.powf(alpha));
                }
            }
        }
    }
    let stride = (nodes.len() / sample.max(2)).max(1);
    let sub: Vec<&(usize, usize)> = nodes.iter().step_by(stride).collect();
    for (i, a) in sub.iter().enumerate() {
        for b in &sub[i + 1..] {
            let d = dist(a, b);
            if d > 0.0 {
                best = best.max((value(a) - value(b)).abs() / d.powf(alpha));
            }
        }
    }
    Ok(best)
}

/// Samples a field onto the grid.
pub fn sample_field(f: &Field, grid: &SpaceTimeGrid) -> Result<GridFunction, GridError> {
    GridFunction::from_fn(grid.clone(), |x, t| f.eval(x, t))
}

/// Samples a coefficient onto the grid with the solver's cell rule.
pub fn sample_coefficient(mu: &Coefficient, grid: &SpaceTimeGrid) -> Result<GridFunction, GridError> {
    let (h, dt) = (grid.h(), grid.dt());
    GridFunction::from_fn(grid.clone(), |x, t| mu.sample(x, t, h, dt))
}
