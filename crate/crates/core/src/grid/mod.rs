//! Uniform space-time grids, sampled fields and the monotone explicit solver.

pub mod barrier;
pub mod expr;
pub mod fixed_point;
pub mod io;
pub mod norms;
pub mod solver;
pub mod stencil;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, ParabolicCube};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grids are supported for n = 1 and n = 2, got {0}")]
    Dimension(usize),
    #[error("need at least 3 points per axis and 1 time step (nx={nx}, nt={nt})")]
    TooCoarse { nx: usize, nt: usize },
    #[error("invalid box: {0}")]
    Box(String),
    #[error("expected {expected} values, got {got}")]
    Length { expected: usize, got: usize },
    #[error("non-finite value {value} at time level {level}, node {node}")]
    NonFinite { level: usize, node: usize, value: f64 },
    #[error("grids differ")]
    Mismatch,
    #[error("region does not contain any grid node")]
    EmptyRegion,
    #[error("time stride {every} does not divide nt={nt}")]
    Stride { every: usize, nt: usize },
    #[error("{0}")]
    Io(String),
}

impl From<GeometryError> for GridError {
    fn from(e: GeometryError) -> Self {
        GridError::Box(e.to_string())
    }
}

/// `nx` nodes per axis on `center + [-r, r]^n` and `nt + 1` time levels on `[t_lo, t_hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeGrid {
    n: usize,
    center: [f64; 2],
    half_width: f64,
    t_lo: f64,
    t_hi: f64,
    nx: usize,
    nt: usize,
}

impl SpaceTimeGrid {
    pub fn new(n: usize, center: &[f64], half_width: f64, t_lo: f64, t_hi: f64, nx: usize, nt: usize) -> Result<Self, GridError> {
        if !(1..=2).contains(&n) || center.len() != n {
            return Err(GridError::Dimension(n));
        }
        if nx < 3 || nt < 1 {
            return Err(GridError::TooCoarse { nx, nt });
        }
        let finite = center.iter().all(|c| c.is_finite()) && half_width.is_finite() && t_lo.is_finite() && t_hi.is_finite();
        if !finite || !(half_width > 0.0) || !(t_hi > t_lo) {
            return Err(GridError::Box(format!("half_width={half_width}, t=[{t_lo}, {t_hi}]")));
        }
        let mut c = [0.0; 2];
        c[..n].copy_from_slice(center);
        Ok(SpaceTimeGrid { n, center: c, half_width, t_lo, t_hi, nx, nt })
    }

    /// Grid on the closure of `cube`.
    pub fn over(cube: &ParabolicCube, nx: usize, nt: usize) -> Result<Self, GridError> {
        SpaceTimeGrid::new(cube.dim(), cube.center_f64(), cube.half_width_f64(), cube.t_lo_f64(), cube.t_hi_f64(), nx, nt)
    }

    /// Grid on `cube` with spacing `h` (which must divide the side) and `dt ≤ dt_max`.
    pub fn with_spacing(cube: &ParabolicCube, h: f64, dt_max: f64) -> Result<Self, GridError> {
        let cells = (2.0 * cube.half_width_f64() / h).round();
        if !(cells >= 2.0) || ((2.0 * cube.half_width_f64() / h) - cells).abs() > 1e-9 * cells {
            return Err(GridError::Box(format!("spacing {h} does not divide the side")));
        }
        let depth = cube.t_hi_f64() - cube.t_lo_f64();
        let nt = (depth / dt_max).ceil().max(1.0) as usize;
        SpaceTimeGrid::over(cube, cells as usize + 1, nt)
    }

    pub fn cube(&self) -> ParabolicCube {
        ParabolicCube::from_f64(&self.center[..self.n], self.half_width, self.t_hi, self.t_hi - self.t_lo).expect("valid grid box")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn center(&self) -> &[f64] {
        &self.center[..self.n]
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn t_lo(&self) -> f64 {
        self.t_lo
    }

    pub fn t_hi(&self) -> f64 {
        self.t_hi
    }

    pub fn h(&self) -> f64 {
        2.0 * self.half_width / (self.nx - 1) as f64
    }

    pub fn dt(&self) -> f64 {
        (self.t_hi - self.t_lo) / self.nt as f64
    }

    pub fn lo(&self, axis: usize) -> f64 {
        self.center[axis] - self.half_width
    }

    pub fn hi(&self, axis: usize) -> f64 {
        self.center[axis] + self.half_width
    }

    /// Coordinate of node `i` along `axis`; the last node sits exactly on the upper face.
    #[inline]
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        if i + 1 == self.nx {
            self.hi(axis)
        } else {
            self.lo(axis) + i as f64 * self.h()
        }
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        if k == self.nt {
            self.t_hi
        } else {
            self.t_lo + k as f64 * self.dt()
        }
    }

    /// Number of spatial nodes `nx^n`.
    pub fn space_len(&self) -> usize {
        self.nx.pow(self.n as u32)
    }

    /// Number of stored values `(nt + 1)·nx^n`.
    pub fn len(&self) -> usize {
        (self.nt + 1) * self.space_len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Multi-index of a flat spatial index (last axis fastest).
    #[inline]
    pub fn unflatten(&self, idx: usize) -> [usize; 2] {
        if self.n == 1 {
            [idx, 0]
        } else {
            [idx / self.nx, idx % self.nx]
        }
    }

    #[inline]
    pub fn flatten(&self, ij: [usize; 2]) -> usize {
        if self.n == 1 {
            ij[0]
        } else {
            ij[0] * self.nx + ij[1]
        }
    }

    /// Spatial coordinates of a flat spatial index (unused axes are 0).
    #[inline]
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let ij = self.unflatten(idx);
        let mut p = [0.0; 2];
        for (a, v) in p.iter_mut().enumerate().take(self.n) {
            *v = self.coord(a, ij[a]);
        }
        p
    }

    /// Whether the spatial node lies on the lateral boundary.
    #[inline]
    pub fn is_lateral(&self, idx: usize) -> bool {
        let ij = self.unflatten(idx);
        (0..self.n).any(|a| ij[a] == 0 || ij[a] + 1 == self.nx)
    }

    /// The same box sampled at every `every`-th time level.
    pub fn coarsen_time(&self, every: usize) -> Result<SpaceTimeGrid, GridError> {
        if every == 0 || self.nt % every != 0 {
            return Err(GridError::Stride { every, nt: self.nt });
        }
        let mut g = self.clone();
        g.nt = self.nt / every;
        Ok(g)
    }

    /// Halve `h` and quarter `dt`.
    pub fn refined(&self) -> SpaceTimeGrid {
        let mut g = self.clone();
        g.nx = 2 * (self.nx - 1) + 1;
        g.nt = 4 * self.nt;
        g
    }
}

/// A finite field sampled on every node of a [`SpaceTimeGrid`], indexed `(time, space…)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: SpaceTimeGrid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: SpaceTimeGrid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::Length { expected: grid.len(), got: values.len() });
        }
        let s = grid.space_len();
        if let Some((i, &v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(GridError::NonFinite { level: i / s, node: i % s, value: v });
        }
        Ok(GridFunction { grid, values })
    }

    pub fn constant(grid: SpaceTimeGrid, c: f64) -> Result<Self, GridError> {
        let len = grid.len();
        GridFunction::new(grid, vec![c; len])
    }

    /// Samples `f(x, t)` at every node.
    pub fn from_fn(grid: SpaceTimeGrid, f: impl Fn(&[f64], f64) -> f64 + Sync) -> Result<Self, GridError> {
        let s = grid.space_len();
        let n = grid.n();
        let values: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let p = grid.point(i % s);
                f(&p[..n], grid.time(i / s))
            })
            .collect();
        GridFunction::new(grid, values)
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn layer(&self, k: usize) -> &[f64] {
        let s = self.grid.space_len();
        &self.values[k * s..(k + 1) * s]
    }

    #[inline]
    pub fn at(&self, k: usize, idx: usize) -> f64 {
        self.values[k * self.grid.space_len() + idx]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<GridFunction, GridError> {
        GridFunction::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, c: f64) -> Result<GridFunction, GridError> {
        self.map(|v| c * v)
    }

    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<GridFunction, GridError> {
        if self.grid != other.grid {
            return Err(GridError::Mismatch);
        }
        GridFunction::new(self.grid.clone(), self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect())
    }

    /// `max |self - other|` over all nodes.
    pub fn max_abs_diff(&self, other: &GridFunction) -> Result<f64, GridError> {
        if self.grid != other.grid {
            return Err(GridError::Mismatch);
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    /// Every `every`-th time level.
    pub fn coarsen_time(&self, every: usize) -> Result<GridFunction, GridError> {
        let grid = self.grid.coarsen_time(every)?;
        let mut values = Vec::with_capacity(grid.len());
        for k in 0..=grid.nt() {
            values.extend_from_slice(self.layer(k * every));
        }
        GridFunction::new(grid, values)
    }

    /// Multilinear interpolation in `(x, t)`; `None` outside the grid box.
    pub fn interpolate(&self, x: &[f64], t: f64) -> Option<f64> {
        let g = &self.grid;
        let n = g.n();
        let locate = |v: f64, lo: f64, step: f64, cells: usize| -> Option<(usize, f64)> {
            let tol = 1e-12 * (1.0 + v.abs());
            let s = (v - lo) / step;
            if s < -tol || s > cells as f64 + tol {
                return None;
            }
            let i = (s.floor().max(0.0) as usize).min(cells - 1);
            Some((i, (s - i as f64).clamp(0.0, 1.0)))
        };
        let (k, wt) = locate(t, g.t_lo(), g.dt(), g.nt())?;
        let mut cell = [(0usize, 0.0f64); 2];
        for a in 0..n {
            cell[a] = locate(x[a], g.lo(a), g.h(), g.nx() - 1)?;
        }
        let mut acc = 0.0;
        for dk in 0..2 {
            let w_t = if dk == 0 { 1.0 - wt } else { wt };
            if w_t == 0.0 {
                continue;
            }
            for mask in 0..(1usize << n) {
                let mut w = w_t;
                let mut ij = [0usize; 2];
                for a in 0..n {
                    let bit = mask >> a & 1;
                    ij[a] = cell[a].0 + bit;
                    w *= if bit == 0 { 1.0 - cell[a].1 } else { cell[a].1 };
                }
                if w != 0.0 {
                    acc += w * self.at(k + dk, g.flatten(ij));
                }
            }
        }
        Some(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_geometry() {
        let g = SpaceTimeGrid::new(2, &[0.0, 1.0], 1.0, 0.0, 1.0, 5, 8).unwrap();
        assert_eq!(g.h(), 0.5);
        assert_eq!(g.dt(), 0.125);
        assert_eq!(g.space_len(), 25);
        assert_eq!(g.len(), 9 * 25);
        assert_eq!(g.point(g.flatten([4, 2])), [1.0, 1.0]);
        assert!(g.is_lateral(g.flatten([0, 2])));
        assert!(!g.is_lateral(g.flatten([1, 3])));
        let r = g.refined();
        assert_eq!((r.nx(), r.nt()), (9, 32));
        assert!(SpaceTimeGrid::new(3, &[0.0; 3], 1.0, 0.0, 1.0, 5, 8).is_err());
        assert!(SpaceTimeGrid::new(1, &[0.0], 1.0, 0.0, 1.0, 2, 8).is_err());
    }

    #[test]
    fn nan_is_rejected() {
        let g = SpaceTimeGrid::new(1, &[0.0], 1.0, 0.0, 1.0, 3, 1).unwrap();
        let mut v = vec![0.0; 6];
        v[4] = f64::NAN;
        assert!(matches!(GridFunction::new(g, v), Err(GridError::NonFinite { level: 1, node: 1, .. })));
    }

    #[test]
    fn interpolation_is_exact_on_multilinear_fields() {
        let g = SpaceTimeGrid::new(2, &[0.0, 0.0], 1.0, 0.0, 2.0, 9, 16).unwrap();
        let f = |x: &[f64], t: f64| 1.0 + 2.0 * x[0] - x[1] + 0.5 * t + x[0] * x[1] * t;
        let u = GridFunction::from_fn(g, f).unwrap();
        for &(x, y, t) in &[(0.1, -0.33, 0.7), (1.0, 1.0, 2.0), (-1.0, 0.2, 0.0)] {
            let v = u.interpolate(&[x, y], t).unwrap();
            assert!((v - f(&[x, y], t)).abs() < 1e-12);
        }
        assert!(u.interpolate(&[1.5, 0.0], 1.0).is_none());
    }

    #[test]
    fn coarsening_keeps_levels() {
        let g = SpaceTimeGrid::new(1, &[0.0], 1.0, 0.0, 1.0, 5, 8).unwrap();
        let u = GridFunction::from_fn(g, |x, t| x[0] + t).unwrap();
        let c = u.coarsen_time(4).unwrap();
        assert_eq!(c.grid().nt(), 2);
        assert_eq!(c.layer(1), u.layer(4));
        assert!(u.coarsen_time(3).is_err());
    }
}
