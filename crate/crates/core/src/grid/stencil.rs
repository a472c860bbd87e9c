//! Monotone finite differences for `P±(D²u)` and upwinded `|Du|`.
//!
//! In one dimension `P±` is applied to the centered second difference. In two
//! dimensions the operator is approximated over orthogonal frames of lattice
//! directions: for a frame `{e, e⊥}` the value is `P±(δ²_e u) + P±(δ²_{e⊥} u)`
//! with scalar `P±`, and `P⁺` (resp. `P⁻`) takes the largest (resp. smallest)
//! frame value. Each frame value is nonincreasing in the neighbours, so the
//! explicit update is monotone under the CFL bound.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::SpaceTimeGrid;
use crate::pucci::{Branch, PucciPair, SymMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StencilError {
    #[error("node {0} is on the lateral boundary")]
    Boundary(usize),
}

/// A pair of orthogonal integer lattice directions.
pub type Frame = [[i64; 2]; 2];

/// Directions used by the two-dimensional operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameSet {
    frames: Vec<Frame>,
}

impl Default for FrameSet {
    /// Axes and diagonals.
    fn default() -> Self {
        FrameSet { frames: vec![[[1, 0], [0, 1]], [[1, 1], [1, -1]]] }
    }
}

impl FrameSet {
    /// Axes, diagonals and the two knight-move frames (stencil reach 2).
    pub fn wide() -> Self {
        let mut f = FrameSet::default();
        f.frames.push([[2, 1], [-1, 2]]);
        f.frames.push([[1, 2], [-2, 1]]);
        f
    }

    pub fn new(frames: Vec<Frame>) -> Option<Self> {
        let ok = !frames.is_empty()
            && frames.iter().all(|[a, b]| a[0] * b[0] + a[1] * b[1] == 0 && a != &[0, 0] && b != &[0, 0]);
        ok.then_some(FrameSet { frames })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    /// Worst gap between the frame operator and `P±` on unit rank-two
    /// Hessians `R(θ) diag(1,-1) R(θ)ᵀ`, sampled at 720 angles.
    pub fn direction_gap(&self, pair: &PucciPair) -> f64 {
        let mut gap: f64 = 0.0;
        for k in 0..720 {
            let th = std::f64::consts::PI * k as f64 / 720.0;
            let (c, s) = (th.cos(), th.sin());
            // R diag(1,-1) Rᵀ = [[c²-s², 2cs], [2cs, s²-c²]]
            let (a, b, d) = (c * c - s * s, 2.0 * c * s, s * s - c * c);
            let x = SymMatrix::from_row_major(2, &[a, b, b, d]).expect("symmetric");
            for branch in [Branch::Plus, Branch::Minus] {
                let exact = pair.eval(&x, branch).expect("2x2");
                let approx = self.apply_quadratic(pair, branch, a, b, d);
                gap = gap.max((exact - approx).abs());
            }
        }
        gap
    }

    fn apply_quadratic(&self, pair: &PucciPair, branch: Branch, a: f64, b: f64, d: f64) -> f64 {
        let dir2 = |e: [i64; 2]| {
            let (p, q) = (e[0] as f64, e[1] as f64);
            (a * p * p + 2.0 * b * p * q + d * q * q) / (p * p + q * q)
        };
        let vals = self.frames.iter().map(|[e, f]| pair.eval_scalar(dir2(*e), branch) + pair.eval_scalar(dir2(*f), branch));
        match branch {
            Branch::Plus => vals.fold(f64::NEG_INFINITY, f64::max),
            Branch::Minus => vals.fold(f64::INFINITY, f64::min),
        }
    }

    fn reach(frame: &Frame) -> usize {
        frame.iter().flat_map(|e| e.iter()).map(|c| c.unsigned_abs() as usize).max().unwrap_or(1)
    }
}

/// `P±` of the discrete Hessian of `layer` at interior node `idx`.
pub fn discretize_pucci(
    grid: &SpaceTimeGrid,
    layer: &[f64],
    idx: usize,
    pair: &PucciPair,
    branch: Branch,
    frames: &FrameSet,
) -> Result<f64, StencilError> {
    if grid.is_lateral(idx) {
        return Err(StencilError::Boundary(idx));
    }
    Ok(pucci_at(grid, layer, idx, pair, branch, frames))
}

#[inline]
pub(crate) fn pucci_at(grid: &SpaceTimeGrid, layer: &[f64], idx: usize, pair: &PucciPair, branch: Branch, frames: &FrameSet) -> f64 {
    let h2 = grid.h() * grid.h();
    let u0 = layer[idx];
    if grid.n() == 1 {
        let d2 = (layer[idx - 1] - 2.0 * u0 + layer[idx + 1]) / h2;
        return pair.eval_scalar(d2, branch);
    }
    let nx = grid.nx();
    let [i, j] = grid.unflatten(idx);
    let mut best = match branch {
        Branch::Plus => f64::NEG_INFINITY,
        Branch::Minus => f64::INFINITY,
    };
    for frame in frames.frames() {
        let r = FrameSet::reach(frame);
        if i < r || j < r || i + r >= nx || j + r >= nx {
            continue;
        }
        let mut v = 0.0;
        for e in frame {
            let off = e[0] as isize * nx as isize + e[1] as isize;
            let up = layer[(idx as isize + off) as usize];
            let dn = layer[(idx as isize - off) as usize];
            let len2 = (e[0] * e[0] + e[1] * e[1]) as f64;
            v += pair.eval_scalar((up - 2.0 * u0 + dn) / (len2 * h2), branch);
        }
        best = match branch {
            Branch::Plus => best.max(v),
            Branch::Minus => best.min(v),
        };
    }
    best
}

/// Godunov upwind magnitude `|Du|` at interior node `idx`.
///
/// On the plus branch each axis contributes `max(D⁻u, -D⁺u, 0)`, on the minus
/// branch `max(-D⁻u, D⁺u, 0)`; both choices make `∓|Du|` monotone.
#[inline]
pub fn upwind_gradient(grid: &SpaceTimeGrid, layer: &[f64], idx: usize, branch: Branch) -> f64 {
    let h = grid.h();
    let u0 = layer[idx];
    let stride = [if grid.n() == 1 { 1 } else { grid.nx() }, 1];
    let mut sum = 0.0;
    for s in stride.iter().take(grid.n()) {
        let dm = (u0 - layer[idx - s]) / h;
        let dp = (layer[idx + s] - u0) / h;
        let g = match branch {
            Branch::Plus => dm.max(-dp).max(0.0),
            Branch::Minus => (-dm).max(dp).max(0.0),
        };
        sum += g * g;
    }
    sum.sqrt()
}

/// Centered gradient at an interior node (one-sided on the lateral boundary).
pub fn centered_gradient(grid: &SpaceTimeGrid, layer: &[f64], idx: usize) -> [f64; 2] {
    let h = grid.h();
    let ij = grid.unflatten(idx);
    let stride = [if grid.n() == 1 { 1 } else { grid.nx() }, 1];
    let mut g = [0.0; 2];
    for a in 0..grid.n() {
        let s = stride[a];
        g[a] = if ij[a] == 0 {
            (layer[idx + s] - layer[idx]) / h
        } else if ij[a] + 1 == grid.nx() {
            (layer[idx] - layer[idx - s]) / h
        } else {
            (layer[idx + s] - layer[idx - s]) / (2.0 * h)
        };
    }
    g
}

/// Centered Hessian at an interior node.
pub fn centered_hessian(grid: &SpaceTimeGrid, layer: &[f64], idx: usize) -> [[f64; 2]; 2] {
    let h2 = grid.h() * grid.h();
    let u0 = layer[idx];
    if grid.n() == 1 {
        return [[(layer[idx - 1] - 2.0 * u0 + layer[idx + 1]) / h2, 0.0], [0.0, 0.0]];
    }
    let nx = grid.nx();
    let xx = (layer[idx - nx] - 2.0 * u0 + layer[idx + nx]) / h2;
    let yy = (layer[idx - 1] - 2.0 * u0 + layer[idx + 1]) / h2;
    let xy = (layer[idx + nx + 1] - layer[idx + nx - 1] - layer[idx - nx + 1] + layer[idx - nx - 1]) / (4.0 * h2);
    [[xx, xy], [xy, yy]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridFunction;

    fn pair() -> PucciPair {
        PucciPair::new(1.0, 2.0).unwrap()
    }

    #[test]
    fn quadratic_in_one_dimension() {
        let g = SpaceTimeGrid::new(1, &[0.0], 1.0, 0.0, 1.0, 17, 1).unwrap();
        let u = GridFunction::from_fn(g.clone(), |x, _| x[0] * x[0]).unwrap();
        for idx in 1..16 {
            let p = discretize_pucci(&g, u.layer(0), idx, &pair(), Branch::Plus, &FrameSet::default()).unwrap();
            assert!((p + 2.0).abs() < 1e-12);
        }
        assert_eq!(
            discretize_pucci(&g, u.layer(0), 0, &pair(), Branch::Plus, &FrameSet::default()),
            Err(StencilError::Boundary(0))
        );
    }

    #[test]
    fn affine_gives_zero() {
        let g = SpaceTimeGrid::new(2, &[0.0, 0.0], 1.0, 0.0, 1.0, 9, 1).unwrap();
        let u = GridFunction::from_fn(g.clone(), |x, _| 3.0 * x[0] - 2.0 * x[1] + 1.0).unwrap();
        for idx in 0..g.space_len() {
            if g.is_lateral(idx) {
                continue;
            }
            for b in [Branch::Plus, Branch::Minus] {
                for frames in [FrameSet::default(), FrameSet::wide()] {
                    let p = discretize_pucci(&g, u.layer(0), idx, &pair(), b, &frames).unwrap();
                    assert!(p.abs() < 1e-12, "{p}");
                }
            }
        }
    }

    #[test]
    fn saddle_matches_pucci_eval() {
        let g = SpaceTimeGrid::new(2, &[0.0, 0.0], 1.0, 0.0, 1.0, 17, 1).unwrap();
        let u = GridFunction::from_fn(g.clone(), |x, _| x[0] * x[0] - x[1] * x[1]).unwrap();
        let hess = SymMatrix::diag(&[2.0, -2.0]).unwrap();
        for b in [Branch::Plus, Branch::Minus] {
            let exact = pair().eval(&hess, b).unwrap();
            let idx = g.flatten([8, 8]);
            let p = discretize_pucci(&g, u.layer(0), idx, &pair(), b, &FrameSet::default()).unwrap();
            assert!((p - exact).abs() < 1e-12, "{b}: {p} vs {exact}");
        }
        assert_eq!(pair().eval(&hess, Branch::Plus).unwrap(), 2.0);
    }

    #[test]
    fn direction_gap_shrinks_with_more_frames() {
        let g4 = FrameSet::default().direction_gap(&pair());
        let g8 = FrameSet::wide().direction_gap(&pair());
        assert!(g8 < g4 && g4 > 0.0);
        assert!(FrameSet::new(vec![[[1, 1], [1, 0]]]).is_none());
    }

    #[test]
    fn upwind_is_exact_on_linear_profiles() {
        let g = SpaceTimeGrid::new(2, &[0.0, 0.0], 1.0, 0.0, 1.0, 9, 1).unwrap();
        let u = GridFunction::from_fn(g.clone(), |x, _| 3.0 * x[0] - 4.0 * x[1]).unwrap();
        let idx = g.flatten([4, 4]);
        for b in [Branch::Plus, Branch::Minus] {
            assert!((upwind_gradient(&g, u.layer(0), idx, b) - 5.0).abs() < 1e-12);
        }
        // At a strict local maximum only the plus branch sees a slope.
        let v = GridFunction::from_fn(g.clone(), |x, _| -(x[0] * x[0])).unwrap();
        assert_eq!(upwind_gradient(&g, v.layer(0), idx, Branch::Minus), 0.0);
        assert!(upwind_gradient(&g, v.layer(0), idx, Branch::Plus) > 0.0);
    }
}
