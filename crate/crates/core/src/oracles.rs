//! Independent ground truth: brute-force extremal operators and closed-form solutions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equation::Field;
use crate::geometry::ParabolicCube;
use crate::grid::{GridError, GridFunction, SpaceTimeGrid};
use crate::pucci::{Branch, PucciPair, SymMatrix};
use crate::rng::SeededRng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("point ({x:?}, {t}) lies outside the solution's domain")]
    OutOfDomain { x: Vec<f64>, t: f64 },
    #[error("invalid exact solution: {0}")]
    Invalid(String),
}

fn to_dmatrix(x: &SymMatrix) -> DMatrix<f64> {
    let n = x.dim();
    DMatrix::from_row_slice(n, n, &x.row_major())
}

/// `-Tr(A X)`.
fn neg_trace(a: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
    -(a * x).trace()
}

/// Results of the two brute-force searches for `max/min −Tr(AX)` over `λI ≤ A ≤ ΛI`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BruteForce {
    /// Search over `A = V diag(a) Vᵀ` with `V` the eigenbasis of `X` and `a` on a grid of `[λ,Λ]^n`.
    pub eigenbasis: f64,
    /// Search over randomly rotated admissible `A`.
    pub rotations: f64,
}

/// Brute-force `P±(X)`: an enumeration of `grid_points` values per axis in the
/// eigenbasis, and `n_samples` random rotations.
pub fn pucci_bruteforce(pair: &PucciPair, x: &SymMatrix, branch: Branch, grid_points: usize, n_samples: usize, seed: u64) -> BruteForce {
    let n = x.dim();
    let xm = to_dmatrix(x);
    let better = |a: f64, b: f64| match branch {
        Branch::Plus => a.max(b),
        Branch::Minus => a.min(b),
    };
    let worst = match branch {
        Branch::Plus => f64::NEG_INFINITY,
        Branch::Minus => f64::INFINITY,
    };
    let (lo, hi) = (pair.lambda(), pair.big_lambda());
    let g = grid_points.max(2);
    let level = |j: usize| if j + 1 == g { hi } else { lo + (hi - lo) * j as f64 / (g - 1) as f64 };

    let eig = xm.clone().symmetric_eigen();
    let mu = eig.eigenvalues.clone();
    let mut best_eig = worst;
    let total = g.pow(n as u32);
    for code in 0..total {
        let mut c = code;
        let mut val = 0.0;
        for i in 0..n {
            val -= level(c % g) * mu[i];
            c /= g;
        }
        best_eig = better(best_eig, val);
    }

    let mut rng = SeededRng::new(seed);
    let mut best_rot = worst;
    for s in 0..n_samples {
        let q = if s % 2 == 0 {
            random_rotation(n, &mut rng)
        } else {
            // perturbation of the eigenbasis at a random angular scale
            let scale = 10f64.powf(-rng.uniform(0.0, 3.0));
            &eig.eigenvectors * small_rotation(n, scale, &mut rng)
        };
        let d: Vec<f64> = (0..n)
            .map(|_| match rng.below(3) {
                0 => lo,
                1 => hi,
                _ => rng.uniform(lo, hi),
            })
            .collect();
        let a = &q * DMatrix::from_diagonal(&DVector::from_vec(d.clone())) * q.transpose();
        best_rot = better(best_rot, neg_trace(&a, &xm));
        // also the extreme diagonal choice for this rotation
        let e: Vec<f64> = (0..n)
            .map(|i| {
                let xi = (q.column(i).transpose() * &xm * q.column(i))[(0, 0)];
                let pos = match branch {
                    Branch::Plus => xi < 0.0,
                    Branch::Minus => xi > 0.0,
                };
                if pos {
                    hi
                } else {
                    lo
                }
            })
            .collect();
        let a = &q * DMatrix::from_diagonal(&DVector::from_vec(e)) * q.transpose();
        best_rot = better(best_rot, neg_trace(&a, &xm));
    }
    BruteForce { eigenbasis: best_eig, rotations: best_rot }
}

/// Haar-distributed orthogonal matrix from the QR factorization of a Gaussian matrix.
fn random_rotation(n: usize, rng: &mut SeededRng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.normal());
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let signs = DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| if r[(i, i)] < 0.0 { -1.0 } else { 1.0 }));
    q * signs
}

/// `exp(S)` for a random skew-symmetric `S` with entries of size `scale`.
fn small_rotation(n: usize, scale: f64, rng: &mut SeededRng) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = scale * rng.normal();
            s[(i, j)] = v;
            s[(j, i)] = -v;
        }
    }
    s.exp()
}

/// Families of closed-form solutions of `u_t + P±(D²u) = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolutionKind {
    /// `a·e^{-rt} sin(κ(x₁ - x_left))` on one half-period; `r = κ²Λ` or `κ²λ`
    /// according to the branch and the sign of `a`.
    DecayingSine { amplitude: f64, kappa: f64, x_left: f64 },
    /// `b·x + c`.
    Affine { slope: Vec<f64>, offset: f64 },
    /// `(c/2)|x|² + rt` with `r = -P±(cI)`.
    QuadraticInTime { curvature: f64 },
    /// `a (t + t₀)^{-1/2} exp(-x₁²/(4D(t+t₀)))` restricted to `|x₁| ≤ sqrt(2D t₀)`
    /// (where it is concave), with `D = Λ` (plus) or `λ` (minus).
    HeatKernelLike { amplitude: f64, t0: f64 },
}

#[derive(Clone, Debug)]
pub struct ExactSolution {
    pub kind: SolutionKind,
    pub pair: PucciPair,
    pub branch: Branch,
    pub domain: ParabolicCube,
}

/// Value and derivatives at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactValue {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: SymMatrix,
    pub time_derivative: f64,
}

impl ExactSolution {
    /// The decaying sine on `(x_left, x_left + π/κ)` (and `(-w, w)` in the other
    /// axes) over `(0, t_top]`.
    pub fn decaying_sine(n: usize, pair: PucciPair, branch: Branch, amplitude: f64, kappa: f64, x_left: f64, t_top: f64) -> Result<Self, OracleError> {
        if !(kappa > 0.0) || amplitude == 0.0 {
            return Err(OracleError::Invalid("decaying sine needs kappa > 0 and a nonzero amplitude".into()));
        }
        let half = std::f64::consts::PI / (2.0 * kappa);
        let mut center = vec![0.0; n];
        center[0] = x_left + half;
        let domain = ParabolicCube::from_f64(&center, half, t_top, t_top).map_err(|e| OracleError::Invalid(e.to_string()))?;
        Ok(ExactSolution { kind: SolutionKind::DecayingSine { amplitude, kappa, x_left }, pair, branch, domain })
    }

    pub fn affine(pair: PucciPair, branch: Branch, slope: Vec<f64>, offset: f64, domain: ParabolicCube) -> Result<Self, OracleError> {
        if slope.len() != domain.dim() {
            return Err(OracleError::Invalid("slope dimension".into()));
        }
        Ok(ExactSolution { kind: SolutionKind::Affine { slope, offset }, pair, branch, domain })
    }

    pub fn quadratic_in_time(pair: PucciPair, branch: Branch, curvature: f64, domain: ParabolicCube) -> Self {
        ExactSolution { kind: SolutionKind::QuadraticInTime { curvature }, pair, branch, domain }
    }

    /// Heat kernel on its concave core, for `t ∈ (0, t_top]`.
    pub fn heat_kernel_like(n: usize, pair: PucciPair, branch: Branch, amplitude: f64, t0: f64, t_top: f64) -> Result<Self, OracleError> {
        if !(amplitude > 0.0 && t0 > 0.0) {
            return Err(OracleError::Invalid("heat kernel needs positive amplitude and t0".into()));
        }
        let d = Self::diffusivity(&pair, branch);
        let w = (2.0 * d * t0).sqrt();
        let domain = ParabolicCube::from_f64(&vec![0.0; n], w, t_top, t_top).map_err(|e| OracleError::Invalid(e.to_string()))?;
        Ok(ExactSolution { kind: SolutionKind::HeatKernelLike { amplitude, t0 }, pair, branch, domain })
    }

    /// Coefficient acting on a negative second derivative.
    fn diffusivity(pair: &PucciPair, branch: Branch) -> f64 {
        match branch {
            Branch::Plus => pair.big_lambda(),
            Branch::Minus => pair.lambda(),
        }
    }

    /// Decay rate of the decaying sine.
    pub fn sine_rate(&self) -> Option<f64> {
        match &self.kind {
            SolutionKind::DecayingSine { amplitude, kappa, .. } => {
                let concave = *amplitude > 0.0;
                let c = match (self.branch, concave) {
                    (Branch::Plus, true) | (Branch::Minus, false) => self.pair.big_lambda(),
                    _ => self.pair.lambda(),
                };
                Some(c * kappa * kappa)
            }
            _ => None,
        }
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn eval(&self, x: &[f64], t: f64) -> Result<ExactValue, OracleError> {
        let tol = 1e-12 * (1.0 + self.domain.half_width_f64());
        let inside = x.len() == self.dim()
            && (0..self.dim()).all(|i| x[i] >= self.domain.lo_f64(i) - tol && x[i] <= self.domain.hi_f64(i) + tol)
            && t >= self.domain.t_lo_f64() - 1e-12
            && t <= self.domain.t_hi_f64() + 1e-12;
        if !inside {
            return Err(OracleError::OutOfDomain { x: x.to_vec(), t });
        }
        Ok(self.eval_unchecked(x, t))
    }

    fn eval_unchecked(&self, x: &[f64], t: f64) -> ExactValue {
        let n = self.dim();
        let mut gradient = vec![0.0; n];
        let mut hess = vec![0.0; n * n];
        let (value, time_derivative) = match &self.kind {
            SolutionKind::DecayingSine { amplitude, kappa, x_left } => {
                let r = self.sine_rate().expect("sine");
                let e = amplitude * (-r * t).exp();
                let th = kappa * (x[0] - x_left);
                let v = e * th.sin();
                gradient[0] = e * kappa * th.cos();
                hess[0] = -kappa * kappa * v;
                (v, -r * v)
            }
            SolutionKind::Affine { slope, offset } => {
                gradient.clone_from(slope);
                (offset + slope.iter().zip(x).map(|(b, xi)| b * xi).sum::<f64>(), 0.0)
            }
            SolutionKind::QuadraticInTime { curvature } => {
                let eye: Vec<f64> = vec![*curvature; n];
                let x_mat = SymMatrix::diag(&eye).expect("n <= 3");
                let rate = -self.pair.eval(&x_mat, self.branch).expect("diag");
                for i in 0..n {
                    gradient[i] = curvature * x[i];
                    hess[i * n + i] = *curvature;
                }
                (0.5 * curvature * x.iter().map(|v| v * v).sum::<f64>() + rate * t, rate)
            }
            SolutionKind::HeatKernelLike { amplitude, t0 } => {
                let d = Self::diffusivity(&self.pair, self.branch);
                let s = t + t0;
                let v = amplitude * s.powf(-0.5) * (-x[0] * x[0] / (4.0 * d * s)).exp();
                gradient[0] = -x[0] / (2.0 * d * s) * v;
                hess[0] = (x[0] * x[0] / (4.0 * d * d * s * s) - 1.0 / (2.0 * d * s)) * v;
                (v, d * hess[0])
            }
        };
        ExactValue { value, gradient, hessian: SymMatrix::from_row_major(n, &hess).expect("symmetric"), time_derivative }
    }

    /// `u_t + P±(D²u)` from the closed-form derivatives.
    pub fn residual(&self, x: &[f64], t: f64) -> Result<f64, OracleError> {
        let v = self.eval(x, t)?;
        Ok(v.time_derivative + self.pair.eval(&v.hessian, self.branch).expect("n <= 3"))
    }

    /// Closed form as a [`Field`] (unchecked outside the domain).
    pub fn field(&self) -> Field {
        let me = self.clone();
        Field::new(format!("{:?}", self.kind), move |x, t| me.eval_unchecked(x, t).value)
    }

    /// Samples the solution on a grid over its domain.
    pub fn sample(&self, grid: &SpaceTimeGrid) -> Result<GridFunction, GridError> {
        let me = self.clone();
        GridFunction::from_fn(grid.clone(), move |x, t| me.eval_unchecked(x, t).value)
    }
}

/// `exact_eval(sol, x, t)`.
pub fn exact_eval(sol: &ExactSolution, x: &[f64], t: f64) -> Result<ExactValue, OracleError> {
    sol.eval(x, t)
}
