//! Pucci extremal operators on small symmetric matrices.
//!
//! For ellipticity constants `0 < λ ≤ Λ` the operators are
//!
//! ```text
//! P⁺(X) = max { -Tr(AX) : λI ≤ A ≤ ΛI } = -λ Σ e⁺ + Λ Σ e⁻
//! P⁻(X) = min { -Tr(AX) : λI ≤ A ≤ ΛI } = -Λ Σ e⁺ + λ Σ e⁻
//! ```
//!
//! where `e` ranges over the eigenvalues of `X`. Eigenvalues are computed in
//! closed form for `n ≤ 2` and by cyclic Jacobi rotations for `n = 3`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Off-diagonal tolerance (relative to the Frobenius norm) for the Jacobi sweeps.
pub const JACOBI_TOLERANCE: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PucciError {
    #[error("invalid ellipticity constants: need 0 < lambda <= Lambda, got lambda={lambda}, Lambda={big_lambda}")]
    InvalidPair { lambda: f64, big_lambda: f64 },
    #[error("unsupported matrix dimension {0}; expected 1, 2 or 3")]
    Dimension(usize),
    #[error("expected {expected} entries for a {n}x{n} matrix, got {got}")]
    EntryCount { n: usize, expected: usize, got: usize },
    #[error("matrix is not symmetric: X[{i}][{j}] = {a} but X[{j}][{i}] = {b}")]
    NotSymmetric { i: usize, j: usize, a: f64, b: f64 },
    #[error("matrix entry X[{i}][{j}] is not finite")]
    NonFinite { i: usize, j: usize },
    #[error("Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e}, matrix norm {norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64, norm: f64 },
}

/// Selects `P⁺` (and a `+μ|Du|^m` gradient term) or `P⁻` (and `-μ|Du|^m`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    /// `+1.0` for [`Branch::Plus`], `-1.0` for [`Branch::Minus`].
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn flipped(self) -> Branch {
        match self {
            Branch::Plus => Branch::Minus,
            Branch::Minus => Branch::Plus,
        }
    }
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Branch::Plus => f.write_str("plus"),
            Branch::Minus => f.write_str("minus"),
        }
    }
}

/// Ellipticity constants `(λ, Λ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPair", into = "RawPair")]
pub struct PucciPair {
    lambda: f64,
    big_lambda: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPair {
    lambda: f64,
    #[serde(rename = "Lambda")]
    big_lambda: f64,
}

impl TryFrom<RawPair> for PucciPair {
    type Error = PucciError;
    fn try_from(raw: RawPair) -> Result<Self, Self::Error> {
        PucciPair::new(raw.lambda, raw.big_lambda)
    }
}

impl From<PucciPair> for RawPair {
    fn from(p: PucciPair) -> Self {
        RawPair { lambda: p.lambda, big_lambda: p.big_lambda }
    }
}

impl PucciPair {
    pub fn new(lambda: f64, big_lambda: f64) -> Result<Self, PucciError> {
        if !(lambda.is_finite() && big_lambda.is_finite() && lambda > 0.0 && lambda <= big_lambda) {
            return Err(PucciError::InvalidPair { lambda, big_lambda });
        }
        Ok(PucciPair { lambda, big_lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn big_lambda(&self) -> f64 {
        self.big_lambda
    }

    /// `P±(X)`.
    pub fn eval(&self, x: &SymMatrix, branch: Branch) -> Result<f64, PucciError> {
        let eigs = x.eigenvalues()?;
        Ok(self.eval_eigenvalues(&eigs, branch))
    }

    /// `P±` evaluated from a known spectrum.
    pub fn eval_eigenvalues(&self, eigs: &[f64], branch: Branch) -> f64 {
        eigs.iter().map(|&e| self.eval_scalar(e, branch)).sum()
    }

    /// `P±` of the 1×1 matrix `[s]`: `-λs⁺ + Λs⁻` for plus, `-Λs⁺ + λs⁻` for minus.
    #[inline]
    pub fn eval_scalar(&self, s: f64, branch: Branch) -> f64 {
        let (pos, neg) = match branch {
            Branch::Plus => (self.lambda, self.big_lambda),
            Branch::Minus => (self.big_lambda, self.lambda),
        };
        if s > 0.0 {
            -pos * s
        } else {
            -neg * s
        }
    }
}

/// Free-function form of [`PucciPair::eval`].
pub fn pucci_eval(pair: &PucciPair, x: &SymMatrix, branch: Branch) -> Result<f64, PucciError> {
    pair.eval(x, branch)
}

/// A real symmetric `n×n` matrix, `1 ≤ n ≤ 3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymMatrix {
    n: usize,
    a: [[f64; 3]; 3],
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Result<Self, PucciError> {
        check_dim(n)?;
        Ok(SymMatrix { n, a: [[0.0; 3]; 3] })
    }

    /// Builds a matrix from row-major entries; symmetry is checked exactly.
    pub fn from_row_major(n: usize, entries: &[f64]) -> Result<Self, PucciError> {
        check_dim(n)?;
        if entries.len() != n * n {
            return Err(PucciError::EntryCount { n, expected: n * n, got: entries.len() });
        }
        let mut a = [[0.0; 3]; 3];
        for i in 0..n {
            for j in 0..n {
                let v = entries[i * n + j];
                if !v.is_finite() {
                    return Err(PucciError::NonFinite { i, j });
                }
                a[i][j] = v;
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if a[i][j] != a[j][i] {
                    return Err(PucciError::NotSymmetric { i, j, a: a[i][j], b: a[j][i] });
                }
            }
        }
        Ok(SymMatrix { n, a })
    }

    pub fn diag(d: &[f64]) -> Result<Self, PucciError> {
        let n = d.len();
        check_dim(n)?;
        let mut m = SymMatrix::zeros(n)?;
        for (i, &v) in d.iter().enumerate() {
            if !v.is_finite() {
                return Err(PucciError::NonFinite { i, j: i });
            }
            m.a[i][i] = v;
        }
        Ok(m)
    }

    /// `a⊗b + b⊗a`.
    pub fn sym_outer(a: &[f64], b: &[f64]) -> Result<Self, PucciError> {
        let n = a.len();
        check_dim(n)?;
        if b.len() != n {
            return Err(PucciError::EntryCount { n, expected: n, got: b.len() });
        }
        let mut m = SymMatrix::zeros(n)?;
        for i in 0..n {
            for j in 0..n {
                m.a[i][j] = a[i] * b[j] + b[i] * a[j];
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.n && j < self.n, "index ({i},{j}) out of range for n={}", self.n);
        self.a[i][j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.a[i][i]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.a[i][j] * self.a[i][j];
            }
        }
        s.sqrt()
    }

    pub fn scaled(&self, t: f64) -> SymMatrix {
        let mut out = *self;
        for row in out.a.iter_mut() {
            for v in row.iter_mut() {
                *v *= t;
            }
        }
        out
    }

    /// Entrywise sum; panics on a dimension mismatch.
    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.n, other.n, "dimension mismatch");
        let mut out = *self;
        for i in 0..3 {
            for j in 0..3 {
                out.a[i][j] += other.a[i][j];
            }
        }
        out
    }

    pub fn row_major(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n * self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                v.push(self.a[i][j]);
            }
        }
        v
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>, PucciError> {
        let mut eigs = match self.n {
            1 => vec![self.a[0][0]],
            2 => {
                let (a, b, d) = (self.a[0][0], self.a[0][1], self.a[1][1]);
                let mean = 0.5 * (a + d);
                let radius = (0.5 * (a - d)).hypot(b);
                vec![mean - radius, mean + radius]
            }
            3 => jacobi_eigenvalues(self.a)?,
            n => return Err(PucciError::Dimension(n)),
        };
        eigs.sort_by(f64::total_cmp);
        Ok(eigs)
    }
}

fn check_dim(n: usize) -> Result<(), PucciError> {
    if (1..=3).contains(&n) {
        Ok(())
    } else {
        Err(PucciError::Dimension(n))
    }
}

fn jacobi_eigenvalues(mut a: [[f64; 3]; 3]) -> Result<Vec<f64>, PucciError> {
    let norm = a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    let off = |a: &[[f64; 3]; 3]| (2.0 * (a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2])).sqrt();
    if norm == 0.0 {
        return Ok(vec![0.0; 3]);
    }
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off(&a) <= JACOBI_TOLERANCE * norm {
            return Ok(vec![a[0][0], a[1][1], a[2][2]]);
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = a[p][q];
            if apq == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            // A ← Jᵀ A J with the rotation in the (p, q) plane.
            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            a[p][q] = 0.0;
            a[q][p] = 0.0;
        }
    }
    let off_norm = off(&a);
    if off_norm <= JACOBI_TOLERANCE * norm {
        return Ok(vec![a[0][0], a[1][1], a[2][2]]);
    }
    Err(PucciError::NoConvergence { sweeps: JACOBI_MAX_SWEEPS, off_norm, norm })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(l: f64, u: f64) -> PucciPair {
        PucciPair::new(l, u).unwrap()
    }

    /// Brute force over a grid of diagonal A for diagonal X.
    fn diag_grid_extremum(p: &PucciPair, d: &[f64], steps: usize, branch: Branch) -> f64 {
        let vals: Vec<f64> = (0..steps)
            .map(|i| p.lambda() + (p.big_lambda() - p.lambda()) * i as f64 / (steps - 1) as f64)
            .collect();
        let mut best = match branch {
            Branch::Plus => f64::NEG_INFINITY,
            Branch::Minus => f64::INFINITY,
        };
        for &a0 in &vals {
            for &a1 in &vals {
                let v = -(a0 * d[0] + a1 * d[1]);
                best = match branch {
                    Branch::Plus => best.max(v),
                    Branch::Minus => best.min(v),
                };
            }
        }
        best
    }

    #[test]
    fn equal_constants_reduce_to_negative_trace() {
        let p = pair(1.0, 1.0);
        let x = SymMatrix::from_row_major(3, &[1.0, 2.0, -0.5, 2.0, -3.0, 0.25, -0.5, 0.25, 4.0]).unwrap();
        for b in [Branch::Plus, Branch::Minus] {
            assert!((p.eval(&x, b).unwrap() + x.trace()).abs() < 1e-12);
        }
    }

    #[test]
    fn diag_example_matches_grid_oracle() {
        let p = pair(1.0, 2.0);
        let x = SymMatrix::diag(&[1.0, -1.0]).unwrap();
        let plus_oracle = diag_grid_extremum(&p, &[1.0, -1.0], 100, Branch::Plus);
        let minus_oracle = diag_grid_extremum(&p, &[1.0, -1.0], 100, Branch::Minus);
        assert_eq!(plus_oracle, 1.0);
        assert_eq!(minus_oracle, -1.0);
        assert_eq!(p.eval(&x, Branch::Plus).unwrap(), plus_oracle);
        assert_eq!(p.eval(&x, Branch::Minus).unwrap(), minus_oracle);
    }

    #[test]
    fn rejects_asymmetric_and_bad_pairs() {
        assert!(matches!(
            SymMatrix::from_row_major(2, &[1.0, 2.0, 2.5, 1.0]),
            Err(PucciError::NotSymmetric { i: 0, j: 1, .. })
        ));
        assert!(PucciPair::new(2.0, 1.0).is_err());
        assert!(PucciPair::new(0.0, 1.0).is_err());
        assert!(SymMatrix::zeros(4).is_err());
        assert!(SymMatrix::from_row_major(2, &[1.0, f64::NAN, f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn jacobi_handles_already_diagonal_and_repeated_eigenvalues() {
        let x = SymMatrix::diag(&[3.0, -1.0, 3.0]).unwrap();
        assert_eq!(x.eigenvalues().unwrap(), vec![-1.0, 3.0, 3.0]);
        let ones = SymMatrix::from_row_major(3, &[1.0; 9]).unwrap();
        let e = ones.eigenvalues().unwrap();
        assert!(e[0].abs() < 1e-14 && e[1].abs() < 1e-14 && (e[2] - 3.0).abs() < 1e-13);
    }

    #[test]
    fn scalar_convention() {
        let p = pair(1.0, 2.0);
        assert_eq!(p.eval_scalar(2.0, Branch::Plus), -2.0);
        assert_eq!(p.eval_scalar(-2.0, Branch::Plus), 4.0);
        assert_eq!(p.eval_scalar(2.0, Branch::Minus), -4.0);
        assert_eq!(p.eval_scalar(-2.0, Branch::Minus), 2.0);
    }

    #[test]
    fn pair_serde_uses_capital_lambda_and_validates() {
        let p: PucciPair = serde_json::from_str(r#"{"lambda":1.0,"Lambda":2.0}"#).unwrap();
        assert_eq!(p, pair(1.0, 2.0));
        assert!(serde_json::from_str::<PucciPair>(r#"{"lambda":3.0,"Lambda":2.0}"#).is_err());
    }
}
