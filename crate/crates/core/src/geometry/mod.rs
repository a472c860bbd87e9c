//! Parabolic cube calculus: the fixed catalog, dyadic trees, growing cube
//! chains, paraboloid envelopes and parabolic scaling maps.

mod cube;
mod dyadic;
mod scaling;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::Serialize;
use thiserror::Error;

pub use cube::ParabolicCube;
pub(crate) use cube::{pow_int, ratio};
pub(crate) use dyadic::stack_of;
pub use dyadic::{stacked_predecessor, DyadicCube};
pub use scaling::{apply_scaling, transform_spec, ScalingMap};

/// Exact rational coordinate type.
pub type Exact = num_rational::BigRational;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("unsupported dimension {0} (expected 1, 2 or 3)")]
    Dimension(usize),
    #[error("cube must have positive half-width and depth")]
    Degenerate,
    #[error("non-finite coordinate {0}")]
    NonFinite(f64),
    #[error("level-1 dyadic cubes have no predecessor inside K1")]
    NoPredecessor,
    #[error("invalid window ({0}, {1}]")]
    Window(f64, f64),
    #[error("scaled image leaves the source domain at corners {0:?}")]
    ImageOutside(Vec<(Vec<f64>, f64)>),
    #[error("grid error: {0}")]
    Grid(String),
}

/// Exact rational value of a finite float.
pub fn exact(v: f64) -> Result<Exact, GeometryError> {
    Exact::from_float(v).ok_or(GeometryError::NonFinite(v))
}

pub(crate) fn int(v: i64) -> Exact {
    Exact::from_integer(BigInt::from(v))
}

/// The named cubes used by the estimates.
#[derive(Clone, Debug, Serialize)]
pub struct Catalog {
    pub n: usize,
    /// `(-10,10)^n × (0,10]`
    pub q: ParabolicCube,
    /// `(-1,1)^n × (0,1/2]`
    pub j1: ParabolicCube,
    /// `(-1,1)^n × (9,10]`
    pub j2: ParabolicCube,
    /// `(-1/2,1/2)^n × (1/4,1/2]`
    pub j3: ParabolicCube,
    /// `(-1,1)^n × (0,1]`
    pub k1: ParabolicCube,
    /// `(-3,3)^n × (1,10]`
    pub k2: ParabolicCube,
    /// `(-1/2,1/2)^n × (0,1/4]`
    pub k_quarter: ParabolicCube,
}

impl Catalog {
    /// `Q_r = (-10r,10r)^n × (10-10r², 10]`.
    pub fn q_r(&self, r: f64) -> Result<ParabolicCube, GeometryError> {
        let r = exact(r)?;
        if !r.is_positive() {
            return Err(GeometryError::Degenerate);
        }
        let ten = int(10);
        Ok(ParabolicCube::centered(self.n, &ten * &r, &ten - &ten * &r * &r, ten))
    }

    /// `σK₁ = (-σ,σ)^n × (0,σ²]`.
    pub fn sigma_k1(&self, sigma: f64) -> Result<ParabolicCube, GeometryError> {
        let s = exact(sigma)?;
        if !s.is_positive() {
            return Err(GeometryError::Degenerate);
        }
        Ok(ParabolicCube::centered(self.n, s.clone(), Exact::zero(), &s * &s))
    }

    pub fn named(&self) -> [(&'static str, &ParabolicCube); 7] {
        [
            ("Q", &self.q),
            ("J1", &self.j1),
            ("J2", &self.j2),
            ("J3", &self.j3),
            ("K1", &self.k1),
            ("K2", &self.k2),
            ("K1/4", &self.k_quarter),
        ]
    }
}

pub fn make_catalog(n: usize) -> Result<Catalog, GeometryError> {
    if !(1..=3).contains(&n) {
        return Err(GeometryError::Dimension(n));
    }
    let c = |r: Exact, lo: Exact, hi: Exact| ParabolicCube::centered(n, r, lo, hi);
    Ok(Catalog {
        n,
        q: c(int(10), int(0), int(10)),
        j1: c(int(1), int(0), ratio(1, 2)),
        j2: c(int(1), int(9), int(10)),
        j3: c(ratio(1, 2), ratio(1, 4), ratio(1, 2)),
        k1: c(int(1), int(0), int(1)),
        k2: c(int(3), int(1), int(10)),
        k_quarter: c(ratio(1, 2), int(0), ratio(1, 4)),
    })
}

/// `N_ℓ = (x₀, t₀ + (9^ℓ-1)/8 · 4^{-j}) + (3^ℓ/2^j)·K₁`.
pub fn growing_cube(x0: &[f64], t0: f64, j: u32, ell: u32) -> Result<ParabolicCube, GeometryError> {
    let center = x0.iter().map(|&v| exact(v)).collect::<Result<Vec<_>, _>>()?;
    let four_j = pow_int(4, j);
    let half = pow_int(3, ell) / pow_int(2, j);
    let depth = pow_int(9, ell) / &four_j;
    let bottom = exact(t0)? + (pow_int(9, ell) - int(1)) / int(8) / &four_j;
    let top = &bottom + &depth;
    ParabolicCube::new(center, half, top, depth)
}

/// The chain `N_1, N_2, …` truncated at the first cube lying entirely above `t = 10`.
pub fn growing_chain(x0: &[f64], t0: f64, j: u32) -> Result<Vec<ParabolicCube>, GeometryError> {
    let ten = int(10);
    let mut out = Vec::new();
    for ell in 1.. {
        let c = growing_cube(x0, t0, j, ell)?;
        if c.t_bottom() >= ten {
            break;
        }
        out.push(c);
    }
    Ok(out)
}

/// Membership in `Γ_∞ = ∪_ℓ N_ℓ` for the chain anchored at `(x₀, t₀)` and level `j`.
pub fn gamma_membership(x: &[f64], t: f64, x0: &[f64], t0: f64, j: u32) -> Result<bool, GeometryError> {
    let s = exact(t)? - exact(t0)?;
    let four_j = pow_int(4, j);
    // N_ℓ occupies times (a_ℓ, a_{ℓ+1}] with a_ℓ = (9^ℓ-1)/8 · 4^{-j}; these tile (4^{-j}, ∞).
    let mut ell = 1u32;
    loop {
        let hi = (pow_int(9, ell + 1) - int(1)) / int(8) / &four_j;
        if s <= hi {
            break;
        }
        ell += 1;
    }
    let lo = (pow_int(9, ell) - int(1)) / int(8) / &four_j;
    if s <= lo {
        return Ok(false);
    }
    let half = pow_int(3, ell) / pow_int(2, j);
    for (xi, ci) in x.iter().zip(x0) {
        if (exact(*xi)? - exact(*ci)?).abs() >= half {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Paraboloid {
    /// `t > 2^{-3}(9|x|²_∞ - 4^{-j})`
    SMinus,
    /// `t > 2^{-3}(|x|²_∞ - 4^{-j})`
    SPlus,
}

/// Membership of `(x, t)` in `(x₀, t₀) + S^∓_{α,β}`, decided in exact arithmetic.
pub fn paraboloid_membership(
    x: &[f64],
    t: f64,
    j: u32,
    x0: &[f64],
    t0: f64,
    kind: Paraboloid,
    window: (f64, f64),
) -> Result<bool, GeometryError> {
    let (alpha, beta) = window;
    if !(alpha >= 0.0 && alpha < beta) {
        return Err(GeometryError::Window(alpha, beta));
    }
    let s = exact(t)? - exact(t0)?;
    if s <= exact(alpha)? {
        return Ok(false);
    }
    if beta.is_finite() && s > exact(beta)? {
        return Ok(false);
    }
    let mut sup = Exact::zero();
    for (xi, ci) in x.iter().zip(x0) {
        let d = (exact(*xi)? - exact(*ci)?).abs();
        if d > sup {
            sup = d;
        }
    }
    let c = match kind {
        Paraboloid::SMinus => int(9),
        Paraboloid::SPlus => int(1),
    };
    let bound = (c * &sup * &sup - int(1) / pow_int(4, j)) / int(8);
    Ok(s > bound)
}
