use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::{exact, Exact, GeometryError};

/// `center + (-r, r)^n × (t_top - depth, t_top]`, with exact rational coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct ParabolicCube {
    center: Vec<Exact>,
    half_width: Exact,
    t_top: Exact,
    depth: Exact,
    approx: Approx,
}

#[derive(Clone, Debug, PartialEq)]
struct Approx {
    center: Vec<f64>,
    half_width: f64,
    t_lo: f64,
    t_hi: f64,
}

impl ParabolicCube {
    pub fn new(center: Vec<Exact>, half_width: Exact, t_top: Exact, depth: Exact) -> Result<Self, GeometryError> {
        if !(1..=3).contains(&center.len()) {
            return Err(GeometryError::Dimension(center.len()));
        }
        if !half_width.is_positive() || !depth.is_positive() {
            return Err(GeometryError::Degenerate);
        }
        let approx = Approx {
            center: center.iter().map(to_f64).collect(),
            half_width: to_f64(&half_width),
            t_lo: to_f64(&(&t_top - &depth)),
            t_hi: to_f64(&t_top),
        };
        Ok(ParabolicCube { center, half_width, t_top, depth, approx })
    }

    /// Exact cube from floating-point data (every finite `f64` is a dyadic rational).
    pub fn from_f64(center: &[f64], half_width: f64, t_top: f64, depth: f64) -> Result<Self, GeometryError> {
        let c = center.iter().map(|&v| exact(v)).collect::<Result<Vec<_>, _>>()?;
        ParabolicCube::new(c, exact(half_width)?, exact(t_top)?, exact(depth)?)
    }

    /// `(-r, r)^n × (t_lo, t_hi]`.
    pub(crate) fn centered(n: usize, r: Exact, t_lo: Exact, t_hi: Exact) -> Self {
        let depth = &t_hi - &t_lo;
        ParabolicCube::new(vec![Exact::zero(); n], r, t_hi, depth).expect("catalog cube")
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[Exact] {
        &self.center
    }

    pub fn half_width(&self) -> &Exact {
        &self.half_width
    }

    pub fn t_top(&self) -> &Exact {
        &self.t_top
    }

    pub fn depth(&self) -> &Exact {
        &self.depth
    }

    pub fn t_bottom(&self) -> Exact {
        &self.t_top - &self.depth
    }

    pub fn center_f64(&self) -> &[f64] {
        &self.approx.center
    }

    pub fn half_width_f64(&self) -> f64 {
        self.approx.half_width
    }

    pub fn t_lo_f64(&self) -> f64 {
        self.approx.t_lo
    }

    pub fn t_hi_f64(&self) -> f64 {
        self.approx.t_hi
    }

    pub fn lo_f64(&self, axis: usize) -> f64 {
        self.approx.center[axis] - self.approx.half_width
    }

    pub fn hi_f64(&self, axis: usize) -> f64 {
        self.approx.center[axis] + self.approx.half_width
    }

    /// `(2r)^n · depth`, exact.
    pub fn measure(&self) -> Exact {
        let side = &self.half_width * Exact::from_integer(2.into());
        let mut m = self.depth.clone();
        for _ in 0..self.dim() {
            m *= &side;
        }
        m
    }

    pub fn measure_f64(&self) -> f64 {
        to_f64(&self.measure())
    }

    /// Membership in the cube itself (open in space, half-open in time).
    pub fn contains(&self, x: &[f64], t: f64) -> bool {
        let a = &self.approx;
        t > a.t_lo
            && t <= a.t_hi
            && x.iter().zip(&a.center).all(|(xi, ci)| (xi - ci).abs() < a.half_width)
    }

    /// Membership in the closure.
    pub fn contains_closed(&self, x: &[f64], t: f64) -> bool {
        let a = &self.approx;
        t >= a.t_lo
            && t <= a.t_hi
            && x.iter().zip(&a.center).all(|(xi, ci)| (xi - ci).abs() <= a.half_width)
    }

    /// Exact membership test for a rational point.
    pub fn contains_exact(&self, x: &[Exact], t: &Exact) -> bool {
        t > &self.t_bottom()
            && t <= &self.t_top
            && x.iter().zip(&self.center).all(|(xi, ci)| (xi - ci).abs() < self.half_width)
    }

    /// Exact inclusion `self ⊂ other`.
    pub fn is_subset_of(&self, other: &ParabolicCube) -> bool {
        if self.dim() != other.dim() {
            return false;
        }
        let space = self.center.iter().zip(&other.center).all(|(a, b)| {
            &(a - &self.half_width) >= &(b - &other.half_width) && &(a + &self.half_width) <= &(b + &other.half_width)
        });
        space && self.t_bottom() >= other.t_bottom() && self.t_top <= other.t_top
    }

    /// Whether the two cubes share a set of positive measure.
    pub fn intersects(&self, other: &ParabolicCube) -> bool {
        if self.dim() != other.dim() {
            return false;
        }
        let space = self.center.iter().zip(&other.center).all(|(a, b)| {
            (a - b).abs() < &self.half_width + &other.half_width
        });
        space && self.t_bottom() < other.t_top && other.t_bottom() < self.t_top
    }

    /// The part of the cube at times `≤ t_max`, if nonempty.
    pub fn truncated_above(&self, t_max: &Exact) -> Option<ParabolicCube> {
        let bottom = self.t_bottom();
        if &bottom >= t_max {
            return None;
        }
        let top = if &self.t_top > t_max { t_max.clone() } else { self.t_top.clone() };
        let depth = &top - &bottom;
        ParabolicCube::new(self.center.clone(), self.half_width.clone(), top, depth).ok()
    }

    /// The `2^{n+1}` corners of the closure, as `(x, t)` pairs.
    pub fn corners(&self) -> Vec<(Vec<f64>, f64)> {
        let n = self.dim();
        let mut out = Vec::with_capacity(1 << (n + 1));
        for mask in 0..(1usize << (n + 1)) {
            let x = (0..n)
                .map(|i| if mask >> i & 1 == 1 { self.hi_f64(i) } else { self.lo_f64(i) })
                .collect();
            let t = if mask >> n & 1 == 1 { self.approx.t_hi } else { self.approx.t_lo };
            out.push((x, t));
        }
        out
    }

    /// Translate by `(dx, dt)`.
    pub fn translated(&self, dx: &[Exact], dt: &Exact) -> ParabolicCube {
        let center = self.center.iter().zip(dx).map(|(c, d)| c + d).collect();
        ParabolicCube::new(center, self.half_width.clone(), &self.t_top + dt, self.depth.clone()).expect("translate")
    }
}

impl Serialize for ParabolicCube {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        CubeRecord {
            center: self.approx.center.clone(),
            half_width: self.approx.half_width,
            t_top: self.approx.t_hi,
            depth: to_f64(&self.depth),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ParabolicCube {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = CubeRecord::deserialize(d)?;
        ParabolicCube::from_f64(&r.center, r.half_width, r.t_top, r.depth).map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct CubeRecord {
    center: Vec<f64>,
    half_width: f64,
    t_top: f64,
    depth: f64,
}

pub(crate) fn to_f64(v: &Exact) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

pub(crate) fn ratio(num: i64, den: i64) -> Exact {
    Exact::new(num.into(), den.into())
}

pub(crate) fn pow_int(base: i64, e: u32) -> Exact {
    let mut v = Exact::one();
    let b = Exact::from_integer(base.into());
    for _ in 0..e {
        v *= &b;
    }
    v
}
