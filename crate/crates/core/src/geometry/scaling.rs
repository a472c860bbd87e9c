//! Parabolic rescalings `w(x,t) = a · u(x₀ + r x, t₀ + r²(t - t_ref))`.

use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::equation::{Coefficient, EquationSpec, Field, MuShape};
use crate::grid::{GridFunction, SpaceTimeGrid};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingMap {
    pub center: Vec<f64>,
    pub t0: f64,
    pub r: f64,
    pub amplitude: f64,
    /// Target time that maps to `t0`.
    pub t_ref: f64,
}

impl ScalingMap {
    pub fn new(center: Vec<f64>, t0: f64, r: f64, amplitude: f64, t_ref: f64) -> Result<Self, GeometryError> {
        for v in center.iter().chain([&t0, &r, &amplitude, &t_ref]) {
            if !v.is_finite() {
                return Err(GeometryError::NonFinite(*v));
            }
        }
        if !(r > 0.0 && amplitude > 0.0) {
            return Err(GeometryError::Degenerate);
        }
        Ok(ScalingMap { center, t0, r, amplitude, t_ref })
    }

    pub fn identity(n: usize) -> Self {
        ScalingMap { center: vec![0.0; n], t0: 0.0, r: 1.0, amplitude: 1.0, t_ref: 0.0 }
    }

    /// Source point of the target point `(x, t)`.
    pub fn image(&self, x: &[f64], t: f64) -> (Vec<f64>, f64) {
        let y = x.iter().zip(&self.center).map(|(xi, ci)| ci + self.r * xi).collect();
        (y, self.t0 + self.r * self.r * (t - self.t_ref))
    }

    /// The map `w ↦ other(self(w))`: first rescale by `self`, then by `other`.
    pub fn then(&self, other: &ScalingMap) -> ScalingMap {
        let center = self.center.iter().zip(&other.center).map(|(c1, c2)| c1 + self.r * c2).collect();
        ScalingMap {
            center,
            t0: self.t0 + self.r * self.r * (other.t0 - self.t_ref),
            r: self.r * other.r,
            amplitude: self.amplitude * other.amplitude,
            t_ref: other.t_ref,
        }
    }
}

/// Samples `a · u ∘ map` on `target`, interpolating multilinearly between source nodes.
pub fn apply_scaling(map: &ScalingMap, u: &GridFunction, target: &SpaceTimeGrid) -> Result<GridFunction, GeometryError> {
    let n = target.n();
    if map.center.len() != n || u.grid().n() != n {
        return Err(GeometryError::Dimension(n));
    }
    let src = u.grid().cube();
    let outside: Vec<(Vec<f64>, f64)> = target
        .cube()
        .corners()
        .into_iter()
        .filter(|(x, t)| {
            let (y, s) = map.image(x, *t);
            u.interpolate(&y, s).is_none() || !src.contains_closed(&y, s)
        })
        .collect();
    if !outside.is_empty() {
        return Err(GeometryError::ImageOutside(outside));
    }
    GridFunction::from_fn(target.clone(), |x, t| {
        let (y, s) = map.image(x, t);
        u.interpolate(&y, s).map(|v| map.amplitude * v).unwrap_or(f64::NAN)
    })
    .map_err(|e| GeometryError::Grid(e.to_string()))
}

/// Coefficients of the equation solved by `w` when `u` solves `spec`:
/// `μ̃ = r^{2-m} a^{1-m} μ ∘ map` and `f̃ = a r² f ∘ map`.
pub fn transform_spec(map: &ScalingMap, spec: &EquationSpec) -> EquationSpec {
    let (r, a, m) = (map.r, map.amplitude, spec.m);
    let mu_factor = r.powf(2.0 - m) * a.powf(1.0 - m);
    let mu = match spec.mu.shape() {
        MuShape::Constant(c) => Coefficient::constant(mu_factor * c),
        MuShape::PowerSingularity { center, center_time, exponent, scale } => {
            // d(x₀ + r y - c, t₀ + r²(s - t_ref) - c_t) = r · d(y - y*, s - s*)
            let y: Vec<f64> = center.iter().zip(&map.center).map(|(c, x0)| (c - x0) / r).collect();
            let s = map.t_ref + (center_time - map.t0) / (r * r);
            Coefficient::power_singularity(y, s, *exponent, mu_factor * scale * r.powf(-exponent))
        }
        MuShape::Sampled(_) => {
            let (inner, mm) = (spec.mu.clone(), map.clone());
            Coefficient::from_field(Field::new(format!("scaled({})", spec.mu.describe()), move |x, t| {
                let (y, s) = mm.image(x, t);
                mu_factor * inner.eval(&y, s)
            }))
        }
    };
    let mu = match (spec.mu.cap(), mu.shape()) {
        (Some(c), MuShape::Constant(_)) | (Some(c), MuShape::PowerSingularity { .. }) => mu.with_cap(mu_factor * c),
        _ => mu,
    };
    let (f, mm) = (spec.f.clone(), map.clone());
    let f_new = Field::new(format!("scaled({})", spec.f.label()), move |x, t| {
        let (y, s) = mm.image(x, t);
        a * r * r * f.eval(&y, s)
    });
    EquationSpec { mu, f: f_new, ..spec.clone() }
}
