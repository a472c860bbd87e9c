//! Coefficient and data fields built from scenario tables.
//!
//! Random fields draw from fixed sub-streams of the scenario seed so that
//! adding a random `f` never perturbs a random `μ`.

use pucci_lab::grid::expr::Expr;
use pucci_lab::{Coefficient, Field, SeededRng};

use crate::scenario::{FieldConfig, MuConfig};

pub const STREAM_MU: u64 = 0;
pub const STREAM_F: u64 = 1;
pub const STREAM_BOUNDARY: u64 = 2;
pub const STREAM_CZ: u64 = 3;

/// Spatial box `center ± half_width` times `[t_lo, t_hi]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    pub center: Vec<f64>,
    pub half_width: f64,
    pub t_lo: f64,
    pub t_hi: f64,
}

impl Domain {
    pub fn new(n: usize, half_width: f64, t_lo: f64, t_hi: f64) -> Self {
        Domain { center: vec![0.0; n], half_width, t_lo, t_hi }
    }

    pub fn n(&self) -> usize {
        self.center.len()
    }
}

#[derive(Clone, Debug)]
struct Bump {
    center: Vec<f64>,
    time: f64,
    weight: f64,
}

/// Sum of `count` nonnegative Gaussian bumps `w_k exp(-(|x-c_k|² + (t-τ_k)²)/(2 width²))`
/// with centers uniform in the domain and weights uniform in `[0, amplitude)`.
pub fn random_bumps(domain: &Domain, count: usize, amplitude: f64, width: Option<f64>, rng: &mut SeededRng) -> Field {
    let width = width.unwrap_or(0.25 * domain.half_width);
    let bumps: Vec<Bump> = (0..count)
        .map(|_| {
            let center = domain.center.iter().map(|c| rng.uniform(c - domain.half_width, c + domain.half_width)).collect();
            let time = rng.uniform(domain.t_lo, domain.t_hi);
            let weight = rng.uniform(0.0, amplitude);
            Bump { center, time, weight }
        })
        .collect();
    let inv = 1.0 / (2.0 * width * width);
    Field::new(format!("random_bumps(count={count}, amplitude={amplitude}, width={width})"), move |x, t| {
        bumps
            .iter()
            .map(|b| {
                let r2: f64 = x.iter().zip(&b.center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>() + (t - b.time) * (t - b.time);
                b.weight * (-r2 * inv).exp()
            })
            .sum()
    })
}

/// Piecewise-constant nonnegative data on a `pieces^(n+1)` lattice of the domain.
pub fn rough_steps(domain: &Domain, pieces: usize, amplitude: f64, rng: &mut SeededRng) -> Field {
    let n = domain.n();
    let cells = pieces.pow(n as u32 + 1);
    let values: Vec<f64> = (0..cells).map(|_| rng.uniform(0.0, amplitude)).collect();
    let d = domain.clone();
    Field::new(format!("rough_steps(pieces={pieces}, amplitude={amplitude})"), move |x, t| {
        let cell = |v: f64, lo: f64, len: f64| (((v - lo) / len * pieces as f64).floor().max(0.0) as usize).min(pieces - 1);
        let mut idx = cell(t, d.t_lo, d.t_hi - d.t_lo);
        for (a, xa) in x.iter().enumerate() {
            idx = idx * pieces + cell(*xa, d.center[a] - d.half_width, 2.0 * d.half_width);
        }
        values[idx]
    })
}

pub fn build_field(cfg: &FieldConfig, domain: &Domain, seed: u64, stream: u64) -> Field {
    let mut rng = SeededRng::stream(seed, stream);
    match cfg {
        FieldConfig::Zero => Field::zero(),
        FieldConfig::Constant { value } => Field::constant(*value),
        FieldConfig::Expr { expr } => Expr::parse(expr).expect("validated at parse time").into_field(),
        FieldConfig::RandomBumps { count, amplitude, width } => random_bumps(domain, *count, *amplitude, *width, &mut rng),
        FieldConfig::RoughSteps { pieces, amplitude } => rough_steps(domain, *pieces, *amplitude, &mut rng),
    }
}

pub fn build_mu(cfg: &MuConfig, domain: &Domain, seed: u64) -> Coefficient {
    match cfg {
        MuConfig::Constant { value } if *value == 0.0 => Coefficient::zero(),
        MuConfig::Constant { value } => Coefficient::constant(*value),
        MuConfig::PowerSingularity { center, center_time, exponent, scale, cap } => {
            let c = Coefficient::power_singularity(center.clone(), *center_time, *exponent, *scale);
            match cap {
                Some(cap) => c.with_cap(*cap),
                None => c,
            }
        }
        MuConfig::RandomBumps { count, amplitude, width } => {
            let mut rng = SeededRng::stream(seed, STREAM_MU);
            Coefficient::from_field(random_bumps(domain, *count, *amplitude, *width, &mut rng))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bumps_are_seeded_and_nonnegative() {
        let d = Domain::new(1, 1.0, 0.0, 1.0);
        let cfg = FieldConfig::RandomBumps { count: 5, amplitude: 2.0, width: None };
        let a = build_field(&cfg, &d, 11, STREAM_F);
        let b = build_field(&cfg, &d, 11, STREAM_F);
        let c = build_field(&cfg, &d, 12, STREAM_F);
        for i in 0..50 {
            let x = [-1.0 + 0.04 * i as f64];
            assert_eq!(a.eval(&x, 0.3).to_bits(), b.eval(&x, 0.3).to_bits());
            assert!(a.eval(&x, 0.3) >= 0.0);
        }
        assert_ne!(a.eval(&[0.1], 0.5), c.eval(&[0.1], 0.5));
    }

    #[test]
    fn streams_are_independent() {
        let d = Domain::new(1, 1.0, 0.0, 1.0);
        let cfg = FieldConfig::RandomBumps { count: 3, amplitude: 1.0, width: None };
        let f = build_field(&cfg, &d, 5, STREAM_F);
        let g = build_field(&cfg, &d, 5, STREAM_BOUNDARY);
        assert_ne!(f.eval(&[0.0], 0.5), g.eval(&[0.0], 0.5));
    }

    #[test]
    fn rough_steps_are_piecewise_constant() {
        let d = Domain::new(1, 1.0, 0.0, 1.0);
        let mut rng = SeededRng::new(3);
        let f = rough_steps(&d, 4, 1.0, &mut rng);
        assert_eq!(f.eval(&[-0.9], 0.1), f.eval(&[-0.6], 0.2));
        assert!((0.0..1.0).contains(&f.eval(&[1.0], 1.0)));
    }
}
