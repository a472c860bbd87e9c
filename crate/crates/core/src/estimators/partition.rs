//! Greedy slab partition of the time axis by the `L^q` mass of `μ`.

use serde::Serialize;

use super::{EstimateError, EstimateKind, EstimateReport, Verdict};
use crate::grid::norms::RegionWeights;
use crate::grid::GridFunction;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimePartition {
    /// `t₀ < t₁ < … < t_k` on grid time levels.
    pub times: Vec<f64>,
    pub levels: Vec<usize>,
    /// `‖μ‖_{L^q}` of each slab.
    pub slab_norms: Vec<f64>,
    pub k: usize,
    /// `1 + δ̂^{-q}‖μ‖^q_{L^q(Q)}`.
    pub count_bound: f64,
    pub total_norm: f64,
}

/// Splits the grid's time span into maximal slabs with `‖μ‖_{L^q(Ω×slab)} ≤ δ̂`.
///
/// Slab integrals use the trapezoidal rule on time levels and the control-volume
/// weights in space, so constants integrate exactly.
pub fn time_partition(mu: &GridFunction, q: f64, delta_hat: f64) -> Result<(TimePartition, EstimateReport), EstimateError> {
    if !(delta_hat > 0.0 && delta_hat.is_finite()) {
        return Err(EstimateError::Invalid(format!("delta_hat must be positive, got {delta_hat}")));
    }
    if !(q >= 1.0 && q.is_finite()) {
        return Err(EstimateError::Invalid(format!("q must be finite and at least 1, got {q}")));
    }
    let grid = mu.grid();
    let weights = RegionWeights::new(grid, &grid.cube())?;
    let dt = grid.dt();
    let slice: Vec<f64> = (0..=grid.nt())
        .map(|k| {
            let layer = mu.layer(k);
            weights.space.iter().map(|&(idx, w)| w * layer[idx].abs().powf(q)).sum()
        })
        .collect();
    let budget = delta_hat.powf(q);
    let tol = 1e-12 * budget;
    let mass = |a: usize, b: usize| -> f64 {
        let inner: f64 = slice[a + 1..b].iter().sum();
        dt * (inner + 0.5 * (slice[a] + slice[b]))
    };
    let total = mass(0, grid.nt());
    let mut levels = vec![0];
    let mut norms = Vec::new();
    let mut a = 0;
    while a < grid.nt() {
        let first = mass(a, a + 1);
        if first > budget + tol {
            return Err(EstimateError::SingularSlice { level: a, time: grid.time(a), norm: first.powf(1.0 / q), delta_hat });
        }
        let mut b = a + 1;
        while b < grid.nt() && mass(a, b + 1) <= budget + tol {
            b += 1;
        }
        norms.push(mass(a, b).powf(1.0 / q));
        levels.push(b);
        a = b;
    }
    let k = norms.len();
    let count_bound = 1.0 + total / budget;
    let part = TimePartition {
        times: levels.iter().map(|&l| grid.time(l)).collect(),
        levels,
        slab_norms: norms,
        k,
        count_bound,
        total_norm: total.powf(1.0 / q),
    };
    let mut r = EstimateReport::new(EstimateKind::Partition, format!("q={q} delta_hat={delta_hat}"));
    r.set("k", k as f64);
    r.set("count_bound", count_bound);
    r.set("mu_norm", part.total_norm);
    r.verdict = if (k as f64) <= count_bound + 1e-9 {
        Verdict::pass(format!("k = {k} <= {count_bound}"))
    } else {
        Verdict::fail(format!("k = {k} exceeds the count bound {count_bound}"))
    };
    Ok((part, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpaceTimeGrid;

    fn unit_mu(nt: usize, c: f64) -> GridFunction {
        GridFunction::constant(SpaceTimeGrid::new(1, &[0.0], 1.0, 0.0, 1.0, 9, nt).unwrap(), c).unwrap()
    }

    #[test]
    fn constant_mu_two_slabs() {
        let (p, r) = time_partition(&unit_mu(64, 1.0), 4.0, 1.0).unwrap();
        assert_eq!(p.k, 2);
        assert_eq!(p.times, vec![0.0, 0.5, 1.0]);
        assert!(r.verdict.passed);
    }

    #[test]
    fn large_delta_gives_one_slab() {
        let (p, _) = time_partition(&unit_mu(64, 1.0), 4.0, 2f64.powf(0.25)).unwrap();
        assert_eq!(p.k, 1);
    }

    #[test]
    fn halving_delta_scales_k_by_two_to_the_q() {
        let (p, r) = time_partition(&unit_mu(256, 1.0), 4.0, 0.5).unwrap();
        assert_eq!(p.k, 32);
        assert!(r.verdict.passed);
    }

    #[test]
    fn singular_slice_is_named() {
        match time_partition(&unit_mu(4, 100.0), 2.0, 1.0) {
            Err(EstimateError::SingularSlice { level: 0, .. }) => {}
            other => panic!("{other:?}"),
        }
    }
}
