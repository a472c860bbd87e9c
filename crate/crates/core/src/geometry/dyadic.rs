use serde::{Deserialize, Serialize};

use super::{int, pow_int, Exact, GeometryError, ParabolicCube};

/// A dyadic cube of `K₁ = (-1,1)^n × (0,1]`.
///
/// At level `k` the cube with space index `a` and time index `j` is
/// `Π_i (-1 + a_i·2^{1-k}, -1 + (a_i+1)·2^{1-k}) × (j·4^{-k}, (j+1)·4^{-k}]`
/// with `0 ≤ a_i < 2^k` and `0 ≤ j < 4^k`. Level 0 is `K₁` itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicCube {
    pub n: u8,
    pub level: u32,
    pub space: [u64; 3],
    pub time: u64,
}

impl DyadicCube {
    pub fn root(n: usize) -> Result<Self, GeometryError> {
        if !(1..=3).contains(&n) {
            return Err(GeometryError::Dimension(n));
        }
        Ok(DyadicCube { n: n as u8, level: 0, space: [0; 3], time: 0 })
    }

    pub fn new(n: usize, level: u32, space: &[u64], time: u64) -> Result<Self, GeometryError> {
        if !(1..=3).contains(&n) || space.len() != n {
            return Err(GeometryError::Dimension(n));
        }
        let side = 1u64 << level;
        if space.iter().any(|&a| a >= side) || time >= 1u64 << (2 * level) {
            return Err(GeometryError::Degenerate);
        }
        let mut s = [0; 3];
        s[..n].copy_from_slice(space);
        Ok(DyadicCube { n: n as u8, level, space: s, time })
    }

    pub fn dim(&self) -> usize {
        self.n as usize
    }

    /// The `2^{n+2}` cubes of the first generation.
    pub fn first_generation(n: usize) -> Result<Vec<DyadicCube>, GeometryError> {
        Ok(DyadicCube::root(n)?.children())
    }

    /// The `2^{n+2}` children at level `k+1`, ordered time-major then lexicographically in space.
    pub fn children(&self) -> Vec<DyadicCube> {
        let n = self.dim();
        let mut out = Vec::with_capacity(1 << (n + 2));
        for dt in 0..4u64 {
            for mask in 0..(1usize << n) {
                let mut space = [0u64; 3];
                for i in 0..n {
                    // First axis is the most significant bit of the mask.
                    let bit = (mask >> (n - 1 - i) & 1) as u64;
                    space[i] = 2 * self.space[i] + bit;
                }
                out.push(DyadicCube { n: self.n, level: self.level + 1, space, time: 4 * self.time + dt });
            }
        }
        out
    }

    pub fn parent(&self) -> Option<DyadicCube> {
        if self.level == 0 {
            return None;
        }
        let mut space = [0u64; 3];
        for i in 0..self.dim() {
            space[i] = self.space[i] / 2;
        }
        Some(DyadicCube { n: self.n, level: self.level - 1, space, time: self.time / 4 })
    }

    /// Exact `2^{n(1-k)} · 4^{-k}`.
    pub fn measure(&self) -> Exact {
        let k = self.level;
        pow_int(2, self.dim() as u32) / pow_int(2, self.dim() as u32 * k) / pow_int(4, k)
    }

    pub fn to_cube(&self) -> ParabolicCube {
        let k = self.level;
        let side = int(2) / pow_int(2, k);
        let half = &side / int(2);
        let center = (0..self.dim())
            .map(|i| int(-1) + int(self.space[i] as i64) * &side + &half)
            .collect();
        let depth = int(1) / pow_int(4, k);
        let top = int(self.time as i64 + 1) * &depth;
        ParabolicCube::new(center, half, top, depth).expect("dyadic cube")
    }

    /// Half-open index ranges of the level-`res` cells covering this cube:
    /// `(space ranges, time range)`.
    pub fn cell_ranges(&self, res: u32) -> ([(u64, u64); 3], (u64, u64)) {
        assert!(res >= self.level);
        let s = 1u64 << (res - self.level);
        let mut space = [(0, 0); 3];
        for i in 0..self.dim() {
            space[i] = (self.space[i] * s, (self.space[i] + 1) * s);
        }
        let tt = 1u64 << (2 * (res - self.level));
        (space, (self.time * tt, (self.time + 1) * tt))
    }
}

/// `L̃^m = J × (τ + 4^{1-k}, τ + 4^{1-k}(m+1)]` where `L̃ = J × (τ, τ + 4^{1-k}]` is the predecessor of `L`.
pub fn stacked_predecessor(l: &DyadicCube, m: u32) -> Result<ParabolicCube, GeometryError> {
    if l.level < 2 {
        return Err(GeometryError::NoPredecessor);
    }
    Ok(stack_of(l, m))
}

/// As [`stacked_predecessor`], with `K₁` serving as the predecessor of the first generation.
pub(crate) fn stack_of(l: &DyadicCube, m: u32) -> ParabolicCube {
    let p = l.parent().expect("level ≥ 1").to_cube();
    let d = p.depth().clone();
    let top = p.t_top() + &d * int(m as i64);
    ParabolicCube::new(p.center().to_vec(), p.half_width().clone(), top, d * int(m as i64)).expect("stack")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_catalog, ratio};

    #[test]
    fn first_generation_counts() {
        assert_eq!(DyadicCube::first_generation(1).unwrap().len(), 8);
        let g2 = DyadicCube::first_generation(2).unwrap();
        assert_eq!(g2.len(), 16);
        let k1 = make_catalog(2).unwrap().k1;
        let total: Exact = g2.iter().map(|c| c.measure()).sum();
        assert_eq!(total, k1.measure());
        for c in &g2 {
            assert!(c.to_cube().is_subset_of(&k1));
            assert_eq!(c.to_cube().measure(), c.measure());
        }
    }

    #[test]
    fn children_partition_parent() {
        for n in 1..=3 {
            let root = DyadicCube::root(n).unwrap();
            for parent in root.children().into_iter().take(5).flat_map(|c| c.children()) {
                let kids = parent.children();
                assert_eq!(kids.len(), 1 << (n + 2));
                let sum: Exact = kids.iter().map(|c| c.measure()).sum();
                assert_eq!(sum, parent.measure());
                for (i, a) in kids.iter().enumerate() {
                    assert_eq!(a.parent(), Some(parent));
                    assert!(a.to_cube().is_subset_of(&parent.to_cube()));
                    for b in &kids[i + 1..] {
                        assert!(!a.to_cube().intersects(&b.to_cube()));
                    }
                }
            }
        }
    }

    #[test]
    fn stacked_predecessor_examples() {
        // Level 2 cube whose predecessor is (-1,0) × (0,1/4].
        let l = DyadicCube::new(1, 2, &[1], 2).unwrap();
        let s = stacked_predecessor(&l, 2).unwrap();
        assert_eq!(s.t_bottom(), ratio(1, 4));
        assert_eq!(s.t_top(), &ratio(3, 4));
        let pred = l.parent().unwrap().to_cube();
        assert_eq!(s.center(), pred.center());
        assert_eq!(s.half_width(), pred.half_width());

        let s1 = stacked_predecessor(&l, 1).unwrap();
        assert_eq!(s1.measure(), pred.measure());
        assert_eq!(s1.t_bottom(), pred.t_top().clone());

        for m in 1..=36 {
            assert_eq!(stacked_predecessor(&l, m).unwrap().measure(), pred.measure() * int(m as i64));
        }
        let first = DyadicCube::new(1, 1, &[0], 0).unwrap();
        assert_eq!(stacked_predecessor(&first, 1), Err(GeometryError::NoPredecessor));
    }

    #[test]
    fn cell_ranges_match_geometry() {
        let c = DyadicCube::new(2, 1, &[1, 0], 3).unwrap();
        let (space, time) = c.cell_ranges(3);
        assert_eq!(space[0], (4, 8));
        assert_eq!(space[1], (0, 4));
        assert_eq!(time, (48, 64));
    }
}
