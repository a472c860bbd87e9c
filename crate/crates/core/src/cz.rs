//! Parabolic Calderón–Zygmund selection on discrete subsets of `K₁`.
//!
//! A [`DiscreteSet`] is a bitmap over the level-`K` dyadic cells of `K₁`.
//! Cells are indexed time-major, then lexicographically in space with the
//! first axis most significant: `index = j·2^{nK} + Σ_i a_i·2^{K(n-1-i)}`.
//!
//! Conventions for the discrete lemma:
//! - candidates are the dyadic cubes of levels `1..=max_level`; the first
//!   generation uses `K₁` as its predecessor;
//! - `L ∈ C(m)` iff the top of `L̃^m` is at most 10;
//! - `L̃^m ⊂ B` requires `L̃^m ⊂ K₁` and every cell of `L̃^m` to lie in `B`;
//! - a cube with density exactly `σ` is not dense.

use std::io::{Read, Write};

use bitvec::prelude::*;
use num_bigint::BigInt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{exact, stack_of, DyadicCube, Exact, GeometryError, ParabolicCube};
use crate::rng::SeededRng;

pub const RLE_MAGIC: &[u8; 4] = b"PCZ1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CzError {
    #[error("sets have different shapes: (n={0}, K={1}) vs (n={2}, K={3})")]
    Resolution(usize, u32, usize, u32),
    #[error("max_level {max_level} exceeds the resolution {resolution}")]
    MaxLevel { max_level: u32, resolution: u32 },
    #[error("sigma must lie in (0,1), got {0}")]
    Sigma(f64),
    #[error("m must be at least 1")]
    StackCount,
    #[error("unsupported shape n={0}, K={1}")]
    Shape(usize, u32),
    #[error("bad RLE data: {0}")]
    Rle(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// A union of level-`K` dyadic cells of `K₁`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscreteSet {
    n: usize,
    k: u32,
    bits: BitVec<u64, Lsb0>,
}

impl DiscreteSet {
    pub fn empty(n: usize, k: u32) -> Result<Self, CzError> {
        if !(1..=3).contains(&n) || (n as u32 + 2) * k > 34 {
            return Err(CzError::Shape(n, k));
        }
        let len = 1usize << ((n as u32 + 2) * k);
        Ok(DiscreteSet { n, k, bits: bitvec![u64, Lsb0; 0; len] })
    }

    pub fn full(n: usize, k: u32) -> Result<Self, CzError> {
        let mut s = DiscreteSet::empty(n, k)?;
        s.bits.fill(true);
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn resolution(&self) -> u32 {
        self.k
    }

    pub fn cell_count(&self) -> usize {
        self.bits.len()
    }

    pub fn count(&self) -> u64 {
        self.bits.count_ones() as u64
    }

    /// `count · |level-K cell|`.
    pub fn measure(&self) -> Exact {
        DyadicCube::new(self.n, self.k, &vec![0; self.n], 0).expect("valid").measure() * Exact::from_integer(BigInt::from(self.count()))
    }

    pub fn index(&self, space: &[u64], time: u64) -> usize {
        cube_index(self.n, self.k, space, time)
    }

    pub fn cell(&self, index: usize) -> DyadicCube {
        let (space, time) = cube_coords(self.n, self.k, index);
        DyadicCube::new(self.n, self.k, &space[..self.n], time).expect("index in range")
    }

    pub fn get(&self, index: usize) -> bool {
        self.bits[index]
    }

    pub fn set(&mut self, index: usize, value: bool) {
        self.bits.set(index, value);
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter_ones()
    }

    /// Adds every cell of a dyadic cube of level at most `K`.
    pub fn insert_cube(&mut self, cube: &DyadicCube) {
        self.for_cells(cube, |s, i| s.bits.set(i, true));
    }

    fn for_cells(&mut self, cube: &DyadicCube, mut f: impl FnMut(&mut Self, usize)) {
        let (space, (t0, t1)) = cube.cell_ranges(self.k);
        let n = self.n;
        for t in t0..t1 {
            let (a0, a1) = space[0];
            for x in a0..a1 {
                if n == 1 {
                    let i = self.index(&[x], t);
                    f(self, i);
                    continue;
                }
                let (b0, b1) = space[1];
                for y in b0..b1 {
                    if n == 2 {
                        let i = self.index(&[x, y], t);
                        f(self, i);
                        continue;
                    }
                    let (c0, c1) = space[2];
                    for z in c0..c1 {
                        let i = self.index(&[x, y, z], t);
                        f(self, i);
                    }
                }
            }
        }
    }

    pub fn union(&self, other: &DiscreteSet) -> Result<DiscreteSet, CzError> {
        self.same_shape(other)?;
        let mut out = self.clone();
        out.bits |= &other.bits;
        Ok(out)
    }

    pub fn is_subset_of(&self, other: &DiscreteSet) -> Result<bool, CzError> {
        self.same_shape(other)?;
        Ok(self.bits.iter_ones().all(|i| other.bits[i]))
    }

    fn same_shape(&self, other: &DiscreteSet) -> Result<(), CzError> {
        if self.n != other.n || self.k != other.k {
            return Err(CzError::Resolution(self.n, self.k, other.n, other.k));
        }
        Ok(())
    }

    /// Run-length encoding: 16-byte header (`b"PCZ1"`, `n: u16`, `K: u16`,
    /// `cell_count: u64`, little-endian) followed by little-endian `u32` run
    /// lengths alternating unset/set, starting with an unset run.
    pub fn to_rle(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 64);
        out.extend_from_slice(RLE_MAGIC);
        out.extend_from_slice(&(self.n as u16).to_le_bytes());
        out.extend_from_slice(&(self.k as u16).to_le_bytes());
        out.extend_from_slice(&(self.bits.len() as u64).to_le_bytes());
        let mut current = false;
        let mut run: u32 = 0;
        for b in self.bits.iter().by_vals() {
            if b != current {
                out.extend_from_slice(&run.to_le_bytes());
                current = b;
                run = 0;
            }
            run += 1;
        }
        out.extend_from_slice(&run.to_le_bytes());
        out
    }

    pub fn from_rle(bytes: &[u8]) -> Result<DiscreteSet, CzError> {
        if bytes.len() < 16 || &bytes[..4] != RLE_MAGIC {
            return Err(CzError::Rle("missing PCZ1 header".into()));
        }
        let n = u16::from_le_bytes([bytes[4], bytes[5]]) as usize;
        let k = u16::from_le_bytes([bytes[6], bytes[7]]) as u32;
        let count = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
        let mut set = DiscreteSet::empty(n, k)?;
        if count != set.bits.len() as u64 {
            return Err(CzError::Rle(format!("cell count {count} does not match n={n}, K={k}")));
        }
        let body = &bytes[16..];
        if body.len() % 4 != 0 {
            return Err(CzError::Rle("truncated run".into()));
        }
        let mut pos = 0usize;
        for (i, c) in body.chunks_exact(4).enumerate() {
            let run = u32::from_le_bytes(c.try_into().expect("4 bytes")) as usize;
            if pos + run > set.bits.len() {
                return Err(CzError::Rle("runs exceed the cell count".into()));
            }
            if i % 2 == 1 {
                set.bits[pos..pos + run].fill(true);
            }
            pos += run;
        }
        if pos != set.bits.len() {
            return Err(CzError::Rle(format!("runs cover {pos} of {} cells", set.bits.len())));
        }
        Ok(set)
    }

    pub fn write_rle(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(&self.to_rle())
    }

    pub fn read_rle(r: &mut impl Read) -> Result<DiscreteSet, CzError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(|e| CzError::Rle(e.to_string()))?;
        DiscreteSet::from_rle(&bytes)
    }
}

fn cube_index(n: usize, level: u32, space: &[u64], time: u64) -> usize {
    let mut idx = time as usize;
    for &a in &space[..n] {
        idx = (idx << level) | a as usize;
    }
    idx
}

fn cube_coords(n: usize, level: u32, mut index: usize) -> ([u64; 3], u64) {
    let mut space = [0u64; 3];
    let mask = (1usize << level) - 1;
    for i in (0..n).rev() {
        space[i] = (index & mask) as u64;
        index >>= level;
    }
    (space, index as u64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CzParams {
    pub sigma: f64,
    pub m: u32,
    pub max_level: u32,
}

impl CzParams {
    pub fn new(sigma: f64, m: u32, max_level: u32) -> Result<Self, CzError> {
        if !(sigma > 0.0 && sigma < 1.0) {
            return Err(CzError::Sigma(sigma));
        }
        if m == 0 {
            return Err(CzError::StackCount);
        }
        Ok(CzParams { sigma, m, max_level })
    }

    /// Default depth of the tree: 8, 5 and 3 levels for `n = 1, 2, 3`.
    pub fn default_max_level(n: usize) -> u32 {
        match n {
            1 => 8,
            2 => 5,
            _ => 3,
        }
    }

    fn check(&self, set: &DiscreteSet) -> Result<(), CzError> {
        CzParams::new(self.sigma, self.m, self.max_level)?;
        if self.max_level == 0 || self.max_level > set.k {
            return Err(CzError::MaxLevel { max_level: self.max_level, resolution: set.k });
        }
        Ok(())
    }
}

/// Cell counts of a set on every dyadic level `0..=top`.
struct Pyramid {
    n: usize,
    k: u32,
    levels: Vec<Vec<u32>>,
}

impl Pyramid {
    fn new(set: &DiscreteSet, top: u32) -> Pyramid {
        let n = set.n;
        let top = top.min(set.k);
        let mut finest = vec![0u32; 1 << ((n as u32 + 2) * top)];
        let shift = set.k - top;
        for i in set.ones() {
            let (space, time) = cube_coords(n, set.k, i);
            let mut s = [0u64; 3];
            for a in 0..n {
                s[a] = space[a] >> shift;
            }
            finest[cube_index(n, top, &s[..n], time >> (2 * shift))] += 1;
        }
        let mut levels = vec![finest];
        for lvl in (0..top).rev() {
            let child = levels.last().expect("nonempty");
            let mut cur = vec![0u32; 1 << ((n as u32 + 2) * lvl)];
            for (i, &c) in child.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                let (space, time) = cube_coords(n, lvl + 1, i);
                let mut s = [0u64; 3];
                for a in 0..n {
                    s[a] = space[a] >> 1;
                }
                cur[cube_index(n, lvl, &s[..n], time >> 2)] += c;
            }
            levels.push(cur);
        }
        levels.reverse();
        Pyramid { n, k: set.k, levels }
    }

    fn count(&self, c: &DyadicCube) -> u64 {
        self.levels[c.level as usize][cube_index(self.n, c.level, &c.space[..self.n], c.time)] as u64
    }

    fn cells_per_cube(&self, level: u32) -> u64 {
        1u64 << ((self.n as u32 + 2) * (self.k - level))
    }
}

/// Cells of `set` in `l`, read from the pyramid or, on the finest level, from the bitmap.
fn count_in(set: &DiscreteSet, pyr: &Pyramid, l: &DyadicCube) -> u64 {
    if l.level == set.k {
        set.get(set.index(&l.space[..set.n], l.time)) as u64
    } else {
        pyr.count(l)
    }
}

/// Pyramid depth needed for trees down to `max_level`.
fn pyramid_top(set: &DiscreteSet, max_level: u32) -> u32 {
    max_level.min(set.k.saturating_sub(1))
}

fn big(v: u64) -> Exact {
    Exact::from_integer(BigInt::from(v))
}

/// Dense: `count > σ · cells`, exactly.
fn dense(count: u64, cells: u64, sigma: &Exact) -> bool {
    big(count) > sigma * big(cells)
}

/// The parent cube; `K₁` for the first generation.
fn predecessor(l: &DyadicCube) -> DyadicCube {
    l.parent().expect("level >= 1")
}

/// Whether `L̃^m ⊂ Q`, i.e. `(τ_idx + 1 + m) · 4^{1-k} ≤ 10`.
pub fn in_c_m(l: &DyadicCube, m: u32) -> bool {
    let p = predecessor(l);
    let top = (p.time + 1 + m as u64) as u128;
    top <= 10u128 * (1u128 << (2 * p.level))
}

/// Whether `L̃^m ⊂ K₁`.
fn stack_in_k1(l: &DyadicCube, m: u32) -> bool {
    let p = predecessor(l);
    p.time + 1 + m as u64 <= 1u64 << (2 * p.level)
}

/// Number of `B` cells in `L̃^m` (only meaningful when the stack lies in `K₁`).
fn stack_count(b: &Pyramid, l: &DyadicCube, m: u32) -> u64 {
    let p = predecessor(l);
    (1..=m as u64)
        .map(|d| b.count(&DyadicCube { time: p.time + d, ..p }))
        .sum()
}


/// A selected cube and its stacked predecessor.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Selection {
    pub cube: DyadicCube,
    pub stack: ParabolicCube,
    /// `|A ∩ L|` in cells.
    pub count: u64,
}

fn visit(l: DyadicCube, a: &Pyramid, set: &DiscreteSet, params: &CzParams, sigma: &Exact, out: &mut Vec<Selection>) {
    let cnt = count_in(set, a, &l);
    if cnt == 0 {
        return;
    }
    let cells = a.cells_per_cube(l.level);
    if in_c_m(&l, params.m) && dense(cnt, cells, sigma) {
        out.push(Selection { cube: l, stack: stack_of(&l, params.m), count: cnt });
        return;
    }
    if l.level < params.max_level {
        for c in l.children() {
            visit(c, a, set, params, sigma, out);
        }
    }
}

/// Maximal dense cubes of `C(m)`, in depth-first order of the first-generation subtrees.
pub fn cz_select(a: &DiscreteSet, params: &CzParams) -> Result<Vec<Selection>, CzError> {
    params.check(a)?;
    let sigma = exact(params.sigma)?;
    let pyr = Pyramid::new(a, pyramid_top(a, params.max_level));
    let roots = DyadicCube::first_generation(a.n)?;
    let parts: Vec<Vec<Selection>> = roots
        .into_par_iter()
        .map(|r| {
            let mut v = Vec::new();
            visit(r, &pyr, a, params, &sigma, &mut v);
            v
        })
        .collect();
    Ok(parts.into_iter().flatten().collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CzVerdict {
    pub a_cells: u64,
    pub b_cells: u64,
    pub total_cells: u64,
    pub sigma: f64,
    pub m: u32,
    pub a_subset_b: bool,
    /// `|A| ≤ σ|K₁|`
    pub hypothesis_i: bool,
    /// Every dense cube of `C(m)` has `L̃^m ⊂ B`.
    pub hypothesis_ii: bool,
    /// A dense cube of `C(m)` whose stack is not inside `B`.
    pub hypothesis_ii_witness: Option<DyadicCube>,
    /// `|A| ≤ σ (m+1)/m |B|`
    pub conclusion: bool,
    /// `m|A| - σ(m+1)|B|` in cells, as an exact rational.
    pub conclusion_slack: String,
    /// A selected cube, reported when the conclusion fails.
    pub conclusion_witness: Option<DyadicCube>,
    pub selected: usize,
}

impl CzVerdict {
    /// Whether the verdict is consistent with the lemma.
    pub fn consistent(&self) -> bool {
        !(self.a_subset_b && self.hypothesis_i && self.hypothesis_ii) || self.conclusion
    }
}

/// Dense cubes of `C(m)` on levels `1..=max_level` whose stack is not inside `B`, in tree order.
fn first_ii_violation(a: &DiscreteSet, a_pyr: &Pyramid, b_pyr: &Pyramid, params: &CzParams, sigma: &Exact) -> Option<DyadicCube> {
    let mut stack = DyadicCube::first_generation(a.n).ok()?;
    stack.reverse();
    while let Some(l) = stack.pop() {
        let cnt = count_in(a, a_pyr, &l);
        if cnt == 0 {
            continue;
        }
        if in_c_m(&l, params.m) && dense(cnt, a_pyr.cells_per_cube(l.level), sigma) {
            let p = predecessor(&l);
            let ok = stack_in_k1(&l, params.m) && stack_count(b_pyr, &l, params.m) == params.m as u64 * b_pyr.cells_per_cube(p.level);
            if !ok {
                return Some(l);
            }
        }
        if l.level < params.max_level {
            let mut ch = l.children();
            ch.reverse();
            stack.extend(ch);
        }
    }
    None
}

/// Checks the hypotheses and the conclusion of the lemma for `(A, B)` exactly.
pub fn cz_verdict(a: &DiscreteSet, b: &DiscreteSet, params: &CzParams) -> Result<CzVerdict, CzError> {
    a.same_shape(b)?;
    params.check(a)?;
    let sigma = exact(params.sigma)?;
    let a_pyr = Pyramid::new(a, pyramid_top(a, params.max_level));
    let b_pyr = Pyramid::new(b, params.max_level - 1);
    let (na, nb, total) = (a.count(), b.count(), a.cell_count() as u64);
    let hypothesis_i = big(na) <= &sigma * big(total);
    let witness = first_ii_violation(a, &a_pyr, &b_pyr, params, &sigma);
    let m = params.m as u64;
    let slack = big(m * na) - &sigma * big((m + 1) * nb);
    let conclusion = slack <= Exact::from_integer(BigInt::from(0));
    let selected = cz_select(a, params)?;
    let conclusion_witness = if conclusion { None } else { selected.first().map(|s| s.cube) };
    Ok(CzVerdict {
        a_cells: na,
        b_cells: nb,
        total_cells: total,
        sigma: params.sigma,
        m: params.m,
        a_subset_b: a.is_subset_of(b)?,
        hypothesis_i,
        hypothesis_ii: witness.is_none(),
        hypothesis_ii_witness: witness,
        conclusion,
        conclusion_slack: slack.to_string(),
        conclusion_witness,
        selected: selected.len(),
    })
}

/// `B = A ∪ ⋃ L̃^m` over the dense cubes of `C(m)`; `None` if some stack leaves `K₁`.
pub fn close_under_stacks(a: &DiscreteSet, params: &CzParams) -> Result<Option<DiscreteSet>, CzError> {
    params.check(a)?;
    let sigma = exact(params.sigma)?;
    let a_pyr = Pyramid::new(a, pyramid_top(a, params.max_level));
    let mut b = a.clone();
    let mut stack = DyadicCube::first_generation(a.n)?;
    while let Some(l) = stack.pop() {
        let cnt = count_in(a, &a_pyr, &l);
        if cnt == 0 {
            continue;
        }
        if in_c_m(&l, params.m) && dense(cnt, a_pyr.cells_per_cube(l.level), &sigma) {
            if !stack_in_k1(&l, params.m) {
                return Ok(None);
            }
            let p = predecessor(&l);
            for d in 1..=params.m as u64 {
                b.insert_cube(&DyadicCube { time: p.time + d, ..p });
            }
        }
        if l.level < params.max_level {
            stack.extend(l.children());
        }
    }
    Ok(Some(b))
}

/// Draws a seeded pair `(A, B)` satisfying hypotheses (i) and (ii).
///
/// `A` is a Bernoulli set confined to an initial time window and `B` its stack
/// closure plus a sprinkle of extra cells. Returns `None` when the draw breaks
/// a hypothesis (a stack leaves `K₁`, or `A` is too large); callers redraw.
pub fn random_instance(n: usize, k: u32, params: &CzParams, rng: &mut SeededRng) -> Result<Option<(DiscreteSet, DiscreteSet)>, CzError> {
    let mut a = DiscreteSet::empty(n, k)?;
    let slots = 1u64 << (2 * k);
    let side = 1u64 << k;
    let t_max = 1 + rng.below(slots / 2);
    let p = rng.uniform(0.02, 0.6) * params.sigma;
    let mut space = vec![0u64; n];
    for t in 0..t_max {
        for flat in 0..side.pow(n as u32) {
            let mut rest = flat;
            for s in space.iter_mut().rev() {
                *s = rest % side;
                rest /= side;
            }
            if rng.bernoulli(p) {
                let i = a.index(&space, t);
                a.set(i, true);
            }
        }
    }
    let Some(mut b) = close_under_stacks(&a, params)? else {
        return Ok(None);
    };
    let extra = rng.uniform(0.0, 0.05);
    for i in 0..b.cell_count() {
        if rng.bernoulli(extra) {
            b.set(i, true);
        }
    }
    let sigma = exact(params.sigma)?;
    if big(a.count()) > &sigma * big(a.cell_count() as u64) {
        return Ok(None);
    }
    Ok(Some((a, b)))
}
