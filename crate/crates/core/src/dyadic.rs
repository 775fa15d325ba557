//! Dyadic grids on the working box `[0, side)^d`, the `3^d` shifted grids,
//! cube censuses, stopping-time families and sparse families.
//!
//! Geometry is in box units (the box is `[0,1)^d`) with exact integer
//! arithmetic: a cube of grid `t = s/3` at level `k` with index `m` is
//! `2^{-k}([0,1)^d + m + (-1)^k s/3)`. Every cube is discretized to the finest
//! cells whose midpoints it contains, which for base-grid cubes is exactly
//! the cells it covers.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::young::{luxemburg_unchecked, YoungFn};

pub const MAX_D: usize = 3;

/// Spatial layout of a field: dimension, finest level and box side length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub d: usize,
    pub level: u32,
    pub side: f64,
}

impl Lattice {
    pub fn new(d: usize, level: u32) -> Result<Self> {
        Self::with_side(d, level, 1.0)
    }

    pub fn with_side(d: usize, level: u32, side: f64) -> Result<Self> {
        if d == 0 || d > MAX_D {
            return Err(domain(format!("dimension d={d} must be 1..=3")));
        }
        if level as usize * d > 30 {
            return Err(domain(format!("d*L = {} is too large", level as usize * d)));
        }
        if !(side > 0.0 && side.is_finite()) {
            return Err(domain(format!("box side must be positive, got {side}")));
        }
        Ok(Lattice { d, level, side })
    }

    /// Finest cells per coordinate.
    #[inline]
    pub fn per_side(&self) -> usize {
        1 << self.level
    }

    #[inline]
    pub fn num_cells(&self) -> usize {
        1 << (self.level as usize * self.d)
    }

    /// Lebesgue measure of a finest cell.
    pub fn cell_measure(&self) -> f64 {
        (self.side / self.per_side() as f64).powi(self.d as i32)
    }

    /// Side length of a block of `cells` finest cells per coordinate.
    pub fn block_length(&self, cells: usize) -> f64 {
        self.side * cells as f64 / self.per_side() as f64
    }

    pub fn block_measure(&self, b: &Block) -> f64 {
        self.block_length(b.side).powi(self.d as i32)
    }

    /// Flat index of the cell with integer coordinates `j` (last fastest).
    #[inline]
    pub fn flat(&self, j: &[usize]) -> usize {
        let n = self.per_side();
        j[..self.d].iter().fold(0, |acc, &x| acc * n + x)
    }

    /// Integer coordinates of a flat cell index.
    #[inline]
    pub fn coords(&self, mut idx: usize) -> [usize; MAX_D] {
        let n = self.per_side();
        let mut j = [0; MAX_D];
        for i in (0..self.d).rev() {
            j[i] = idx % n;
            idx /= n;
        }
        j
    }

    /// Cell midpoint in box coordinates `[0, side)^d`.
    pub fn midpoint(&self, idx: usize) -> [f64; MAX_D] {
        let j = self.coords(idx);
        let h = self.side / self.per_side() as f64;
        core::array::from_fn(|i| if i < self.d { (j[i] as f64 + 0.5) * h } else { 0.0 })
    }

    pub fn root(&self) -> Cube {
        Cube::base(self.d, 0, [0; MAX_D])
    }

    pub fn full_block(&self) -> Block {
        Block { d: self.d, start: [0; MAX_D], side: self.per_side() }
    }

    /// Lattice one level finer.
    pub fn refined(&self) -> Lattice {
        Lattice { level: self.level + 1, ..*self }
    }
}

/// An axis-parallel block of finest cells: `start + [0, side)^d` in cell
/// coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Block {
    pub d: usize,
    pub start: [usize; MAX_D],
    pub side: usize,
}

impl Block {
    pub fn len(&self) -> usize {
        self.side.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.side == 0
    }

    pub fn contains_coords(&self, j: &[usize]) -> bool {
        (0..self.d).all(|i| j[i] >= self.start[i] && j[i] < self.start[i] + self.side)
    }

    pub fn contains_block(&self, other: &Block) -> bool {
        (0..self.d).all(|i| other.start[i] >= self.start[i] && other.start[i] + other.side <= self.start[i] + self.side)
    }

    pub fn intersects(&self, other: &Block) -> bool {
        (0..self.d).all(|i| {
            self.start[i] < other.start[i] + other.side && other.start[i] < self.start[i] + self.side
        })
    }

    /// Flat indices of the cells of the block, in row-major order.
    pub fn cells(&self, lat: &Lattice) -> BlockCells {
        BlockCells { block: *self, n: lat.per_side(), offset: [0; MAX_D], done: self.side == 0 }
    }
}

/// Iterator over the flat cell indices of a [`Block`].
pub struct BlockCells {
    block: Block,
    n: usize,
    offset: [usize; MAX_D],
    done: bool,
}

impl Iterator for BlockCells {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        if self.done {
            return None;
        }
        let d = self.block.d;
        let mut idx = 0;
        for i in 0..d {
            idx = idx * self.n + self.block.start[i] + self.offset[i];
        }
        let mut i = d;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            self.offset[i] += 1;
            if self.offset[i] < self.block.side {
                break;
            }
            self.offset[i] = 0;
        }
        Some(idx)
    }
}

/// A cube `2^{-k}([0,1)^d + m + (-1)^k shift/3)` of one of the `3^d`
/// grids. The alternating sign makes each grid nested across levels; at
/// level 0 the offset is `shift/3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cube {
    pub d: usize,
    /// Grid label: shift numerators in `{-1, 0, 1}`.
    pub shift: [i8; MAX_D],
    pub level: i32,
    pub m: [i64; MAX_D],
}

impl Cube {
    pub fn base(d: usize, level: i32, m: [i64; MAX_D]) -> Self {
        Cube { d, shift: [0; MAX_D], level, m }
    }

    pub fn is_base(&self) -> bool {
        self.shift[..self.d].iter().all(|&s| s == 0)
    }

    /// Offset numerator (over 3) of coordinate `i` at this cube's level.
    #[inline]
    fn offset(&self, i: usize) -> i64 {
        let s = self.shift[i] as i64;
        if self.level.rem_euclid(2) == 0 {
            s
        } else {
            -s
        }
    }

    /// Side length in box units.
    pub fn length(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    /// Lower corner in box units.
    pub fn lower(&self) -> [f64; MAX_D] {
        let h = self.length();
        core::array::from_fn(|i| if i < self.d { (self.m[i] as f64 + self.offset(i) as f64 / 3.0) * h } else { 0.0 })
    }

    /// Whether the cube lies inside the working box `[0,1)^d`.
    pub fn inside_box(&self) -> bool {
        if self.level < 0 {
            return false;
        }
        let n = 3i128 << self.level;
        (0..self.d).all(|i| {
            let lo = 3 * self.m[i] as i128 + self.offset(i) as i128;
            lo >= 0 && lo + 3 <= n
        })
    }

    /// Finest cells whose midpoints lie in the cube; `None` when the cube
    /// is not inside the box or is finer than the lattice.
    pub fn block(&self, lat: &Lattice) -> Option<Block> {
        if !self.inside_box() || self.level > lat.level as i32 || self.d != lat.d {
            return None;
        }
        let side = 1usize << (lat.level as i32 - self.level);
        let mut start = [0; MAX_D];
        for i in 0..self.d {
            // smallest j with j + 1/2 >= side (m + o/3), i.e.
            // j = ceil((2 (3m + o) side - 3) / 6)
            let num = 2 * (3 * self.m[i] as i128 + self.offset(i) as i128) * side as i128 - 3;
            let j = num.div_euclid(6) + if num.rem_euclid(6) != 0 { 1 } else { 0 };
            start[i] = j.max(0) as usize;
        }
        Some(Block { d: self.d, start, side })
    }

    /// The cube of the same grid one level up.
    pub fn parent(&self) -> Cube {
        let mut p = Cube { level: self.level - 1, ..*self };
        for i in 0..self.d {
            // child index = 2 m' + b + parent offset
            p.m[i] = (self.m[i] - p.offset(i)).div_euclid(2);
        }
        p
    }

    /// The `2^d` children in the same grid.
    pub fn children(&self) -> impl Iterator<Item = Cube> + '_ {
        let d = self.d;
        (0..(1usize << d)).map(move |mask| {
            let mut m = self.m;
            for i in 0..d {
                let bit = (mask >> (d - 1 - i)) & 1;
                m[i] = 2 * m[i] + bit as i64 + self.offset(i);
            }
            Cube { level: self.level + 1, m, ..*self }
        })
    }

    /// Sort key for deterministic tie-breaking: shallowest first, then the
    /// shift, then the index vector.
    pub fn sort_key(&self) -> (i32, [i8; MAX_D], [i64; MAX_D]) {
        (self.level, self.shift, self.m)
    }

    pub fn contains(&self, other: &Cube) -> bool {
        let (a, b) = (self.lower(), other.lower());
        let (ha, hb) = (self.length(), other.length());
        let eps = 1e-12 * hb;
        (0..self.d).all(|i| a[i] <= b[i] + eps && b[i] + hb <= a[i] + ha + eps)
    }
}

impl PartialOrd for Cube {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cube {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

fn fmt_third(f: &mut fmt::Formatter<'_>, s: i8) -> fmt::Result {
    match s {
        0 => f.write_str("0"),
        1 => f.write_str("1/3"),
        _ => f.write_str("-1/3"),
    }
}

impl fmt::Display for Cube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("t=(")?;
        for i in 0..self.d {
            if i > 0 {
                f.write_str(",")?;
            }
            fmt_third(f, self.shift[i])?;
        }
        write!(f, ") k={} m=(", self.level)?;
        for i in 0..self.d {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", self.m[i])?;
        }
        f.write_str(")")
    }
}

/// Identity of a scanned cube: a grid cube, or (brute census) an arbitrary
/// cell-aligned cube.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CubeId {
    Grid(Cube),
    Aligned(Block),
}

impl fmt::Display for CubeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CubeId::Grid(c) => write!(f, "{c}"),
            CubeId::Aligned(b) => {
                f.write_str("cells ")?;
                for i in 0..b.d {
                    if i > 0 {
                        f.write_str("x")?;
                    }
                    write!(f, "[{},{})", b.start[i], b.start[i] + b.side)?;
                }
                Ok(())
            }
        }
    }
}

/// Which cubes a supremum ranges over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Census {
    /// Base dyadic grid, levels `0..=L`.
    #[default]
    Dyadic,
    /// Union of the `3^d` shifted grids, cubes inside the box only.
    Shifted,
    /// All cell-aligned cubes (small lattices only).
    Brute,
}

impl fmt::Display for Census {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Census::Dyadic => "dyadic",
            Census::Shifted => "shifted",
            Census::Brute => "brute",
        })
    }
}

/// A scanned cube with its cell block.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CensusCube {
    pub id: CubeId,
    pub block: Block,
}

/// Shift vectors of the `3^d` grids, lexicographic in `(-1/3, 0, 1/3)`.
pub fn shifted_grids(d: usize) -> Vec<[i8; MAX_D]> {
    let count = 3usize.pow(d as u32);
    (0..count)
        .map(|mut c| {
            let mut s = [0i8; MAX_D];
            for i in (0..d).rev() {
                s[i] = (c % 3) as i8 - 1;
                c /= 3;
            }
            s
        })
        .collect()
}

/// Cubes of grid `shift` at `level` lying inside the box.
pub fn grid_cubes(lat: &Lattice, shift: [i8; MAX_D], level: i32) -> Vec<Cube> {
    if level < 0 {
        return Vec::new();
    }
    let d = lat.d;
    let count = 1i64 << level;
    let mut out = Vec::new();
    let mut m = [0i64; MAX_D];
    let total = (count as usize).pow(d as u32);
    for flat in 0..total {
        let mut r = flat as i64;
        for i in (0..d).rev() {
            m[i] = r % count;
            r /= count;
        }
        let cube = Cube { d, shift, level, m };
        if cube.inside_box() {
            out.push(cube);
        }
    }
    out
}

/// Enumerates the cubes of a census in tie-break order.
pub fn census_cubes(lat: &Lattice, census: Census) -> Vec<CensusCube> {
    match census {
        Census::Dyadic => (0..=lat.level as i32)
            .flat_map(|k| grid_cubes(lat, [0; MAX_D], k))
            .map(|c| CensusCube { id: CubeId::Grid(c), block: c.block(lat).expect("base cube inside box") })
            .collect(),
        Census::Shifted => {
            let mut seen = BTreeSet::new();
            let mut out = Vec::new();
            let mut shifts = shifted_grids(lat.d);
            // base grid first so that coinciding blocks keep their dyadic name
            shifts.sort_by_key(|s| (s.iter().filter(|&&x| x != 0).count(), *s));
            for k in 0..=lat.level as i32 {
                for s in &shifts {
                    for c in grid_cubes(lat, *s, k) {
                        let b = c.block(lat).expect("inside box");
                        if seen.insert(b) {
                            out.push(CensusCube { id: CubeId::Grid(c), block: b });
                        }
                    }
                }
            }
            out
        }
        Census::Brute => {
            let n = lat.per_side();
            let d = lat.d;
            let mut out = Vec::new();
            for side in (1..=n).rev() {
                let span = n - side + 1;
                let total = span.pow(d as u32);
                for flat in 0..total {
                    let mut r = flat;
                    let mut start = [0; MAX_D];
                    for i in (0..d).rev() {
                        start[i] = r % span;
                        r /= span;
                    }
                    let b = Block { d, start, side };
                    out.push(CensusCube { id: CubeId::Aligned(b), block: b });
                }
            }
            out
        }
    }
}

/// Axis-parallel cube `[a, a + len)^d` in box units (or anywhere in ℝ^d).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RealCube {
    pub d: usize,
    pub lower: [f64; MAX_D],
    pub len: f64,
}

/// Smallest cube of grid `shift` containing `q` with side at most
/// `3·len(q)`, if any.
pub fn containing_cube_in_grid(q: &RealCube, shift: [i8; MAX_D]) -> Option<Cube> {
    if !(q.len > 0.0) {
        return None;
    }
    let kmin = (-(3.0 * q.len).log2()).ceil() as i32;
    let kmax = (-q.len.log2()).floor() as i32;
    for k in (kmin..=kmax).rev() {
        let scale = (k as f64).exp2();
        let mut m = [0i64; MAX_D];
        let mut ok = true;
        let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        for i in 0..q.d {
            let s = sign * shift[i] as f64 / 3.0;
            let mi = (q.lower[i] * scale - s).floor() as i64;
            m[i] = mi;
            let hi = (mi as f64 + 1.0 + s) / scale;
            if q.lower[i] + q.len > hi + 1e-12 * q.len {
                ok = false;
                break;
            }
        }
        if ok {
            return Some(Cube { d: q.d, shift, level: k, m });
        }
    }
    None
}

/// A cube `Q_t ∈ D^t` with `q ⊂ Q_t` and `ℓ(Q_t) <= 3ℓ(q)`: the smallest
/// such cube over all grids, ties going to the lexicographically smallest
/// shift. A cube of the base grid is returned unchanged.
pub fn containing_shifted_cube(q: &RealCube) -> Result<([i8; MAX_D], Cube)> {
    if !(q.len > 0.0) || q.d == 0 || q.d > MAX_D {
        return Err(domain("containing_shifted_cube needs a nondegenerate cube"));
    }
    let mut best: Option<([i8; MAX_D], Cube)> = None;
    for s in shifted_grids(q.d) {
        if let Some(c) = containing_cube_in_grid(q, s) {
            if best.map_or(true, |(_, b)| c.level > b.level) {
                best = Some((s, c));
            }
        }
    }
    best.ok_or_else(|| domain("no shifted dyadic cube found; this contradicts the covering property"))
}

/// How the thresholds `τ_k = θ a^k` of a stopping family are anchored.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    /// `θ = 1`: thresholds are the plain powers `a^k`.
    Unit,
    /// `θ = ‖f‖_{root} / 2^d`, which puts the root in the same position as
    /// any other stopping cube relative to its parent.
    #[default]
    Root,
}

/// Maximal cubes `S^k` where the localized norm exceeds `θ a^k`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StoppingFamily {
    pub a: f64,
    pub theta: f64,
    pub anchor: Anchor,
    /// `(k, S^k)` in increasing `k`.
    pub levels: Vec<(i32, Vec<Cube>)>,
}

impl StoppingFamily {
    /// Union of all generations, deduplicated, in tie-break order.
    pub fn union(&self) -> Vec<Cube> {
        let set: BTreeSet<Cube> = self.levels.iter().flat_map(|(_, s)| s.iter().copied()).collect();
        set.into_iter().collect()
    }
}

/// Per-level table of a scalar quantity over the base grid.
pub(crate) struct LevelTable {
    pub(crate) d: usize,
    pub(crate) values: Vec<Vec<f64>>,
}

impl LevelTable {
    pub(crate) fn index(&self, c: &Cube) -> usize {
        let count = 1usize << c.level;
        (0..self.d).fold(0, |acc, i| acc * count + c.m[i] as usize)
    }

    pub(crate) fn get(&self, c: &Cube) -> f64 {
        self.values[c.level as usize][self.index(c)]
    }
}

/// Luxemburg norms `‖f‖_{Φ,Q}` of a nonnegative cell function over every
/// base-grid cube, indexed by level then by cube.
pub(crate) fn base_norms(lat: &Lattice, f: &[f64], phi: &YoungFn) -> LevelTable {
    let mut values = Vec::with_capacity(lat.level as usize + 1);
    let mut scratch = Vec::new();
    for k in 0..=lat.level as i32 {
        let cubes = grid_cubes(lat, [0; MAX_D], k);
        let mut row = Vec::with_capacity(cubes.len());
        for c in cubes {
            let b = c.block(lat).expect("inside box");
            scratch.clear();
            let mut vmax: f64 = 0.0;
            for idx in b.cells(lat) {
                scratch.push(f[idx]);
                vmax = vmax.max(f[idx]);
            }
            row.push(if vmax == 0.0 { 0.0 } else { luxemburg_unchecked(&scratch, vmax, phi) });
        }
        values.push(row);
    }
    LevelTable { d: lat.d, values }
}

/// Builds the stopping-time family of `f` for the localized norm of
/// `phi_bar` and base `a > 2^{d+1}`, scanning top-down from the root.
pub fn stopping_family(lat: &Lattice, f: &[f64], phi_bar: &YoungFn, a: f64, anchor: Anchor) -> Result<StoppingFamily> {
    let d = lat.d;
    if !(a > (1u64 << (d + 1)) as f64) || !a.is_finite() {
        return Err(domain(format!("stopping base a = {a} must exceed 2^(d+1) = {}", 1u64 << (d + 1))));
    }
    if f.len() != lat.num_cells() {
        return Err(Error::DimensionMismatch(format!("function has {} cells, lattice {}", f.len(), lat.num_cells())));
    }
    if f.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(domain("stopping family needs a finite nonnegative function"));
    }
    if f.iter().all(|&v| v == 0.0) {
        return Err(domain("f vanishes identically: no cube exceeds any threshold"));
    }
    let norms = base_norms(lat, f, phi_bar);
    let root = norms.values[0][0];
    let max_norm = norms.values.iter().flatten().fold(0.0f64, |m, &v| m.max(v));
    let theta = match anchor {
        Anchor::Unit => 1.0,
        Anchor::Root => root / (1u64 << d) as f64,
    };
    // largest k with θ a^k < x
    let largest_below = |x: f64| {
        let mut k = ((x / theta).ln() / a.ln()).floor() as i32;
        while theta * a.powi(k) >= x {
            k -= 1;
        }
        while theta * a.powi(k + 1) < x {
            k += 1;
        }
        k
    };
    let k_min = match anchor {
        Anchor::Unit => largest_below(root),
        Anchor::Root => 0,
    };
    let k_max = largest_below(max_norm);
    let mut levels = Vec::new();
    for k in k_min..=k_max {
        let tau = theta * a.powi(k);
        let mut chosen = Vec::new();
        let mut stack = vec![lat.root()];
        while let Some(c) = stack.pop() {
            if norms.get(&c) > tau {
                chosen.push(c);
            } else if c.level < lat.level as i32 {
                stack.extend(c.children());
            }
        }
        chosen.sort();
        levels.push((k, chosen));
    }
    Ok(StoppingFamily { a, theta, anchor, levels })
}

/// Checks the generation bound `Σ_{R ∈ S^{k+1}, R ⊂ Q} |R| <= ½|Q|` for
/// every `Q ∈ S^k`; with the unit anchor the root is exempt. Returns the
/// largest observed ratio.
pub fn children_sum_ratio(fam: &StoppingFamily) -> f64 {
    let mut worst: f64 = 0.0;
    for w in fam.levels.windows(2) {
        let (_, upper) = &w[0];
        let (_, lower) = &w[1];
        for q in upper {
            if fam.anchor == Anchor::Unit && q.level == 0 {
                continue;
            }
            let sum: f64 = lower
                .iter()
                .filter(|r| q.contains(r))
                .map(|r| (r.length() / q.length()).powi(q.d as i32))
                .sum();
            worst = worst.max(sum);
        }
    }
    worst
}

/// Sparse family: base-grid cubes with pairwise disjoint major subsets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseFamily {
    pub cubes: Vec<Cube>,
    /// `E_Q` as flat cell indices, parallel to `cubes`.
    pub sets: Vec<Vec<usize>>,
}

impl SparseFamily {
    /// Smallest `|E_Q|/|Q|` over the family.
    pub fn min_ratio(&self, lat: &Lattice) -> f64 {
        self.cubes
            .iter()
            .zip(&self.sets)
            .map(|(c, e)| e.len() as f64 / c.block(lat).map_or(1, |b| b.len()) as f64)
            .fold(1.0, f64::min)
    }
}

/// Computes `E_Q = Q \ ∪{maximal Q' ∈ S, Q' ⊊ Q}` after checking the
/// Carleson packing `Σ_{Q' ⊆ Q} |Q'| <= 2|Q|`; fails if some
/// `|E_Q| < ½|Q|`.
pub fn sparse_sets(lat: &Lattice, cubes: &[Cube]) -> Result<SparseFamily> {
    let set: BTreeSet<Cube> = cubes.iter().copied().collect();
    for c in &set {
        if !c.is_base() || c.block(lat).is_none() {
            return Err(domain(format!("cube {c} is not a base-grid cube of the lattice")));
        }
    }
    let list: Vec<Cube> = set.iter().copied().collect();
    for q in &list {
        let unit = q.length().powi(q.d as i32);
        let sum: f64 = list.iter().filter(|r| q.contains(r)).map(|r| r.length().powi(r.d as i32)).sum();
        if sum > 2.0 * unit * (1.0 + 1e-12) {
            return Err(Error::Packing { cube: format!("{q}"), sum: sum / unit, bound: 2.0 });
        }
    }
    let mut sets = Vec::with_capacity(list.len());
    for q in &list {
        let b = q.block(lat).expect("checked");
        let mut holes: Vec<Block> = Vec::new();
        let mut stack: Vec<Cube> = if q.level < lat.level as i32 { q.children().collect() } else { Vec::new() };
        while let Some(c) = stack.pop() {
            if set.contains(&c) {
                holes.push(c.block(lat).expect("inside"));
            } else if c.level < lat.level as i32 {
                stack.extend(c.children());
            }
        }
        let e: Vec<usize> = b
            .cells(lat)
            .filter(|&idx| {
                let j = lat.coords(idx);
                !holes.iter().any(|h| h.contains_coords(&j))
            })
            .collect();
        let ratio = e.len() as f64 / b.len() as f64;
        if ratio < 0.5 {
            return Err(Error::NotSparse { cube: format!("{q}"), ratio });
        }
        sets.push(e);
    }
    Ok(SparseFamily { cubes: list, sets })
}

/// Nested tower `[0,1)^d ⊃ [0,½)^d ⊃ …` of `depth` cubes anchored at the
/// cell with coordinates `corner` of the finest level.
pub fn tower(lat: &Lattice, depth: usize, corner: [usize; MAX_D]) -> Vec<Cube> {
    (0..depth.min(lat.level as usize + 1))
        .map(|k| {
            let shift = lat.level as usize - k;
            let m = core::array::from_fn(|i| (corner[i] >> shift) as i64);
            Cube::base(lat.d, k as i32, m)
        })
        .collect()
}

/// Summed-area table of a cell function; block sums in `O(2^d)`.
#[derive(Clone, Debug)]
pub struct PrefixSums {
    d: usize,
    stride: usize,
    table: Vec<f64>,
}

impl PrefixSums {
    pub fn new(lat: &Lattice, values: &[f64]) -> Self {
        let d = lat.d;
        let n = lat.per_side();
        let stride = n + 1;
        let mut table = vec![0.0; stride.pow(d as u32)];
        let idx = |j: &[usize; MAX_D]| (0..d).fold(0, |acc, i| acc * stride + j[i]);
        for cell in 0..lat.num_cells() {
            let c = lat.coords(cell);
            let mut j = [0; MAX_D];
            for i in 0..d {
                j[i] = c[i] + 1;
            }
            table[idx(&j)] = values[cell];
        }
        // running sums along each axis in turn
        for axis in 0..d {
            let step = stride.pow((d - 1 - axis) as u32);
            for flat in 0..table.len() {
                if (flat / step) % stride > 0 {
                    table[flat] += table[flat - step];
                }
            }
        }
        PrefixSums { d, stride, table }
    }

    pub fn sum(&self, b: &Block) -> f64 {
        let mut hi = b.start;
        for x in hi[..b.d].iter_mut() {
            *x += b.side;
        }
        self.sum_box(&b.start, &hi)
    }

    /// Sum over the cells `lo[i] <= j[i] < hi[i]`.
    pub fn sum_box(&self, lo: &[usize; MAX_D], hi: &[usize; MAX_D]) -> f64 {
        let d = self.d;
        let mut total = 0.0;
        for corner in 0..(1usize << d) {
            let mut flat = 0;
            let mut sign = 1.0;
            for i in 0..d {
                let j = if corner >> i & 1 == 1 {
                    hi[i]
                } else {
                    sign = -sign;
                    lo[i]
                };
                flat = flat * self.stride + j;
            }
            total += sign * self.table[flat];
        }
        total
    }
}

/// Cells common to two blocks, as a box `start..end` per axis.
pub fn block_overlap(a: &Block, b: &Block) -> Option<([usize; MAX_D], [usize; MAX_D])> {
    let mut lo = [0; MAX_D];
    let mut hi = [0; MAX_D];
    for i in 0..a.d {
        lo[i] = a.start[i].max(b.start[i]);
        hi[i] = (a.start[i] + a.side).min(b.start[i] + b.side);
        if lo[i] >= hi[i] {
            return None;
        }
    }
    Some((lo, hi))
}

pub fn cube_label(c: &Cube) -> String {
    format!("{c}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_sums_match_direct() {
        let lat = Lattice::new(2, 3).unwrap();
        let v: Vec<f64> = (0..lat.num_cells()).map(|i| (i * 7 % 11) as f64).collect();
        let ps = PrefixSums::new(&lat, &v);
        for c in census_cubes(&lat, Census::Brute) {
            let direct: f64 = c.block.cells(&lat).map(|i| v[i]).sum();
            assert!((ps.sum(&c.block) - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn shift_counts() {
        assert_eq!(shifted_grids(1).len(), 3);
        assert_eq!(shifted_grids(2).len(), 9);
        assert_eq!(shifted_grids(1), vec![[-1, 0, 0], [0, 0, 0], [1, 0, 0]]);
    }

    #[test]
    fn shifted_cube_geometry() {
        let c = Cube { d: 1, shift: [1, 0, 0], level: 0, m: [0; 3] };
        let lo = c.lower();
        assert!((lo[0] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(c.length(), 1.0);
        assert!(!c.inside_box());
        assert_eq!(format!("{}", Cube { d: 2, shift: [0, 1, 0], level: 3, m: [5, 2, 0] }), "t=(0,1/3) k=3 m=(5,2)");
    }

    #[test]
    fn shifted_block_uses_midpoints() {
        let lat = Lattice::new(1, 3).unwrap();
        // [1/6, 2/3): grid label -1/3 at odd level 1 has offset +1/3
        let c = Cube { d: 1, shift: [-1, 0, 0], level: 1, m: [0; 3] };
        let b = c.block(&lat).unwrap();
        let mids: Vec<f64> = b.cells(&lat).map(|i| lat.midpoint(i)[0]).collect();
        assert!(mids.iter().all(|&x| x >= 1.0 / 6.0 && x < 2.0 / 3.0));
        assert_eq!(b.side, 4);
        assert_eq!(b.start[0], 1);
    }

    #[test]
    fn containing_cube_examples() {
        let q = RealCube { d: 1, lower: [0.4, 0.0, 0.0], len: 0.5 };
        let (s, c) = containing_shifted_cube(&q).unwrap();
        assert_eq!(s, [0, 0, 0], "{c}");
        assert_eq!((c.level, c.m[0]), (0, 0));
        let t = containing_cube_in_grid(&q, [1, 0, 0]).unwrap();
        assert_eq!((t.level, t.m[0]), (0, 0));
        assert!((t.lower()[0] - 1.0 / 3.0).abs() < 1e-15);
        let dy = RealCube { d: 1, lower: [0.25, 0.0, 0.0], len: 0.25 };
        let (s, c) = containing_shifted_cube(&dy).unwrap();
        assert_eq!(s, [0, 0, 0]);
        assert_eq!((c.level, c.m[0]), (2, 1));
    }

    #[test]
    fn base_census_partitions_each_level() {
        let lat = Lattice::new(2, 3).unwrap();
        for k in 0..=3 {
            let mut hits = vec![0u8; lat.num_cells()];
            for c in grid_cubes(&lat, [0; 3], k) {
                for i in c.block(&lat).unwrap().cells(&lat) {
                    hits[i] += 1;
                }
            }
            assert!(hits.iter().all(|&h| h == 1));
        }
    }

    #[test]
    fn parents_of_shifted_cubes_contain_them() {
        let lat = Lattice::new(1, 5).unwrap();
        for s in [-1i8, 1] {
            for k in 2..=5 {
                for c in grid_cubes(&lat, [s, 0, 0], k) {
                    let p = c.parent();
                    assert!(p.contains(&c), "{p} !⊇ {c}");
                    assert_eq!(p.level, k - 1);
                    assert!(p.children().any(|ch| ch == c));
                }
            }
        }
    }

    #[test]
    fn sparse_examples() {
        let lat = Lattice::new(1, 3).unwrap();
        let root = lat.root();
        let f = sparse_sets(&lat, &[root]).unwrap();
        assert_eq!(f.sets[0].len(), 8);
        let half = Cube::base(1, 1, [0; 3]);
        let f = sparse_sets(&lat, &[root, half]).unwrap();
        assert_eq!(f.sets[0], vec![4, 5, 6, 7]);
        assert_eq!(f.min_ratio(&lat), 0.5);
        let q = Cube::base(1, 1, [1, 0, 0]);
        let quarter = Cube::base(1, 2, [0, 0, 0]);
        let err = sparse_sets(&lat, &[root, half, q, quarter]).unwrap_err();
        assert!(matches!(err, Error::Packing { .. }));
    }

    #[test]
    fn stopping_errors() {
        let lat = Lattice::new(1, 3).unwrap();
        let phi = YoungFn::power(2.0).unwrap();
        assert!(stopping_family(&lat, &[1.0; 8], &phi, 4.0, Anchor::Unit).is_err());
        assert!(stopping_family(&lat, &[0.0; 8], &phi, 8.0, Anchor::Unit).is_err());
    }

    #[test]
    fn stopping_constant_function() {
        let lat = Lattice::new(1, 4).unwrap();
        let phi = YoungFn::power(2.0).unwrap();
        let fam = stopping_family(&lat, &[100.0; 16], &phi, 8.0, Anchor::Unit).unwrap();
        // 8^2 = 64 < 100 <= 512: only k = 2, and S^2 = {root}
        assert_eq!(fam.levels.len(), 1);
        assert_eq!(fam.levels[0].0, 2);
        assert_eq!(fam.levels[0].1, vec![lat.root()]);
    }
}
