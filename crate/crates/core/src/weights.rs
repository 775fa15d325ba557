//! Matrix weight fields: one symmetric positive definite `n×n` matrix per
//! finest cell, plus vector-valued grid functions and synthetic generators.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dyadic::{Block, Lattice, MAX_D};
use crate::error::{domain, Error, Result};
use crate::linalg::{Mat, MAX_N};

const SYM_TOL: f64 = 1e-12;

/// A piecewise-constant matrix weight on the cells of a lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightField {
    lat: Lattice,
    n: usize,
    cells: Vec<Mat>,
}

impl WeightField {
    /// Validates symmetry (1e-12 absolute) and positive definiteness.
    pub fn new(lat: Lattice, n: usize, cells: Vec<Mat>) -> Result<Self> {
        if n == 0 || n > MAX_N {
            return Err(domain(format!("matrix dimension n={n} must be 1..=4")));
        }
        if cells.len() != lat.num_cells() {
            return Err(Error::DimensionMismatch(format!("{} cells given, lattice has {}", cells.len(), lat.num_cells())));
        }
        for (i, m) in cells.iter().enumerate() {
            if m.dim() != n {
                return Err(Error::DimensionMismatch(format!("cell {i} is {}x{}, expected {n}x{n}", m.dim(), m.dim())));
            }
            if !m.is_finite() {
                return Err(Error::NonFiniteEigen { cell: Some(i) });
            }
            if !m.is_symmetric(SYM_TOL) {
                return Err(Error::NotPositiveDefinite { cell: Some(i) });
            }
            if !(m.sym_eigen().min() > 0.0) {
                return Err(Error::NotPositiveDefinite { cell: Some(i) });
            }
        }
        Ok(WeightField { lat, n, cells })
    }

    pub(crate) fn new_unchecked(lat: Lattice, n: usize, cells: Vec<Mat>) -> Self {
        WeightField { lat, n, cells }
    }

    pub fn identity(lat: Lattice, n: usize) -> Self {
        Self::constant(lat, Mat::identity(n))
    }

    pub fn constant(lat: Lattice, m: Mat) -> Self {
        WeightField { lat, n: m.dim(), cells: vec![m; lat.num_cells()] }
    }

    /// An `n = 1` field from positive scalars.
    pub fn from_scalars(lat: Lattice, w: &[f64]) -> Result<Self> {
        Self::new(lat, 1, w.iter().map(|&x| Mat::scalar(x)).collect())
    }

    /// Builds from per-cell lower triangles (row-major, `n(n+1)/2` each).
    pub fn from_lower(lat: Lattice, n: usize, lower: &[f64]) -> Result<Self> {
        let t = n * (n + 1) / 2;
        if lower.len() != t * lat.num_cells() {
            return Err(Error::DimensionMismatch(format!("expected {} values, got {}", t * lat.num_cells(), lower.len())));
        }
        Self::new(lat, n, lower.chunks(t).map(|c| Mat::from_lower(n, c)).collect())
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lat
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cells(&self) -> &[Mat] {
        &self.cells
    }

    #[inline]
    pub fn cell(&self, i: usize) -> &Mat {
        &self.cells[i]
    }

    /// `W^r` cellwise through the symmetric eigendecomposition, with
    /// eigenvalues floored at 1e-300.
    pub fn matrix_power(&self, r: f64) -> Result<WeightField> {
        let mut out = Vec::with_capacity(self.cells.len());
        for (i, m) in self.cells.iter().enumerate() {
            let p = m.sym_pow(r).map_err(|_| Error::NonFiniteEigen { cell: Some(i) })?;
            if !p.is_finite() {
                return Err(Error::NonFiniteEigen { cell: Some(i) });
            }
            out.push(p);
        }
        Ok(WeightField { lat: self.lat, n: self.n, cells: out })
    }

    /// Largest eigenvalue of every cell.
    pub fn op_norms(&self) -> Vec<f64> {
        self.cells.iter().map(|m| m.sym_op_norm()).collect()
    }

    /// `R W Rᵀ` cellwise.
    pub fn conjugate(&self, r: &Mat) -> WeightField {
        let rt = r.transpose();
        let cells = self.cells.iter().map(|m| r.mul(m).mul(&rt)).collect();
        WeightField { lat: self.lat, n: self.n, cells }
    }

    /// The same piecewise-constant function on a lattice one level finer.
    pub fn refine(&self) -> WeightField {
        let fine = self.lat.refined();
        let cells = (0..fine.num_cells())
            .map(|idx| {
                let j = fine.coords(idx);
                let coarse: [usize; MAX_D] = core::array::from_fn(|i| j[i] / 2);
                self.cells[self.lat.flat(&coarse)]
            })
            .collect();
        WeightField { lat: fine, n: self.n, cells }
    }

    /// Scalar weight `|W^{1/p} e|^p`.
    pub fn direction_weight(&self, e: &[f64], p: f64) -> Result<Vec<f64>> {
        let root = self.matrix_power(1.0 / p)?;
        Ok(root.cells.iter().map(|m| m.apply_norm(e).powf(p)).collect())
    }

    /// Scalar entries of an `n = 1` field.
    pub fn scalars(&self) -> Vec<f64> {
        self.cells.iter().map(|m| m.get(0, 0)).collect()
    }

    /// Cell average of the field over a block.
    pub fn average(&self, b: &Block) -> Mat {
        let mut acc = Mat::zeros(self.n);
        for idx in b.cells(&self.lat) {
            acc = acc.add(&self.cells[idx]);
        }
        acc.scale(1.0 / b.len() as f64)
    }
}

/// A vector field in ℝ^n sampled on the cells of a lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    lat: Lattice,
    n: usize,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(lat: Lattice, n: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || n > MAX_N {
            return Err(domain(format!("vector dimension n={n} must be 1..=4")));
        }
        if values.len() != n * lat.num_cells() {
            return Err(Error::DimensionMismatch(format!("expected {} values, got {}", n * lat.num_cells(), values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(domain("grid function values must be finite"));
        }
        Ok(GridFunction { lat, n, values })
    }

    pub fn zeros(lat: Lattice, n: usize) -> Self {
        GridFunction { lat, n, values: vec![0.0; n * lat.num_cells()] }
    }

    /// Constant vector `e` in every cell.
    pub fn constant(lat: Lattice, e: &[f64]) -> Self {
        let values = (0..lat.num_cells()).flat_map(|_| e.iter().copied()).collect();
        GridFunction { lat, n: e.len(), values }
    }

    pub fn from_scalars(lat: Lattice, v: Vec<f64>) -> Result<Self> {
        Self::new(lat, 1, v)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lat
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn at(&self, cell: usize) -> &[f64] {
        &self.values[cell * self.n..(cell + 1) * self.n]
    }

    #[inline]
    pub fn at_mut(&mut self, cell: usize) -> &mut [f64] {
        &mut self.values[cell * self.n..(cell + 1) * self.n]
    }

    /// Euclidean length of the vector in every cell.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.chunks(self.n).map(crate::linalg::norm).collect()
    }

    /// `W(x) f(x)` cellwise.
    pub fn apply(&self, w: &WeightField) -> GridFunction {
        let mut out = GridFunction::zeros(self.lat, self.n);
        for i in 0..self.lat.num_cells() {
            let (src, dst) = (self.at(i), &mut out.values[i * self.n..(i + 1) * self.n]);
            w.cell(i).apply_into(src, dst);
        }
        out
    }

    /// `(∫ |f|^p)^{1/p}` with the lattice's cell measure.
    pub fn lp_norm(&self, p: f64) -> f64 {
        lp_norm(&self.magnitudes(), p, self.lat.cell_measure())
    }
}

/// `(Σ |v_i|^p · cell)^{1/p}`.
pub fn lp_norm(v: &[f64], p: f64, cell: f64) -> f64 {
    if p == 2.0 {
        return (v.iter().map(|x| x * x).sum::<f64>() * cell).sqrt();
    }
    (v.iter().map(|x| x.abs().powf(p)).sum::<f64>() * cell).powf(1.0 / p)
}

/// `R diag(|x − c|^{γ_1}, …, |x − c|^{γ_n}) Rᵀ` at cell midpoints. A
/// midpoint that coincides with the center is moved by half a cell along
/// the first axis.
pub fn gen_power_weight(lat: Lattice, n: usize, gamma: &[f64], center: [f64; MAX_D], rotation: &Mat) -> Result<WeightField> {
    if gamma.len() != n && gamma.len() != 1 {
        return Err(Error::DimensionMismatch(format!("{} exponents for n={n}", gamma.len())));
    }
    if rotation.dim() != n {
        return Err(Error::DimensionMismatch("rotation dimension".into()));
    }
    if (0..lat.d).any(|i| !(center[i] >= 0.0 && center[i] <= lat.side)) {
        return Err(domain("power-weight center must lie in the box"));
    }
    let g = |i: usize| if gamma.len() == 1 { gamma[0] } else { gamma[i] };
    let h = lat.side / lat.per_side() as f64;
    let rt = rotation.transpose();
    let cells = (0..lat.num_cells())
        .map(|idx| {
            let mut x = lat.midpoint(idx);
            let dist = |x: &[f64; MAX_D]| (0..lat.d).map(|i| (x[i] - center[i]).powi(2)).sum::<f64>().sqrt();
            if dist(&x) == 0.0 {
                x[0] += 0.5 * h;
            }
            let r = dist(&x);
            let diag: Vec<f64> = (0..n).map(|i| r.powf(g(i))).collect();
            rotation.mul(&Mat::diag(&diag)).mul(&rt)
        })
        .collect();
    WeightField::new(lat, n, cells)
}

/// Seeded random field `W = exp(H)` with `H` a sum of low-frequency
/// symmetric modes scaled so that every eigenvalue lies in `[1/κ, κ]`, then
/// shrunk until adjacent cells are within `λ` in the Thompson metric
/// `max |ln eig(A^{-1/2} B A^{-1/2})|`.
pub fn gen_random_field(lat: Lattice, n: usize, seed: u64, kappa: f64, lambda: f64) -> Result<WeightField> {
    if !(kappa >= 1.0) || !kappa.is_finite() {
        return Err(domain(format!("condition bound kappa={kappa} must be >= 1")));
    }
    if !(lambda > 0.0) {
        return Err(domain(format!("log-Lipschitz bound lambda={lambda} must be positive")));
    }
    if n == 0 || n > MAX_N {
        return Err(domain(format!("matrix dimension n={n} must be 1..=4")));
    }
    if kappa == 1.0 {
        return Ok(WeightField::identity(lat, n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    const MODES: usize = 6;
    let mut modes = Vec::with_capacity(MODES);
    for _ in 0..MODES {
        let mut s = Mat::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = rng.sample(StandardNormal);
                s.set(i, j, v);
                s.set(j, i, v);
            }
        }
        let freq: [f64; MAX_D] = core::array::from_fn(|_| rng.random_range(0..4u32) as f64);
        let phase: f64 = rng.random_range(0.0..core::f64::consts::TAU);
        modes.push((s, freq, phase));
    }
    let h_at = |idx: usize| {
        let x = lat.midpoint(idx);
        let mut h = Mat::zeros(n);
        for (s, freq, phase) in &modes {
            let arg: f64 = (0..lat.d).map(|i| freq[i] * x[i] / lat.side).sum::<f64>() * core::f64::consts::TAU + phase;
            h = h.add(&s.scale(arg.cos()));
        }
        h
    };
    let hs: Vec<Mat> = (0..lat.num_cells()).map(h_at).collect();
    let spread = hs.iter().map(|h| h.sym_op_norm()).fold(0.0f64, f64::max);
    let mut scale = if spread > 0.0 { kappa.ln() / spread } else { 0.0 };
    for _ in 0..60 {
        let cells: Vec<Mat> = hs.iter().map(|h| h.scale(scale).sym_map(|l| l.exp())).collect();
        let field = WeightField::new_unchecked(lat, n, cells);
        let worst = max_adjacent_distance(&field);
        if worst <= lambda {
            return WeightField::new(lat, n, field.cells);
        }
        scale *= 0.999 * lambda / worst;
    }
    Err(Error::NoConvergence { what: "random field smoothing", residual: scale })
}

/// Thompson distance between SPD matrices.
pub fn thompson_distance(a: &Mat, b: &Mat) -> f64 {
    let ai = a.sym_pow(-0.5).expect("SPD");
    let c = ai.mul(b).mul(&ai);
    let e = c.sym_eigen();
    e.values().iter().fold(0.0f64, |m, &l| m.max(l.max(1e-300).ln().abs()))
}

/// Largest Thompson distance between face-adjacent cells.
pub fn max_adjacent_distance(w: &WeightField) -> f64 {
    let lat = w.lattice();
    let mut worst: f64 = 0.0;
    for idx in 0..lat.num_cells() {
        let j = lat.coords(idx);
        for axis in 0..lat.d {
            if j[axis] + 1 < lat.per_side() {
                let mut k = j;
                k[axis] += 1;
                worst = worst.max(thompson_distance(w.cell(idx), w.cell(lat.flat(&k))));
            }
        }
    }
    worst
}

/// `R(θ) diag(e^{κ x_1}, e^{-κ x_1}) R(θ)ᵀ` with the rotation angle
/// `θ = π x_1 / 2` turning across the box: a two-dimensional matrix weight
/// whose A_p constant grows without bound in `κ`.
pub fn gen_twisted_exponential(lat: Lattice, kappa: f64) -> Result<WeightField> {
    let cells = (0..lat.num_cells())
        .map(|idx| {
            let x = lat.midpoint(idx)[0] / lat.side;
            let r = crate::linalg::givens(2, 0, 1, core::f64::consts::FRAC_PI_2 * x);
            let d = Mat::diag(&[(kappa * x).exp(), (-kappa * x).exp()]);
            r.mul(&d).mul(&r.transpose())
        })
        .collect();
    WeightField::new(lat, 2, cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_powers() {
        let lat = Lattice::new(1, 3).unwrap();
        let w = WeightField::identity(lat, 3);
        let p = w.matrix_power(-1.7).unwrap();
        assert!(p.cells().iter().all(|m| m.max_abs_diff(&Mat::identity(3)) < 1e-15));
    }

    #[test]
    fn square_root_example() {
        let lat = Lattice::new(1, 0).unwrap();
        let w = WeightField::new(lat, 2, vec![Mat::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]])]).unwrap();
        let r = w.matrix_power(0.5).unwrap();
        let s3 = 3f64.sqrt();
        let expect = Mat::from_rows(&[&[(s3 + 1.0) / 2.0, (s3 - 1.0) / 2.0], &[(s3 - 1.0) / 2.0, (s3 + 1.0) / 2.0]]);
        assert!(r.cell(0).max_abs_diff(&expect) < 1e-14);
        let back = r.matrix_power(2.0).unwrap();
        assert!(back.cell(0).max_abs_diff(w.cell(0)) < 1e-12);
    }

    #[test]
    fn validation_names_cells() {
        let lat = Lattice::new(1, 1).unwrap();
        let bad = vec![Mat::identity(2), Mat::diag(&[1.0, -1.0])];
        assert_eq!(WeightField::new(lat, 2, bad).unwrap_err(), Error::NotPositiveDefinite { cell: Some(1) });
        let asym = vec![Mat::identity(2), Mat::from_rows(&[&[1.0, 0.1], &[0.0, 1.0]])];
        assert!(WeightField::new(lat, 2, asym).is_err());
    }

    #[test]
    fn power_weight_midpoints() {
        let lat = Lattice::new(1, 3).unwrap();
        let w = gen_power_weight(lat, 1, &[1.0], [0.0; 3], &Mat::identity(1)).unwrap();
        for i in 0..8 {
            assert!((w.cell(i).get(0, 0) - (i as f64 + 0.5) / 8.0).abs() < 1e-15);
        }
        let id = gen_power_weight(lat, 2, &[0.0], [0.3, 0.0, 0.0], &crate::linalg::givens(2, 0, 1, 0.4)).unwrap();
        assert!(id.cells().iter().all(|m| m.max_abs_diff(&Mat::identity(2)) < 1e-14));
        // a midpoint on the center is nudged, not zero
        let hit = gen_power_weight(lat, 1, &[1.0], [0.0625, 0.0, 0.0], &Mat::identity(1)).unwrap();
        assert!(hit.cell(0).get(0, 0) > 0.0);
    }

    #[test]
    fn random_field_contract() {
        let lat = Lattice::new(1, 6).unwrap();
        let a = gen_random_field(lat, 2, 7, 10.0, 0.5).unwrap();
        let b = gen_random_field(lat, 2, 7, 10.0, 0.5).unwrap();
        assert_eq!(a, b);
        for m in a.cells() {
            let e = m.sym_eigen();
            assert!(e.min() >= 0.1 * (1.0 - 1e-12) && e.max() <= 10.0 * (1.0 + 1e-12));
        }
        assert!(max_adjacent_distance(&a) <= 0.5);
        let id = gen_random_field(lat, 3, 1, 1.0, 0.5).unwrap();
        assert!(id.cells().iter().all(|m| *m == Mat::identity(3)));
    }
}
