//! Operators acting on grid functions: matrix-weighted fractional maximal
//! functions, averaging and sparse operators, the fractional integral, and
//! mollification.
//!
//! Outputs are scalar fields (`Vec<f64>` per cell) for maximal-type
//! operators and [`GridFunction`]s for linear ones.

mod fractional;
mod maximal;
mod mollify;

pub use fractional::{frac_integral, frac_integral_at, same_cell_constant};
pub use maximal::{
    aux_maximal, aux_maximal_beta, dyadic_maximal, matrix_maximal, orlicz_maximal, single_cube_aux, MaximalMode, NqScaling,
    NqTable, ReducedMaximal,
};
pub use mollify::{approx_identity_check, mollify, ApproxIdentity, Mollified};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::dyadic::{Block, CubeId, Lattice, PrefixSums, SparseFamily};
use crate::error::{domain, Error, Result};
use crate::linalg::Mat;
use crate::weights::{GridFunction, WeightField};

/// `(Σ_x |R(x) f(x)|^p · cell)^{1/p}`, i.e. `‖f‖_{L^p(W)}` when `R = W^{1/p}`.
pub fn weighted_norm(root: &[Mat], f: &GridFunction, p: f64) -> f64 {
    let mags: Vec<f64> = (0..root.len()).map(|i| root[i].apply_norm(f.at(i))).collect();
    crate::weights::lp_norm(&mags, p, f.lattice().cell_measure())
}

/// `‖f‖_{L^p(W)}`.
pub fn weighted_lp_norm(w: &WeightField, f: &GridFunction, p: f64) -> Result<f64> {
    check_field(w, f)?;
    Ok(weighted_norm(w.matrix_power(1.0 / p)?.cells(), f, p))
}

pub(crate) fn check_field(w: &WeightField, f: &GridFunction) -> Result<()> {
    if w.lattice() != f.lattice() || w.n() != f.n() {
        return Err(Error::DimensionMismatch(format!(
            "weight n={} on level {}, function n={} on level {}",
            w.n(),
            w.lattice().level,
            f.n(),
            f.lattice().level
        )));
    }
    Ok(())
}

/// Per-component summed-area tables of a vector field.
pub(crate) struct VectorSums {
    parts: Vec<PrefixSums>,
}

impl VectorSums {
    pub(crate) fn new(f: &GridFunction) -> Self {
        let lat = f.lattice();
        let n = f.n();
        let parts = (0..n)
            .map(|k| {
                let comp: Vec<f64> = (0..lat.num_cells()).map(|i| f.at(i)[k]).collect();
                PrefixSums::new(lat, &comp)
            })
            .collect();
        VectorSums { parts }
    }

    pub(crate) fn average(&self, b: &Block, out: &mut [f64]) {
        let len = b.len() as f64;
        for (o, s) in out.iter_mut().zip(&self.parts) {
            *o = s.sum(b) / len;
        }
    }
}

/// Fails with [`Error::Overlap`] unless the blocks are pairwise disjoint.
pub fn check_disjoint(family: &[Block]) -> Result<()> {
    for (i, a) in family.iter().enumerate() {
        for b in &family[i + 1..] {
            if a.intersects(b) {
                return Err(Error::Overlap {
                    first: format!("{}", CubeId::Aligned(*a)),
                    second: format!("{}", CubeId::Aligned(*b)),
                });
            }
        }
    }
    Ok(())
}

fn frac_scale(lat: &Lattice, b: &Block, alpha: f64) -> f64 {
    if alpha == 0.0 {
        1.0
    } else {
        lat.block_measure(b).powf(alpha / lat.d as f64)
    }
}

/// `A^α_Q f = Σ_{Q} |Q|^{α/d} avg_Q f · χ_Q` over pairwise disjoint cubes.
pub fn averaging(alpha: f64, family: &[Block], f: &GridFunction) -> Result<GridFunction> {
    check_disjoint(family)?;
    let lat = *f.lattice();
    let n = f.n();
    let sums = VectorSums::new(f);
    let mut out = GridFunction::zeros(lat, n);
    let mut avg = [0.0; 4];
    for b in family {
        sums.average(b, &mut avg[..n]);
        let s = frac_scale(&lat, b, alpha);
        for idx in b.cells(&lat) {
            for (o, a) in out.at_mut(idx).iter_mut().zip(&avg[..n]) {
                *o = s * a;
            }
        }
    }
    Ok(out)
}

/// `T^S_α f = Σ_{Q∈S} |Q|^{α/d} avg_Q f · χ_Q`.
pub fn sparse_op(alpha: f64, family: &SparseFamily, f: &GridFunction) -> Result<GridFunction> {
    let lat = *f.lattice();
    let n = f.n();
    let sums = VectorSums::new(f);
    let mut out = GridFunction::zeros(lat, n);
    let mut avg = [0.0; 4];
    for c in &family.cubes {
        let b = c.block(&lat).ok_or_else(|| domain(format!("cube {c} lies outside the lattice")))?;
        sums.average(&b, &mut avg[..n]);
        let s = frac_scale(&lat, &b, alpha);
        for idx in b.cells(&lat) {
            for (o, a) in out.at_mut(idx).iter_mut().zip(&avg[..n]) {
                *o += s * a;
            }
        }
    }
    Ok(out)
}

/// Multiplies every cell of `f` by the matching matrix.
pub fn apply_cells(m: &[Mat], f: &GridFunction) -> GridFunction {
    let n = f.n();
    let mut out = GridFunction::zeros(*f.lattice(), n);
    let mut buf = [0.0; 4];
    for (i, a) in m.iter().enumerate() {
        a.apply_into(f.at(i), &mut buf[..n]);
        out.at_mut(i).copy_from_slice(&buf[..n]);
    }
    out
}

/// Number of cubes of `family` containing each cell.
pub fn coverage(lat: &Lattice, family: &SparseFamily) -> Vec<usize> {
    let mut count = vec![0; lat.num_cells()];
    for c in &family.cubes {
        if let Some(b) = c.block(lat) {
            for idx in b.cells(lat) {
                count[idx] += 1;
            }
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::{sparse_sets, tower};

    #[test]
    fn averaging_constant_and_idempotent() {
        let lat = Lattice::new(1, 4).unwrap();
        let f = GridFunction::constant(lat, &[2.0, -1.0]);
        let root = lat.full_block();
        let out = averaging(0.5, &[root], &f).unwrap();
        for i in 0..lat.num_cells() {
            assert_eq!(out.at(i), &[2.0, -1.0]);
        }
        let g = GridFunction::new(lat, 1, (0..16).map(|i| (i * i % 7) as f64).collect()).unwrap();
        let parts: Vec<Block> = crate::dyadic::grid_cubes(&lat, [0; 3], 2).iter().map(|c| c.block(&lat).unwrap()).collect();
        let once = averaging(0.0, &parts, &g).unwrap();
        let twice = averaging(0.0, &parts, &once).unwrap();
        assert_eq!(once, twice);
        let overlap = [root, parts[0]];
        assert!(matches!(averaging(0.0, &overlap, &g), Err(Error::Overlap { .. })));
    }

    #[test]
    fn tower_counts() {
        let lat = Lattice::new(1, 5).unwrap();
        let fam = sparse_sets(&lat, &tower(&lat, 4, [0; 3])).unwrap();
        let ones = GridFunction::constant(lat, &[1.0]);
        let out = sparse_op(0.0, &fam, &ones).unwrap();
        let cover = coverage(&lat, &fam);
        for i in 0..lat.num_cells() {
            assert_eq!(out.at(i)[0], cover[i] as f64);
        }
        assert_eq!(cover[0], 4);
        assert_eq!(cover[31], 1);
    }
}
