use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::check_field;
use crate::dyadic::{census_cubes, grid_cubes, shifted_grids, Block, Census, Cube, Lattice, PrefixSums, MAX_D};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::reducing::{reducing_auto, MveeOptions};
use crate::weights::{GridFunction, WeightField};
use crate::young::{luxemburg_iter, YoungFn};

/// Cube family of a maximal operator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaximalMode {
    /// Base dyadic grid.
    #[default]
    SingleGrid,
    /// Sum over the `3^d` shifted grids of the per-grid maximal functions.
    ShiftedUnion,
    /// Supremum over all cell-aligned cubes.
    Brute,
}

fn grid_blocks(lat: &Lattice, shift: [i8; MAX_D]) -> Vec<Block> {
    (0..=lat.level as i32).flat_map(|k| grid_cubes(lat, shift, k)).filter_map(|c| c.block(lat)).collect()
}

fn scale(lat: &Lattice, b: &Block, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else {
        lat.block_measure(b).powf(e)
    }
}

/// Runs a per-cell supremum over the cube families of `mode`.
fn sup_over(lat: &Lattice, mode: MaximalMode, mut per_cube: impl FnMut(&Block, &mut [f64]) -> Result<()>) -> Result<Vec<f64>> {
    let families = families(lat, mode);
    let mut total = vec![0.0; lat.num_cells()];
    for fam in families {
        let mut best = vec![0.0; lat.num_cells()];
        for b in &fam {
            per_cube(b, &mut best)?;
        }
        for (t, b) in total.iter_mut().zip(best) {
            *t += b;
        }
    }
    Ok(total)
}

/// `M_{α,U,V} f(x) = sup_{Q∋x} |Q|^{α/d} avg_{y∈Q} |U(x)^{1/q} V(y)^{-1/p} f(y)|`.
#[allow(clippy::too_many_arguments)]
pub fn matrix_maximal(
    u: &WeightField,
    v: &WeightField,
    alpha: f64,
    p: f64,
    q: f64,
    f: &GridFunction,
    mode: MaximalMode,
) -> Result<Vec<f64>> {
    check_field(u, f)?;
    check_field(v, f)?;
    let lat = *f.lattice();
    let u_root = u.matrix_power(1.0 / q)?;
    let g = f.apply(&v.matrix_power(-1.0 / p)?);
    let n = f.n();
    let e = alpha / lat.d as f64;
    sup_over(&lat, mode, |b, best| {
        let cells: Vec<usize> = b.cells(&lat).collect();
        let s = scale(&lat, b, e) / cells.len() as f64;
        let mut buf = [0.0; 4];
        for &x in &cells {
            let a = u_root.cell(x);
            let mut acc = 0.0;
            for &y in &cells {
                a.apply_into(g.at(y), &mut buf[..n]);
                acc += crate::linalg::norm(&buf[..n]);
            }
            let val = s * acc;
            if val > best[x] {
                best[x] = val;
            }
        }
        Ok(())
    })
}

/// Dyadic (or shifted, or brute) maximal function of a nonnegative cell
/// function.
pub fn dyadic_maximal(lat: &Lattice, f: &[f64], mode: MaximalMode) -> Result<Vec<f64>> {
    if f.len() != lat.num_cells() {
        return Err(Error::DimensionMismatch(format!("{} values for {} cells", f.len(), lat.num_cells())));
    }
    let sums = PrefixSums::new(lat, f);
    sup_over(lat, mode, |b, best| {
        let avg = sums.sum(b) / b.len() as f64;
        for x in b.cells(lat) {
            if avg > best[x] {
                best[x] = avg;
            }
        }
        Ok(())
    })
}

/// `M_{β,Φ̄} f(x) = sup_{Q∋x} |Q|^{β/d} ‖f‖_{Φ̄,Q}`.
pub fn orlicz_maximal(lat: &Lattice, phi_bar: &YoungFn, beta: f64, f: &[f64], mode: MaximalMode) -> Result<Vec<f64>> {
    if f.len() != lat.num_cells() {
        return Err(Error::DimensionMismatch(format!("{} values for {} cells", f.len(), lat.num_cells())));
    }
    let e = beta / lat.d as f64;
    let mut scratch = Vec::new();
    sup_over(lat, mode, |b, best| {
        let val = scale(lat, b, e) * luxemburg_iter(b.cells(lat).map(|i| f[i].abs()), &mut scratch, phi_bar);
        for x in b.cells(lat) {
            if val > best[x] {
                best[x] = val;
            }
        }
        Ok(())
    })
}

fn slice(w: &WeightField, b: &Block) -> Vec<Mat> {
    b.cells(w.lattice()).map(|i| *w.cell(i)).collect()
}

fn families(lat: &Lattice, mode: MaximalMode) -> Vec<Vec<Block>> {
    match mode {
        MaximalMode::SingleGrid => vec![grid_blocks(lat, [0; MAX_D])],
        MaximalMode::ShiftedUnion => shifted_grids(lat.d).into_iter().map(|s| grid_blocks(lat, s)).collect(),
        MaximalMode::Brute => vec![census_cubes(lat, Census::Brute).into_iter().map(|c| c.block).collect()],
    }
}

/// Maximal operator `sup_{Q∋x} |Q|^{e} avg_Q |R_Q W(y) f(y)|` with one
/// constant matrix `R_Q` per cube, built once and applied many times.
#[derive(Clone, Debug)]
pub struct ReducedMaximal {
    lat: Lattice,
    exponent: f64,
    pre: Vec<Mat>,
    families: Vec<Vec<(Block, Mat)>>,
}

impl ReducedMaximal {
    /// `M'_{α,U,V}`: `R_Q = U_Q^q` (reducing operator of `U^{1/q}` for
    /// `t^q`), `W = V^{-1/p}`, `e = α/d`.
    #[allow(clippy::too_many_arguments)]
    pub fn aux(u: &WeightField, v: &WeightField, alpha: f64, p: f64, q: f64, mode: MaximalMode, mvee: &MveeOptions) -> Result<Self> {
        if u.lattice() != v.lattice() || u.n() != v.n() {
            return Err(Error::DimensionMismatch("U and V differ in shape".into()));
        }
        let lat = *u.lattice();
        let u_root = u.matrix_power(1.0 / q)?;
        let power_q = YoungFn::power(q)?;
        let mut fams = Vec::new();
        for fam in families(&lat, mode) {
            let mut row = Vec::with_capacity(fam.len());
            for b in fam {
                row.push((b, reducing_auto(&slice(&u_root, &b), &power_q, mvee)?.matrix));
            }
            fams.push(row);
        }
        Ok(ReducedMaximal { lat, exponent: alpha / lat.d as f64, pre: v.matrix_power(-1.0 / p)?.cells().to_vec(), families: fams })
    }

    /// `M_{β,V}`: `R_Q = (V_Q^{p,Φ})^{-1}`, `W = V^{-1/p}`, `e = β/d`.
    pub fn beta(v: &WeightField, beta: f64, p: f64, phi: &YoungFn, mode: MaximalMode, mvee: &MveeOptions) -> Result<Self> {
        let lat = *v.lattice();
        let v_neg = v.matrix_power(-1.0 / p)?;
        let mut fams = Vec::new();
        for fam in families(&lat, mode) {
            let mut row = Vec::with_capacity(fam.len());
            for b in fam {
                row.push((b, reducing_auto(&slice(&v_neg, &b), phi, mvee)?.matrix.sym_inverse()));
            }
            fams.push(row);
        }
        Ok(ReducedMaximal { lat, exponent: beta / lat.d as f64, pre: v_neg.cells().to_vec(), families: fams })
    }

    /// Restricts the operator to one cube: `B^α_Q` when built by [`aux`](Self::aux).
    pub fn single(&self, cube: &Block) -> Option<ReducedMaximal> {
        let hit = self.families.iter().flatten().find(|(b, _)| b == cube)?;
        Some(ReducedMaximal { lat: self.lat, exponent: self.exponent, pre: self.pre.clone(), families: vec![vec![*hit]] })
    }

    pub fn cubes(&self) -> impl Iterator<Item = &Block> {
        self.families.iter().flatten().map(|(b, _)| b)
    }

    pub fn apply(&self, f: &GridFunction) -> Result<Vec<f64>> {
        if f.lattice() != &self.lat || f.n() != self.pre[0].dim() {
            return Err(Error::DimensionMismatch("function does not match the operator".into()));
        }
        let n = f.n();
        let g = super::apply_cells(&self.pre, f);
        let mut total = vec![0.0; self.lat.num_cells()];
        let mut best = vec![0.0; self.lat.num_cells()];
        let mut buf = [0.0; 4];
        for fam in &self.families {
            best.iter_mut().for_each(|b| *b = 0.0);
            for (b, r) in fam {
                let mut acc = 0.0;
                for y in b.cells(&self.lat) {
                    r.apply_into(g.at(y), &mut buf[..n]);
                    acc += crate::linalg::norm(&buf[..n]);
                }
                let val = scale(&self.lat, b, self.exponent) * acc / b.len() as f64;
                for x in b.cells(&self.lat) {
                    if val > best[x] {
                        best[x] = val;
                    }
                }
            }
            for (t, b) in total.iter_mut().zip(&best) {
                *t += b;
            }
        }
        Ok(total)
    }
}

/// `M'_{α,U,V} f(x) = sup_{Q∋x} |Q|^{α/d} avg_Q |U_Q^q V(y)^{-1/p} f(y)|`
/// with `U_Q^q` a reducing operator of `U^{1/q}` for `t^q`.
#[allow(clippy::too_many_arguments)]
pub fn aux_maximal(
    u: &WeightField,
    v: &WeightField,
    alpha: f64,
    p: f64,
    q: f64,
    f: &GridFunction,
    mode: MaximalMode,
    mvee: &MveeOptions,
) -> Result<Vec<f64>> {
    check_field(u, f)?;
    ReducedMaximal::aux(u, v, alpha, p, q, mode, mvee)?.apply(f)
}

/// Single-cube piece `B^α_Q f = |Q|^{α/d} avg_Q |U_Q^q V^{-1/p} f| χ_Q` of
/// the auxiliary maximal operator.
#[allow(clippy::too_many_arguments)]
pub fn single_cube_aux(
    u: &WeightField,
    v: &WeightField,
    alpha: f64,
    p: f64,
    q: f64,
    cube: &Block,
    f: &GridFunction,
    mvee: &MveeOptions,
) -> Result<Vec<f64>> {
    check_field(u, f)?;
    check_field(v, f)?;
    let lat = *f.lattice();
    let u_root = u.matrix_power(1.0 / q)?;
    let r = reducing_auto(&slice(&u_root, cube), &YoungFn::power(q)?, mvee)?;
    let op = ReducedMaximal {
        lat,
        exponent: alpha / lat.d as f64,
        pre: v.matrix_power(-1.0 / p)?.cells().to_vec(),
        families: vec![vec![(*cube, r.matrix)]],
    };
    op.apply(f)
}

/// `M_{β,V} f(x) = sup_{Q∋x} |Q|^{β/d} avg_Q |(V_Q^{p,Φ})^{-1} V(y)^{-1/p} f(y)|`
/// with `V_Q^{p,Φ}` a reducing operator of `V^{-1/p}` for `Φ`.
pub fn aux_maximal_beta(
    v: &WeightField,
    beta: f64,
    p: f64,
    phi: &YoungFn,
    f: &GridFunction,
    mode: MaximalMode,
    mvee: &MveeOptions,
) -> Result<Vec<f64>> {
    check_field(v, f)?;
    ReducedMaximal::beta(v, beta, p, phi, mode, mvee)?.apply(f)
}

/// Which cube sets the power of `|·|` in `N_Q`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NqScaling {
    /// `|R|^{α/d+1/q-1/p}` for the inner cube `R`.
    #[default]
    Inner,
    /// `|Q|^{α/d+1/q-1/p}` for the outer cube.
    Outer,
}

/// Reducing operators `V_R^{p,Φ}` for every base-grid cube, from which
/// `N_Q(x) = sup_{R∈D(Q), R∋x} |·|^{α/d+1/q-1/p} |U(x)^{1/q} V_R^{p,Φ}|_op`
/// is evaluated for any `Q`.
pub struct NqTable {
    lat: Lattice,
    u_root: Vec<Mat>,
    v_red: Vec<Vec<Mat>>,
    exponent: f64,
    scaling: NqScaling,
}

impl NqTable {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        u: &WeightField,
        v: &WeightField,
        alpha: f64,
        p: f64,
        q: f64,
        phi: &YoungFn,
        scaling: NqScaling,
        mvee: &MveeOptions,
    ) -> Result<Self> {
        if u.lattice() != v.lattice() || u.n() != v.n() {
            return Err(Error::DimensionMismatch("U and V differ in shape".into()));
        }
        let lat = *u.lattice();
        let v_neg = v.matrix_power(-1.0 / p)?;
        let mut v_red = Vec::with_capacity(lat.level as usize + 1);
        for k in 0..=lat.level as i32 {
            let mut row = Vec::new();
            for c in grid_cubes(&lat, [0; MAX_D], k) {
                let b = c.block(&lat).expect("base cube inside box");
                let r = reducing_auto(&slice(&v_neg, &b), phi, mvee)?;
                row.push(r.matrix);
            }
            v_red.push(row);
        }
        Ok(NqTable {
            lat,
            u_root: u.matrix_power(1.0 / q)?.cells().to_vec(),
            v_red,
            exponent: alpha / lat.d as f64 + 1.0 / q - 1.0 / p,
            scaling,
        })
    }

    /// `N_Q` on the cells of `cube`, in block order.
    pub fn field(&self, cube: &Cube) -> Vec<f64> {
        let lat = &self.lat;
        let d = lat.d;
        let top = lat.level as i32;
        let b = cube.block(lat).expect("base cube inside box");
        let outer = lat.block_measure(&b).powf(self.exponent);
        b.cells(lat)
            .map(|x| {
                let j = lat.coords(x);
                let mut best: f64 = 0.0;
                for k in cube.level..=top {
                    let shift = (top - k) as u32;
                    let count = 1usize << k;
                    let idx = (0..d).fold(0, |acc, i| acc * count + (j[i] >> shift));
                    let s = match self.scaling {
                        NqScaling::Inner => 2f64.powf(-(k as f64) * d as f64 * self.exponent) * lat.side.powf(d as f64 * self.exponent),
                        NqScaling::Outer => outer,
                    };
                    best = best.max(s * self.u_root[x].mul(&self.v_red[k as usize][idx]).op_norm());
                }
                best
            })
            .collect()
    }

    /// `sup_Q (avg_Q N_Q^q)^{1/q}` with the attaining cube.
    pub fn scan_power_mean(&self, q: f64) -> (f64, String) {
        self.scan(|vals| (vals.iter().map(|v| v.powf(q)).sum::<f64>() / vals.len() as f64).powf(1.0 / q))
    }

    /// `sup_Q ‖N_Q‖_{Ψ,Q}` with the attaining cube.
    pub fn scan_orlicz(&self, psi: &YoungFn) -> (f64, String) {
        let mut scratch = Vec::new();
        self.scan(|vals| luxemburg_iter(vals.iter().copied(), &mut scratch, psi))
    }

    fn scan(&self, mut g: impl FnMut(&[f64]) -> f64) -> (f64, String) {
        let mut best = (f64::NEG_INFINITY, String::new());
        for k in 0..=self.lat.level as i32 {
            for c in grid_cubes(&self.lat, [0; MAX_D], k) {
                let v = g(&self.field(&c));
                if v > best.0 {
                    best = (v, c.to_string());
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weights_give_hardy_littlewood() {
        let lat = Lattice::new(1, 4).unwrap();
        let id = WeightField::identity(lat, 2);
        let vals: Vec<f64> = (0..32).map(|i| ((i * 5 % 9) as f64 - 4.0) * 0.5).collect();
        let f = GridFunction::new(lat, 2, vals).unwrap();
        let mags = f.magnitudes();
        let m = matrix_maximal(&id, &id, 0.0, 2.0, 2.0, &f, MaximalMode::SingleGrid).unwrap();
        let hl = dyadic_maximal(&lat, &mags, MaximalMode::SingleGrid).unwrap();
        for (a, b) in m.iter().zip(&hl) {
            assert!((a - b).abs() < 1e-12);
        }
        let aux = aux_maximal(&id, &id, 0.0, 2.0, 3.0, &f, MaximalMode::SingleGrid, &MveeOptions::default()).unwrap();
        for (a, b) in aux.iter().zip(&hl) {
            assert!((a - b).abs() < 1e-9);
        }
        let shifted = matrix_maximal(&id, &id, 0.0, 2.0, 2.0, &f, MaximalMode::ShiftedUnion).unwrap();
        assert!(shifted.iter().zip(&m).all(|(s, m)| s >= m));
    }

    #[test]
    fn single_cell_spike() {
        // brute force over ancestors: value at a cell is max over common
        // ancestors of 1/#cells
        let lat = Lattice::new(1, 4).unwrap();
        let mut v = vec![0.0; 16];
        v[5] = 1.0;
        let m = dyadic_maximal(&lat, &v, MaximalMode::SingleGrid).unwrap();
        for x in 0..16usize {
            let mut best: f64 = 0.0;
            for k in 0..=4u32 {
                let side = 16 >> k;
                if x / side == 5 / side {
                    best = best.max(1.0 / side as f64);
                }
            }
            assert_eq!(m[x], best);
        }
    }

    #[test]
    fn orlicz_maximal_anchors() {
        let lat = Lattice::new(2, 3).unwrap();
        let ones = vec![1.0; lat.num_cells()];
        let phi = YoungFn::power_log(2.0, 1.0).unwrap().normalized().unwrap();
        let m = orlicz_maximal(&lat, &phi, 0.0, &ones, MaximalMode::SingleGrid).unwrap();
        assert!(m.iter().all(|v| (v - 1.0).abs() < 1e-9));
        let f: Vec<f64> = (0..lat.num_cells()).map(|i| (i % 5) as f64).collect();
        let a = orlicz_maximal(&lat, &YoungFn::power(1.0).unwrap(), 0.0, &f, MaximalMode::SingleGrid).unwrap();
        let b = dyadic_maximal(&lat, &f, MaximalMode::SingleGrid).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9 * y.max(1.0));
        }
    }

    #[test]
    fn nq_identity_is_one() {
        let lat = Lattice::new(1, 4).unwrap();
        let id = WeightField::identity(lat, 2);
        let phi = YoungFn::power_log(2.0, 2.0).unwrap().normalized().unwrap();
        let (p, q) = (2.0, 4.0);
        let alpha = 1.0 / p - 1.0 / q;
        let t = NqTable::new(&id, &id, alpha, p, q, &phi, NqScaling::Inner, &MveeOptions::default()).unwrap();
        for v in t.field(&lat.root()) {
            assert!((v - 1.0).abs() < 1e-6);
        }
    }
}
