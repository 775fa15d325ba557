//! Closed-form values used to cross-check the general machinery.

#[allow(unused_imports)]
use num_traits::Float;

use crate::dyadic::{census_cubes, Block, Census, Lattice};
use crate::error::{domain, Result};
use crate::weights::WeightField;

/// `‖U^{1/2} A_Q V^{-1/2}‖_{L²→L²}` for the single averaging operator
/// `A_Q f = |Q|^{α/d} 1_Q ⨍_Q f`, which equals
/// `|Q|^{α/d} λ_max((⨍U)^{1/2} (⨍V^{-1}) (⨍U)^{1/2})^{1/2}`.
pub fn exact_avg_norm_p2(u: &WeightField, v: &WeightField, block: &Block, alpha: f64) -> Result<f64> {
    let lat = u.lattice();
    let avg_u = u.average(block);
    let avg_vinv = v.matrix_power(-1.0)?.average(block);
    let root = avg_u.sym_pow(0.5)?;
    let m = root.mul(&avg_vinv).mul(&root);
    let scale = lat.block_measure(block).powf(alpha / lat.d as f64);
    Ok(scale * m.sym_eigen().max().max(0.0).sqrt())
}

fn averages(lat: &Lattice, w: &[f64], b: &Block, f: impl Fn(f64) -> f64) -> f64 {
    b.cells(lat).map(|x| f(w[x])).sum::<f64>() / b.len() as f64
}

/// Scalar `[w]_{A_p} = sup_Q ⨍w (⨍w^{-1/(p-1)})^{p-1}`, with the `p = 1`
/// form `sup_Q ⨍w · ess sup_Q w^{-1}`.
pub fn scalar_ap(lat: &Lattice, w: &[f64], p: f64, census: Census) -> Result<f64> {
    scalar_apq(lat, w, w, p, p, 0.0, census).map(|a| a.powf(p))
}

/// Scalar two-weight `sup_Q |Q|^{α/d+1/q-1/p} (⨍u)^{1/q} (⨍v^{-p'/p})^{1/p'}`
/// (`ess sup_Q v^{-1}` for `p = 1`).
pub fn scalar_apq(lat: &Lattice, u: &[f64], v: &[f64], p: f64, q: f64, alpha: f64, census: Census) -> Result<f64> {
    if u.len() != lat.num_cells() || v.len() != lat.num_cells() {
        return Err(domain("weight length does not match the lattice"));
    }
    if !(p >= 1.0 && q >= 1.0) {
        return Err(domain("need p, q >= 1"));
    }
    let d = lat.d as f64;
    let mut best = 0.0f64;
    for c in census_cubes(lat, census) {
        let b = c.block;
        let au = averages(lat, u, &b, |x| x).powf(1.0 / q);
        let av = if p == 1.0 {
            b.cells(lat).map(|x| 1.0 / v[x]).fold(0.0, f64::max)
        } else {
            let pp = p / (p - 1.0);
            averages(lat, v, &b, |x| x.powf(-pp / p)).powf(1.0 / pp)
        };
        let scale = lat.block_measure(&b).powf(alpha / d + 1.0 / q - 1.0 / p);
        best = best.max(scale * au * av);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{matrix_ap, two_weight_apq};

    #[test]
    fn halves_anchor() {
        let lat = Lattice::new(1, 1).unwrap();
        let w = [1.0, 4.0];
        // (5/2)(5/8) = 25/16
        assert!((scalar_ap(&lat, &w, 2.0, Census::Dyadic).unwrap() - 1.5625).abs() < 1e-14);
        let field = WeightField::from_scalars(lat, &w).unwrap();
        let r = exact_avg_norm_p2(&field, &field, &lat.full_block(), 0.0).unwrap();
        assert!((r - 1.25).abs() < 1e-14);
    }

    #[test]
    fn scalar_oracle_agrees_with_matrix_code_for_n1() {
        let lat = Lattice::new(1, 5).unwrap();
        let u: alloc::vec::Vec<f64> = (0..32).map(|i| 1.0 + ((i * 13) % 7) as f64).collect();
        let v: alloc::vec::Vec<f64> = (0..32).map(|i| 0.5 + ((i * 5) % 11) as f64 / 3.0).collect();
        let (fu, fv) = (WeightField::from_scalars(lat, &u).unwrap(), WeightField::from_scalars(lat, &v).unwrap());
        for (p, q, a) in [(2.0, 2.0, 0.0), (1.5, 3.0, 1.0 / 3.0), (1.0, 2.0, 0.5)] {
            let s = scalar_apq(&lat, &u, &v, p, q, a, Census::Dyadic).unwrap();
            let m = two_weight_apq(&fu, &fv, p, q, a, Census::Dyadic).unwrap().value;
            assert!((s - m).abs() < 1e-10 * s, "{p} {q}: {s} vs {m}");
        }
        let s = scalar_ap(&lat, &u, 3.0, Census::Shifted).unwrap();
        let m = matrix_ap(&fu, 3.0, Census::Shifted).unwrap().value;
        assert!((s - m).abs() < 1e-10 * s);
    }
}
