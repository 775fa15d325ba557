//! Discrete convolution with the bump `(1 - |x|²)²` on the unit ball,
//! rescaled to radius `t` and normalized to mass one on the lattice.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{check_field, weighted_norm};
use crate::dyadic::MAX_D;
use crate::error::{domain, Result};
use crate::weights::{GridFunction, WeightField};

#[derive(Clone, Debug, PartialEq)]
pub struct Mollified {
    pub values: GridFunction,
    /// Cells whose stencil was truncated by the box boundary.
    pub boundary: Vec<bool>,
}

/// `φ_t ∗ f`, with the stencil truncated (not reflected) at the boundary.
pub fn mollify(t: f64, f: &GridFunction) -> Result<Mollified> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(domain(format!("mollifier radius must be positive, got {t}")));
    }
    let lat = *f.lattice();
    let d = lat.d;
    let h = lat.block_length(1);
    let reach = (t / h).ceil() as i64;
    let mut stencil: Vec<([i64; MAX_D], f64)> = Vec::new();
    let width = (2 * reach + 1) as usize;
    for flat in 0..width.pow(d as u32) {
        let mut r = flat;
        let mut off = [0i64; MAX_D];
        for i in (0..d).rev() {
            off[i] = (r % width) as i64 - reach;
            r /= width;
        }
        let s2: f64 = off[..d].iter().map(|&o| (o as f64 * h / t).powi(2)).sum();
        if s2 < 1.0 {
            stencil.push((off, (1.0 - s2).powi(2)));
        }
    }
    let mass: f64 = stencil.iter().map(|s| s.1).sum();
    let n = f.n();
    let per = lat.per_side() as i64;
    let mut out = GridFunction::zeros(lat, n);
    let mut boundary = vec![false; lat.num_cells()];
    for x in 0..lat.num_cells() {
        let j = lat.coords(x);
        let mut acc = [0.0; 4];
        for (off, w) in &stencil {
            let mut k = [0usize; MAX_D];
            let mut inside = true;
            for i in 0..d {
                let c = j[i] as i64 + off[i];
                if c < 0 || c >= per {
                    inside = false;
                    break;
                }
                k[i] = c as usize;
            }
            if !inside {
                boundary[x] = true;
                continue;
            }
            let y = lat.flat(&k[..d]);
            for (a, v) in acc[..n].iter_mut().zip(f.at(y)) {
                *a += w / mass * v;
            }
        }
        out.at_mut(x).copy_from_slice(&acc[..n]);
    }
    Ok(Mollified { values: out, boundary })
}

/// Ratios and `t → 0` deviations along a ladder of radii.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxIdentity {
    pub radii: Vec<f64>,
    /// `‖φ_t ∗ f‖_{L^p(U)} / ‖f‖_{L^p(V)}`
    pub ratios: Vec<f64>,
    /// `‖φ_t ∗ f − f‖_{L^p(U)}`
    pub deviations: Vec<f64>,
    pub sup_ratio: f64,
}

pub fn approx_identity_check(u: &WeightField, v: &WeightField, p: f64, f: &GridFunction, radii: &[f64]) -> Result<ApproxIdentity> {
    check_field(u, f)?;
    check_field(v, f)?;
    let u_root = u.matrix_power(1.0 / p)?;
    let base = weighted_norm(v.matrix_power(1.0 / p)?.cells(), f, p);
    if base == 0.0 {
        return Err(domain("test function has zero norm"));
    }
    let mut ratios = Vec::with_capacity(radii.len());
    let mut deviations = Vec::with_capacity(radii.len());
    for &t in radii {
        let m = mollify(t, f)?;
        ratios.push(weighted_norm(u_root.cells(), &m.values, p) / base);
        let mut diff = m.values.clone();
        for (a, b) in diff.values_mut().iter_mut().zip(f.values()) {
            *a -= b;
        }
        deviations.push(weighted_norm(u_root.cells(), &diff, p));
    }
    let sup_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(ApproxIdentity { radii: radii.to_vec(), ratios, deviations, sup_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::Lattice;

    #[test]
    fn constants_are_fixed_in_the_interior() {
        let lat = Lattice::new(2, 5).unwrap();
        let f = GridFunction::constant(lat, &[3.0, -1.0]);
        let m = mollify(0.15, &f).unwrap();
        for i in 0..lat.num_cells() {
            if !m.boundary[i] {
                assert!((m.values.at(i)[0] - 3.0).abs() < 1e-12);
                assert!((m.values.at(i)[1] + 1.0).abs() < 1e-12);
            }
        }
        assert!(m.boundary.iter().any(|&b| b) && m.boundary.iter().any(|&b| !b));
    }

    #[test]
    fn young_inequality_for_identity_weights() {
        let lat = Lattice::new(1, 7).unwrap();
        let id = WeightField::identity(lat, 1);
        let f = GridFunction::from_scalars(lat, (0..128).map(|i| (i * 37 % 17) as f64 - 8.0).collect()).unwrap();
        let radii: Vec<f64> = (1..=5).map(|j| 2f64.powi(-j)).collect();
        let r = approx_identity_check(&id, &id, 2.0, &f, &radii).unwrap();
        assert!(r.sup_ratio <= 1.0 + 1e-12);
    }
}
