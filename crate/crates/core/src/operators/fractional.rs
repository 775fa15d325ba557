//! Discretized fractional integral `I_α f(x) = ∫ f(y) |x-y|^{α-d} dy`.
//!
//! Distinct cells use the midpoint kernel. In one dimension the same-cell
//! and adjacent-cell interactions are integrated exactly over the cell
//! pair (averaged in `x`); in higher dimension the same-cell term replaces
//! the cell by the ball of equal volume, giving `c_{α,d} h^α`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::dyadic::{Lattice, MAX_D};
use crate::error::{domain, Result};
use crate::weights::GridFunction;

/// `c_{α,d}` with `∫_{B_ρ} |z|^{α-d} dz = c_{α,d} h^α` for the ball `B_ρ`
/// of volume `h^d`. For `d = 2` this is `2π^{1-α/2}/α`.
pub fn same_cell_constant(d: usize, alpha: f64) -> f64 {
    use core::f64::consts::PI;
    let (surface, volume) = match d {
        1 => (2.0, 2.0),
        2 => (2.0 * PI, PI),
        _ => (4.0 * PI, 4.0 * PI / 3.0),
    };
    // ρ = h · volume^{-1/d}
    surface * volume.powf(-alpha / d as f64) / alpha
}

fn check_alpha(d: usize, alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < d as f64) {
        return Err(domain(format!("fractional integral needs 0 < α < d = {d}, got {alpha}")));
    }
    Ok(())
}

/// `G(t) = |t|^{α+1}/(α(α+1))`, so that `G'' = |t|^{α-1}`.
fn g1(alpha: f64, t: f64) -> f64 {
    t.abs().powf(alpha + 1.0) / (alpha * (alpha + 1.0))
}

/// Kernel weight between cells whose coordinates differ by `off`.
fn kernel(lat: &Lattice, alpha: f64, off: &[i64]) -> f64 {
    let d = lat.d;
    let h = lat.block_length(1);
    if d == 1 && off[0].abs() <= 1 {
        let t = off[0] as f64 * h;
        return (g1(alpha, t + h) - 2.0 * g1(alpha, t) + g1(alpha, t - h)) / h;
    }
    if off[..d].iter().all(|&o| o == 0) {
        return same_cell_constant(d, alpha) * h.powf(alpha);
    }
    let r2: f64 = off[..d].iter().map(|&o| (o as f64 * h).powi(2)).sum();
    r2.powf(0.5 * (alpha - d as f64)) * h.powi(d as i32)
}

/// `I_α f` at every cell.
pub fn frac_integral(alpha: f64, f: &GridFunction) -> Result<GridFunction> {
    let lat = *f.lattice();
    let d = lat.d;
    check_alpha(d, alpha)?;
    let side = lat.per_side() as i64;
    let span = (2 * side - 1) as usize;
    // kernel by offset, offsets shifted to be nonnegative
    let mut table = vec![0.0; span.pow(d as u32)];
    for (flat, k) in table.iter_mut().enumerate() {
        let mut r = flat;
        let mut off = [0i64; MAX_D];
        for i in (0..d).rev() {
            off[i] = (r % span) as i64 - (side - 1);
            r /= span;
        }
        *k = kernel(&lat, alpha, &off);
    }
    let n = f.n();
    let cells = lat.num_cells();
    let coords: Vec<[usize; MAX_D]> = (0..cells).map(|i| lat.coords(i)).collect();
    let mut out = GridFunction::zeros(lat, n);
    for x in 0..cells {
        let jx = coords[x];
        let mut acc = [0.0; 4];
        for (y, jy) in coords.iter().enumerate() {
            let idx = (0..d).fold(0, |a, i| a * span + (jy[i] as i64 - jx[i] as i64 + side - 1) as usize);
            let k = table[idx];
            for (a, v) in acc[..n].iter_mut().zip(f.at(y)) {
                *a += k * v;
            }
        }
        out.at_mut(x).copy_from_slice(&acc[..n]);
    }
    Ok(out)
}

/// `I_α f` at an arbitrary point (box units times the box side). In one
/// dimension the cell of `x` and its two neighbours are integrated exactly;
/// otherwise the midpoint kernel is used, except for the cell containing
/// `x` in higher dimension.
pub fn frac_integral_at(alpha: f64, f: &GridFunction, x: &[f64]) -> Result<Vec<f64>> {
    let lat = *f.lattice();
    let d = lat.d;
    check_alpha(d, alpha)?;
    let h = lat.block_length(1);
    let n = f.n();
    let mut acc = vec![0.0; n];
    let antideriv = |s: f64| s.signum() * s.abs().powf(alpha) / alpha;
    for y in 0..lat.num_cells() {
        let mid = lat.midpoint(y);
        let k = if d == 1 && ((x[0] / h).floor() - (mid[0] / h).floor()).abs() <= 1.0 {
            let (a, b) = (mid[0] - 0.5 * h - x[0], mid[0] + 0.5 * h - x[0]);
            antideriv(b) - antideriv(a)
        } else {
            let inside = (0..d).all(|i| (x[i] - mid[i]).abs() < 0.5 * h);
            if inside {
                same_cell_constant(d, alpha) * h.powf(alpha)
            } else {
                let r2: f64 = (0..d).map(|i| (x[i] - mid[i]).powi(2)).sum();
                r2.powf(0.5 * (alpha - d as f64)) * h.powi(d as i32)
            }
        };
        for (a, v) in acc.iter_mut().zip(f.at(y)) {
            *a += k * v;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::Lattice;

    #[test]
    fn point_evaluation_anchor() {
        let lat = Lattice::new(1, 0).unwrap();
        let f = GridFunction::constant(lat, &[1.0]);
        let v = frac_integral_at(0.5, &f, &[2.0]).unwrap();
        assert!((v[0] - 1.5f64.powf(-0.5)).abs() < 1e-15);
        assert!((v[0] - 0.8165).abs() < 1e-4);
    }

    #[test]
    fn near_field_matches_quadrature() {
        // averaged double integral over a cell pair against a fine midpoint rule
        let lat = Lattice::new(1, 3).unwrap();
        let alpha = 0.5;
        let h = lat.block_length(1);
        for off in [0i64, 1] {
            let exact = kernel(&lat, alpha, &[off, 0, 0]);
            let m = 4000;
            let mut s = 0.0;
            for i in 0..m {
                let x = (i as f64 + 0.5) / m as f64 * h;
                let a = off as f64 * h - x;
                let b = a + h;
                let anti = |t: f64| t.signum() * t.abs().powf(alpha) / alpha;
                s += anti(b) - anti(a);
            }
            s /= m as f64;
            assert!((exact - s).abs() < 1e-6 * exact, "{off}: {exact} {s}");
        }
    }

    #[test]
    fn disc_constant_in_the_plane() {
        let a: f64 = 0.7;
        let expect = 2.0 * core::f64::consts::PI.powf(1.0 - a / 2.0) / a;
        assert!((same_cell_constant(2, a) - expect).abs() < 1e-14);
    }

    #[test]
    fn refinement_is_stable_for_smooth_data() {
        let smooth = |x: f64| (core::f64::consts::PI * x).sin();
        let at = |level: u32| {
            let lat = Lattice::new(1, level).unwrap();
            let v = (0..lat.num_cells()).map(|i| smooth(lat.midpoint(i)[0])).collect();
            let f = GridFunction::from_scalars(lat, v).unwrap();
            (lat, frac_integral(0.5, &f).unwrap())
        };
        let (l1, a) = at(6);
        let (_, b) = at(8);
        for i in 8..56 {
            let x = l1.midpoint(i)[0];
            // the fine cells 4i+1, 4i+2 straddle the coarse midpoint
            let fine = 0.5 * (b.at(4 * i + 1)[0] + b.at(4 * i + 2)[0]);
            let rel = (a.at(i)[0] - fine).abs() / fine;
            assert!(rel < 0.02, "x={x}: {rel}");
        }
    }
}
