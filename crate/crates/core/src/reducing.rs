//! Reducing operators: constant matrices `R` with `|R e| ≈ ‖A e‖_{Ψ,Q}`.
//!
//! For `Ψ = t^2` the norm is exactly Euclidean, `‖Ae‖²_{2,Q} =
//! e·(avg AᵀA)e`, and `R = (avg AᵀA)^{1/2}`. Otherwise the unit ball of
//! `e ↦ ‖Ae‖_{Ψ,Q}` is sampled along a deterministic set of directions, the
//! minimum-volume enclosing ellipsoid of the symmetric point cloud is
//! computed with the Todd–Yildirim variant of Khachiyan's algorithm (with
//! away steps), and the ellipsoid is shrunk to the largest homothetic copy
//! that still lies inside the sampled ball. By John's theorem the shrink
//! factor is at least `1/√n`, so `‖Ae‖ <= |Re| <= √n ‖Ae‖` up to sampling.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat, MAX_N};
use crate::young::{luxemburg_unchecked, YoungFn};

/// How a reducing operator was obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    ExactP2,
    Mvee {
        directions: usize,
        eps: f64,
        iterations: usize,
        /// Factor by which the enclosing ellipsoid was shrunk.
        shrink: f64,
    },
}

/// A constant SPD matrix standing in for `e ↦ ‖A e‖_{Ψ,Q}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducingOp {
    pub matrix: Mat,
    pub provenance: Provenance,
    /// Cube the norm is localized to.
    pub cube: String,
    /// Which weight power and Young function this represents, e.g.
    /// `U^{1/q}, power(2)`.
    pub role: String,
}

impl ReducingOp {
    pub fn with_label(mut self, cube: impl Into<String>, role: impl Into<String>) -> Self {
        self.cube = cube.into();
        self.role = role.into();
        self
    }
}

/// Directions whose norm falls below this fraction of the largest one
/// count as a null direction of `A`.
const DEGENERATE_RATIO: f64 = 1e-12;

/// Settings of the ellipsoid fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MveeOptions {
    /// Number of sampled directions (on a half sphere; antipodes implied).
    /// `0` picks the default for the dimension.
    pub directions: usize,
    pub eps: f64,
    pub max_iterations: usize,
    /// Seed for the random direction set used when `n = 4`.
    pub seed: u64,
    /// Resample directions in the coordinates of a first fit.
    pub two_pass: bool,
}

impl Default for MveeOptions {
    fn default() -> Self {
        MveeOptions { directions: 0, eps: 1e-7, max_iterations: 100_000, seed: 0x5eed, two_pass: true }
    }
}

/// Default direction count: 2, 64, 512, 1024 for `n = 1..4`.
pub fn default_directions(n: usize) -> usize {
    match n {
        1 => 1,
        2 => 64,
        3 => 512,
        _ => 1024,
    }
}

/// Deterministic unit directions on a half sphere of ℝ^n.
pub fn direction_set(n: usize, count: usize, seed: u64) -> Vec<[f64; MAX_N]> {
    let count = count.max(1);
    match n {
        1 => alloc::vec![[1.0, 0.0, 0.0, 0.0]],
        2 => (0..count)
            .map(|i| {
                let a = core::f64::consts::PI * i as f64 / count as f64;
                [a.cos(), a.sin(), 0.0, 0.0]
            })
            .collect(),
        3 => {
            // Fibonacci lattice on the upper hemisphere
            let golden = core::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let z = 1.0 - (i as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let th = golden * i as f64;
                    [r * th.cos(), r * th.sin(), z, 0.0]
                })
                .collect()
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out = Vec::with_capacity(count + n);
            for i in 0..n {
                let mut e = [0.0; MAX_N];
                e[i] = 1.0;
                out.push(e);
            }
            while out.len() < count.max(n) {
                let mut v = [0.0; MAX_N];
                for x in v[..n].iter_mut() {
                    *x = StandardNormal.sample(&mut rng);
                }
                let len = crate::linalg::norm(&v[..n]);
                if len > 1e-12 {
                    for x in v[..n].iter_mut() {
                        *x /= len;
                    }
                    out.push(v);
                }
            }
            out
        }
    }
}

/// `R = (avg_Q AᵀA)^{1/2}`, so that `|Re| = ‖Ae‖_{2,Q}` for every `e`.
pub fn reducing_exact_p2(slice: &[Mat]) -> Result<ReducingOp> {
    if slice.is_empty() {
        return Err(crate::error::domain("reducing operator over an empty cube"));
    }
    let n = slice[0].dim();
    let mut acc = Mat::zeros(n);
    for a in slice {
        acc = acc.add(&a.transpose().mul(a));
    }
    let avg = acc.scale(1.0 / slice.len() as f64);
    if !(avg.sym_eigen().min() > 0.0) {
        return Err(Error::Degenerate("average of AᵀA is singular".into()));
    }
    let matrix = avg.sym_pow(0.5)?;
    Ok(ReducingOp { matrix, provenance: Provenance::ExactP2, cube: String::new(), role: String::new() })
}

/// `‖A e‖_{Ψ,Q}` for a matrix slice.
pub fn direction_norm(slice: &[Mat], psi: &YoungFn, e: &[f64], scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    let mut vmax: f64 = 0.0;
    for a in slice {
        let v = a.apply_norm(e);
        vmax = vmax.max(v);
        scratch.push(v);
    }
    if vmax == 0.0 {
        return 0.0;
    }
    luxemburg_unchecked(scratch, vmax, psi)
}

/// Reducing operator for `e ↦ ‖A e‖_{Ψ,Q}` from the ellipsoid fit. Uses
/// the exact formula when `n = 1`.
pub fn reducing_mvee(slice: &[Mat], psi: &YoungFn, opts: &MveeOptions) -> Result<ReducingOp> {
    if slice.is_empty() {
        return Err(crate::error::domain("reducing operator over an empty cube"));
    }
    let n = slice[0].dim();
    let mut scratch = Vec::with_capacity(slice.len());
    let count = if opts.directions == 0 { default_directions(n) } else { opts.directions };
    let base = direction_set(n, count, opts.seed);
    if n == 1 {
        let v = direction_norm(slice, psi, &[1.0], &mut scratch);
        if !(v > 0.0) {
            return Err(Error::Degenerate("zero Luxemburg norm".into()));
        }
        let prov = Provenance::Mvee { directions: 1, eps: opts.eps, iterations: 0, shrink: 1.0 };
        return Ok(ReducingOp { matrix: Mat::scalar(v), provenance: prov, cube: String::new(), role: String::new() });
    }
    let boundary = |dirs: &[[f64; MAX_N]], scratch: &mut Vec<f64>| -> Result<Vec<[f64; MAX_N]>> {
        let norms: Vec<f64> = dirs.iter().map(|u| direction_norm(slice, psi, &u[..n], scratch)).collect();
        let top = norms.iter().fold(0.0f64, |a, &b| a.max(b));
        let mut pts = Vec::with_capacity(dirs.len());
        for (u, &v) in dirs.iter().zip(&norms) {
            if !(v > DEGENERATE_RATIO * top) || !v.is_finite() {
                return Err(Error::Degenerate(format!("Luxemburg norm {v} along direction {:?}", &u[..n])));
            }
            let mut p = *u;
            for x in p[..n].iter_mut() {
                *x /= v;
            }
            pts.push(p);
        }
        Ok(pts)
    };
    let pts = boundary(&base, &mut scratch)?;
    let (mut r, mut iters, mut shrink) = fit(&pts, n, opts)?;
    if opts.two_pass {
        // whiten: sample u ∝ R⁻¹ v so points spread evenly over the ellipsoid
        let rinv = r.sym_inverse();
        let mut buf = [0.0; MAX_N];
        let dirs: Vec<[f64; MAX_N]> = base
            .iter()
            .map(|v| {
                rinv.apply_into(&v[..n], &mut buf[..n]);
                let len = crate::linalg::norm(&buf[..n]);
                let mut u = [0.0; MAX_N];
                for i in 0..n {
                    u[i] = buf[i] / len;
                }
                u
            })
            .collect();
        let mut all = pts;
        all.extend(boundary(&dirs, &mut scratch)?);
        let (r2, it2, s2) = fit(&all, n, opts)?;
        r = r2;
        iters += it2;
        shrink = s2;
    }
    let prov = Provenance::Mvee { directions: count, eps: opts.eps, iterations: iters, shrink };
    Ok(ReducingOp { matrix: r, provenance: prov, cube: String::new(), role: String::new() })
}

/// Minimum-volume enclosing ellipsoid of `±pts`, returned as the matrix of
/// its largest homothetic copy with every point on or outside it.
fn fit(pts: &[[f64; MAX_N]], n: usize, opts: &MveeOptions) -> Result<(Mat, usize, f64)> {
    let (x, iters) = khachiyan(pts, n, opts)?;
    // MVEE = {e : eᵀ (nX)⁻¹ e <= 1}
    let r_out = x.scale(n as f64).sym_pow(-0.5)?;
    let shrink = pts.iter().map(|p| r_out.apply_norm(&p[..n])).fold(f64::INFINITY, f64::min);
    Ok((r_out.scale(1.0 / shrink), iters, shrink))
}

/// Weighted second-moment matrix `X = Σ u_i p_i p_iᵀ` of the optimal
/// design; the enclosing ellipsoid is `{e : eᵀ X⁻¹ e <= n}`.
fn khachiyan(pts: &[[f64; MAX_N]], n: usize, opts: &MveeOptions) -> Result<(Mat, usize)> {
    let m = pts.len();
    let nf = n as f64;
    let moment = |u: &[f64]| {
        let mut x = Mat::zeros(n);
        for (p, &w) in pts.iter().zip(u) {
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                for j in 0..n {
                    x.set(i, j, x.get(i, j) + w * p[i] * p[j]);
                }
            }
        }
        x
    };
    let quad = |xinv: &Mat, p: &[f64; MAX_N]| {
        let mut s = 0.0;
        for i in 0..n {
            let mut t = 0.0;
            for j in 0..n {
                t += xinv.get(i, j) * p[j];
            }
            s += p[i] * t;
        }
        s
    };
    // symmetric point sets are often solved by the uniform design already
    let uniform = alloc::vec![1.0 / m as f64; m];
    let xinv = moment(&uniform).sym_inverse();
    let gap = pts.iter().map(|p| quad(&xinv, p)).fold(f64::NEG_INFINITY, f64::max) / nf - 1.0;
    let mut u = if gap <= opts.eps { uniform } else { barrier_design(pts, n).unwrap_or(uniform) };
    let mut residual = f64::INFINITY;
    for it in 0..opts.max_iterations {
        let x = moment(&u);
        let xinv = x.sym_inverse();
        let mut jmax = 0;
        let mut gmax = f64::NEG_INFINITY;
        let mut jmin = usize::MAX;
        let mut gmin = f64::INFINITY;
        for (i, p) in pts.iter().enumerate() {
            let g = quad(&xinv, p);
            if g > gmax {
                gmax = g;
                jmax = i;
            }
            if u[i] > 0.0 && g < gmin {
                gmin = g;
                jmin = i;
            }
        }
        let up = gmax / nf - 1.0;
        let down = 1.0 - gmin / nf;
        residual = up;
        // {eᵀX⁻¹e <= 1} lies in the hull for any design, so only the outer
        // condition needs a tolerance
        if up <= opts.eps {
            return Ok((x, it));
        }
        if up >= down {
            let beta = up / (gmax - 1.0);
            for w in u.iter_mut() {
                *w *= 1.0 - beta;
            }
            u[jmax] += beta;
        } else {
            let cap = u[jmin] / (1.0 - u[jmin]);
            let beta = if gmin > 1.0 { (down / (gmin - 1.0)).min(cap) } else { cap };
            for w in u.iter_mut() {
                *w *= 1.0 + beta;
            }
            u[jmin] -= beta;
            if u[jmin] < 1e-300 {
                u[jmin] = 0.0;
            }
        }
    }
    Err(Error::NoConvergence { what: "minimum-volume ellipsoid", residual })
}

/// Near-optimal design from a log-barrier Newton solve of
/// `max log det M` subject to `pᵀ M p <= 1`, over the `n(n+1)/2` entries of
/// `M`. The barrier multipliers `1/(t(1 - pᵀMp))` are the design weights.
fn barrier_design(pts: &[[f64; MAX_N]], n: usize) -> Option<Vec<f64>> {
    let m = pts.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a..n).map(move |b| (a, b))).collect();
    let k = pairs.len();
    let feats: Vec<Vec<f64>> = pts
        .iter()
        .map(|p| pairs.iter().map(|&(a, b)| if a == b { p[a] * p[a] } else { 2.0 * p[a] * p[b] }).collect())
        .collect();
    let build = |theta: &[f64]| {
        let mut mat = Mat::zeros(n);
        for (&(a, b), &v) in pairs.iter().zip(theta) {
            mat.set(a, b, v);
            mat.set(b, a, v);
        }
        mat
    };
    let slack = |theta: &[f64]| -> Option<Vec<f64>> {
        let mut out = Vec::with_capacity(m);
        for f in &feats {
            let s = 1.0 - f.iter().zip(theta).map(|(x, y)| x * y).sum::<f64>();
            if !(s > 0.0) {
                return None;
            }
            out.push(s);
        }
        Some(out)
    };
    let objective = |theta: &[f64], t: f64| -> Option<f64> {
        let mat = build(theta);
        let eig = mat.sym_eigen();
        if !(eig.min() > 0.0) {
            return None;
        }
        let logdet: f64 = eig.values().iter().map(|v| v.ln()).sum();
        Some(-t * logdet - slack(theta)?.iter().map(|s| s.ln()).sum::<f64>())
    };
    let top = pts.iter().map(|p| p[..n].iter().map(|x| x * x).sum::<f64>()).fold(0.0, f64::max);
    let mut theta: Vec<f64> = pairs.iter().map(|&(a, b)| if a == b { 0.5 / top } else { 0.0 }).collect();
    let mut t = 1.0;
    loop {
        for _ in 0..100 {
            let sl = slack(&theta)?;
            let minv = build(&theta).sym_inverse();
            let mut grad = alloc::vec![0.0; k];
            let mut hess = alloc::vec![0.0; k * k];
            for (i, &(a, b)) in pairs.iter().enumerate() {
                grad[i] = -t * if a == b { minv.get(a, a) } else { 2.0 * minv.get(a, b) };
                for (j, &(c, d)) in pairs.iter().enumerate() {
                    // tr(M⁻¹ E_ab M⁻¹ E_cd) with E the symmetric unit matrices
                    let term = |a: usize, b: usize, c: usize, d: usize| minv.get(b, c) * minv.get(d, a);
                    let mut h = term(a, b, c, d);
                    if c != d {
                        h += term(a, b, d, c);
                    }
                    if a != b {
                        h += term(b, a, c, d);
                        if c != d {
                            h += term(b, a, d, c);
                        }
                    }
                    hess[i * k + j] = t * h;
                }
            }
            for (f, s) in feats.iter().zip(&sl) {
                for i in 0..k {
                    grad[i] += f[i] / s;
                    for j in 0..k {
                        hess[i * k + j] += f[i] * f[j] / (s * s);
                    }
                }
            }
            let step = solve_dense(&mut hess, &grad.iter().map(|g| -g).collect::<Vec<f64>>(), k)?;
            let decrement: f64 = -step.iter().zip(&grad).map(|(x, g)| x * g).sum::<f64>();
            if decrement < 1e-8 {
                break;
            }
            let f0 = objective(&theta, t)?;
            let mut alpha = 1.0;
            loop {
                let trial: Vec<f64> = theta.iter().zip(&step).map(|(x, d)| x + alpha * d).collect();
                if let Some(f1) = objective(&trial, t) {
                    if f1 <= f0 - 0.25 * alpha * decrement {
                        theta = trial;
                        break;
                    }
                }
                alpha *= 0.5;
                if alpha < 1e-12 {
                    return None;
                }
            }
        }
        if m as f64 / t < 1e-10 {
            break;
        }
        t *= 20.0;
    }
    let sl = slack(&theta)?;
    let lambda: Vec<f64> = sl.iter().map(|s| 1.0 / (t * s)).collect();
    let total: f64 = lambda.iter().sum();
    Some(lambda.into_iter().map(|l| l / total).collect())
}

/// Gaussian elimination with partial pivoting on a dense `k × k` system.
fn solve_dense(a: &mut [f64], b: &[f64], k: usize) -> Option<Vec<f64>> {
    let mut x = b.to_vec();
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| a[i * k + col].abs().total_cmp(&a[j * k + col].abs()))?;
        if a[piv * k + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for j in 0..k {
                a.swap(piv * k + j, col * k + j);
            }
            x.swap(piv, col);
        }
        for i in col + 1..k {
            let f = a[i * k + col] / a[col * k + col];
            for j in col..k {
                a[i * k + j] -= f * a[col * k + j];
            }
            x[i] -= f * x[col];
        }
    }
    for col in (0..k).rev() {
        let s: f64 = (col + 1..k).map(|j| a[col * k + j] * x[j]).sum();
        x[col] = (x[col] - s) / a[col * k + col];
    }
    Some(x)
}

/// `|R1 R2|_op`.
pub fn reducing_opnorm_pair(r1: &ReducingOp, r2: &ReducingOp) -> Result<f64> {
    if r1.matrix.dim() != r2.matrix.dim() {
        return Err(Error::DimensionMismatch(format!("{} vs {}", r1.matrix.dim(), r2.matrix.dim())));
    }
    Ok(r1.matrix.mul(&r2.matrix).op_norm())
}

/// Reducing operator for `Ψ`, exact when `Ψ = t^2`.
pub fn reducing_auto(slice: &[Mat], psi: &YoungFn, opts: &MveeOptions) -> Result<ReducingOp> {
    if psi.is_square() {
        reducing_exact_p2(slice)
    } else {
        reducing_mvee(slice, psi, opts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(m: Mat) -> ReducingOp {
        ReducingOp { matrix: m, provenance: Provenance::ExactP2, cube: String::new(), role: String::new() }
    }

    #[test]
    fn exact_p2_examples() {
        let c = Mat::from_rows(&[&[2.0, 0.5], &[0.5, 1.0]]);
        let r = reducing_exact_p2(&[c, c, c]).unwrap();
        assert!(r.matrix.max_abs_diff(&c) < 1e-13);
        let a = Mat::diag(&[1.0, 2.0]);
        let b = Mat::diag(&[3.0, 1.0]);
        let r = reducing_exact_p2(&[a, b]).unwrap();
        assert!(r.matrix.max_abs_diff(&Mat::diag(&[5f64.sqrt(), 2.5f64.sqrt()])) < 1e-14);
        let r = reducing_exact_p2(&[Mat::scalar(1.0), Mat::scalar(3.0)]).unwrap();
        assert!((r.matrix.get(0, 0) - 5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn mvee_identity_and_scalar() {
        let psi = YoungFn::power_log(2.0, 1.0).unwrap().normalized().unwrap();
        for n in 2..=3 {
            let slice = alloc::vec![Mat::identity(n); 4];
            let r = reducing_mvee(&slice, &psi, &MveeOptions::default()).unwrap();
            assert!(r.matrix.max_abs_diff(&Mat::identity(n)) < 1e-6, "{:?}", r.matrix);
        }
        let slice = [Mat::scalar(1.0), Mat::scalar(3.0)];
        let r = reducing_mvee(&slice, &psi, &MveeOptions::default()).unwrap();
        let direct = crate::young::luxemburg_norm(&[1.0, 3.0], &psi).unwrap();
        assert_eq!(r.matrix.get(0, 0), direct);
    }

    #[test]
    fn mvee_matches_exact_for_squares() {
        let psi = YoungFn::power(2.0).unwrap();
        let slice = [
            Mat::from_rows(&[&[3.0, 1.0], &[1.0, 1.0]]),
            Mat::from_rows(&[&[1.0, -0.5], &[-0.5, 2.0]]),
            Mat::diag(&[0.2, 5.0]),
        ];
        let exact = reducing_exact_p2(&slice).unwrap();
        let fit = reducing_mvee(&slice, &psi, &MveeOptions::default()).unwrap();
        for e in direction_set(2, 997, 0) {
            let a = exact.matrix.apply_norm(&e[..2]);
            let b = fit.matrix.apply_norm(&e[..2]);
            assert!(b >= a * 0.95 && b <= a * 2f64.sqrt() * 1.05, "{a} {b}");
        }
    }

    #[test]
    fn degenerate_slice_is_an_error() {
        let psi = YoungFn::power(3.0).unwrap();
        let slice = [Mat::diag(&[1.0, 0.0])];
        assert!(matches!(reducing_mvee(&slice, &psi, &MveeOptions::default()), Err(Error::Degenerate(_))));
    }

    #[test]
    fn pair_norms() {
        assert_eq!(reducing_opnorm_pair(&op(Mat::identity(2)), &op(Mat::identity(2))).unwrap(), 1.0);
        let v = reducing_opnorm_pair(&op(Mat::diag(&[2.0, 1.0])), &op(Mat::diag(&[1.0, 3.0]))).unwrap();
        assert!((v - 3.0).abs() < 1e-14);
    }
}
