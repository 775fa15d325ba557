//! Small dense matrices (n <= 4) stored inline, with a cyclic Jacobi
//! eigensolver for the symmetric case.
//!
//! Every matrix in this crate is a per-cell value of a weight field or a
//! reducing operator, so the dimension is tiny and allocation-free storage
//! matters more than asymptotic speed.

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported vector dimension.
pub const MAX_N: usize = 4;

const STRIDE: usize = MAX_N;
const JACOBI_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 64;

/// A dense `n x n` real matrix, row-major with a fixed stride of [`MAX_N`].
#[derive(Clone, Copy, PartialEq)]
pub struct Mat {
    n: usize,
    a: [f64; MAX_N * MAX_N],
}

impl core::fmt::Debug for Mat {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str("Mat[")?;
        for i in 0..self.n {
            if i > 0 {
                f.write_str("; ")?;
            }
            for j in 0..self.n {
                if j > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{:.6}", self.get(i, j))?;
            }
        }
        f.write_str("]")
    }
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1 && n <= MAX_N, "matrix dimension {n} out of range");
        Mat { n, a: [0.0; MAX_N * MAX_N] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &x) in d.iter().enumerate() {
            m.set(i, i, x);
        }
        m
    }

    pub fn scalar(x: f64) -> Self {
        Self::diag(&[x])
    }

    /// Builds from row-major rows; panics if the rows are ragged.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), n, "ragged matrix rows");
            for (j, &x) in r.iter().enumerate() {
                m.set(i, j, x);
            }
        }
        m
    }

    /// Builds a symmetric matrix from its lower triangle, row by row:
    /// (0,0), (1,0), (1,1), (2,0), ...
    pub fn from_lower(n: usize, lower: &[f64]) -> Self {
        assert_eq!(lower.len(), n * (n + 1) / 2, "lower triangle length");
        let mut m = Self::zeros(n);
        let mut k = 0;
        for i in 0..n {
            for j in 0..=i {
                m.set(i, j, lower[k]);
                m.set(j, i, lower[k]);
                k += 1;
            }
        }
        m
    }

    pub fn lower(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).flat_map(move |i| (0..=i).map(move |j| self.get(i, j)))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * STRIDE + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, x: f64) {
        self.a[i * STRIDE + j] = x;
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn mul(&self, other: &Mat) -> Self {
        debug_assert_eq!(self.n, other.n);
        let n = self.n;
        let mut c = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    c.a[i * STRIDE + j] += aik * other.get(k, j);
                }
            }
        }
        c
    }

    pub fn add(&self, other: &Mat) -> Self {
        let mut c = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                c.a[i * STRIDE + j] += other.get(i, j);
            }
        }
        c
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut c = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                c.a[i * STRIDE + j] *= s;
            }
        }
        c
    }

    /// `out = self * x`.
    #[inline]
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += self.a[i * STRIDE + j] * x[j];
            }
            out[i] = s;
        }
    }

    /// Euclidean length of `self * x`.
    #[inline]
    pub fn apply_norm(&self, x: &[f64]) -> f64 {
        let mut buf = [0.0; MAX_N];
        self.apply_into(x, &mut buf[..self.n]);
        norm(&buf[..self.n])
    }

    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                m = m.max((self.get(i, j) - other.get(i, j)).abs());
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                m = m.max(self.get(i, j).abs());
            }
        }
        m
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        for i in 0..self.n {
            for j in 0..i {
                if (self.get(i, j) - self.get(j, i)).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn is_finite(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| self.get(i, j).is_finite()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Symmetric eigendecomposition by cyclic Jacobi rotations.
    ///
    /// Eigenvalues come back in ascending order; column `k` of the returned
    /// matrix is the eigenvector for `values[k]`.
    pub fn sym_eigen(&self) -> SymEigen {
        let n = self.n;
        let mut a = *self;
        let mut v = Mat::identity(n);
        if n > 1 {
            let scale = a.max_abs().max(f64::MIN_POSITIVE);
            for _ in 0..JACOBI_MAX_SWEEPS {
                let mut off = 0.0;
                for i in 0..n {
                    for j in 0..i {
                        off += a.get(i, j) * a.get(i, j);
                    }
                }
                if off.sqrt() <= JACOBI_TOL * scale {
                    break;
                }
                for p in 0..n {
                    for q in (p + 1)..n {
                        let apq = a.get(p, q);
                        if apq == 0.0 {
                            continue;
                        }
                        let app = a.get(p, p);
                        let aqq = a.get(q, q);
                        let theta = (aqq - app) / (2.0 * apq);
                        let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                        let t = if theta == 0.0 { 1.0 } else { t };
                        let c = 1.0 / (t * t + 1.0).sqrt();
                        let s = t * c;
                        for k in 0..n {
                            let akp = a.get(k, p);
                            let akq = a.get(k, q);
                            a.set(k, p, c * akp - s * akq);
                            a.set(k, q, s * akp + c * akq);
                        }
                        for k in 0..n {
                            let apk = a.get(p, k);
                            let aqk = a.get(q, k);
                            a.set(p, k, c * apk - s * aqk);
                            a.set(q, k, s * apk + c * aqk);
                        }
                        a.set(p, q, 0.0);
                        a.set(q, p, 0.0);
                        for k in 0..n {
                            let vkp = v.get(k, p);
                            let vkq = v.get(k, q);
                            v.set(k, p, c * vkp - s * vkq);
                            v.set(k, q, s * vkp + c * vkq);
                        }
                    }
                }
            }
        }
        let mut order = [0usize, 1, 2, 3];
        let vals: [f64; MAX_N] = core::array::from_fn(|i| if i < n { a.get(i, i) } else { 0.0 });
        order[..n].sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap_or(core::cmp::Ordering::Equal));
        let mut values = [0.0; MAX_N];
        let mut vectors = Mat::zeros(n);
        for (k, &src) in order[..n].iter().enumerate() {
            values[k] = vals[src];
            for i in 0..n {
                vectors.set(i, k, v.get(i, src));
            }
        }
        SymEigen { n, values, vectors }
    }

    /// Applies `f` to the eigenvalues of a symmetric matrix.
    pub fn sym_map(&self, f: impl Fn(f64) -> f64) -> Mat {
        self.sym_eigen().recompose(f)
    }

    /// `self^r` for symmetric positive definite `self`, with eigenvalues
    /// floored at 1e-300.
    pub fn sym_pow(&self, r: f64) -> Result<Mat> {
        let e = self.sym_eigen();
        for &l in e.values() {
            if !l.is_finite() {
                return Err(Error::NonFiniteEigen { cell: None });
            }
        }
        Ok(e.recompose(|l| l.max(1e-300).powf(r)))
    }

    /// Largest absolute eigenvalue; equals the operator norm for symmetric
    /// input.
    pub fn sym_op_norm(&self) -> f64 {
        let e = self.sym_eigen();
        e.values().iter().fold(0.0f64, |m, &l| m.max(l.abs()))
    }

    /// Spectral norm (largest singular value) of an arbitrary square matrix.
    pub fn op_norm(&self) -> f64 {
        match self.n {
            1 => self.get(0, 0).abs(),
            2 => {
                let (a, b, c, d) = (self.get(0, 0), self.get(0, 1), self.get(1, 0), self.get(1, 1));
                // largest eigenvalue of M^T M in closed form
                let p = a * a + c * c;
                let q = a * b + c * d;
                let r = b * b + d * d;
                let h = 0.5 * (p - r);
                let l = 0.5 * (p + r) + (h * h + q * q).sqrt();
                l.max(0.0).sqrt()
            }
            _ => self.transpose().mul(self).sym_eigen().max().max(0.0).sqrt(),
        }
    }

    /// Inverse of a symmetric positive definite matrix via its eigensystem.
    pub fn sym_inverse(&self) -> Mat {
        self.sym_map(|l| 1.0 / l)
    }
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Clone, Copy, Debug)]
pub struct SymEigen {
    n: usize,
    values: [f64; MAX_N],
    vectors: Mat,
}

impl SymEigen {
    pub fn values(&self) -> &[f64] {
        &self.values[..self.n]
    }

    pub fn vectors(&self) -> &Mat {
        &self.vectors
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.n - 1]
    }

    /// Unit eigenvector for the `k`-th (ascending) eigenvalue.
    pub fn vector(&self, k: usize) -> [f64; MAX_N] {
        core::array::from_fn(|i| if i < self.n { self.vectors.get(i, k) } else { 0.0 })
    }

    pub fn recompose(&self, f: impl Fn(f64) -> f64) -> Mat {
        let n = self.n;
        let mut out = Mat::zeros(n);
        for k in 0..n {
            let fk = f(self.values[k]);
            for i in 0..n {
                let vik = self.vectors.get(i, k) * fk;
                if vik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.a[i * STRIDE + j] += vik * self.vectors.get(j, k);
                }
            }
        }
        // symmetrize round-off
        for i in 0..n {
            for j in 0..i {
                let m = 0.5 * (out.get(i, j) + out.get(j, i));
                out.set(i, j, m);
                out.set(j, i, m);
            }
        }
        out
    }
}

impl Serialize for Mat {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut seq = s.serialize_seq(Some(self.n))?;
        for i in 0..self.n {
            let row: alloc::vec::Vec<f64> = (0..self.n).map(|j| self.get(i, j)).collect();
            seq.serialize_element(&row)?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for Mat {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let rows: alloc::vec::Vec<alloc::vec::Vec<f64>> = Deserialize::deserialize(d)?;
        let n = rows.len();
        if n == 0 || n > MAX_N || rows.iter().any(|r| r.len() != n) {
            return Err(serde::de::Error::custom("matrix must be square with 1..=4 rows"));
        }
        let mut m = Mat::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            for (j, &x) in r.iter().enumerate() {
                m.set(i, j, x);
            }
        }
        Ok(m)
    }
}

#[inline]
pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Rotation of the plane spanned by coordinates `i`, `j` by `theta`.
pub fn givens(n: usize, i: usize, j: usize, theta: f64) -> Mat {
    let mut g = Mat::identity(n);
    let (s, c) = (theta.sin(), theta.cos());
    g.set(i, i, c);
    g.set(j, j, c);
    g.set(i, j, -s);
    g.set(j, i, s);
    g
}

/// Orthogonal matrix built as the ordered product of Givens rotations over
/// the coordinate pairs (0,1), (0,2), ..., (n-2,n-1); missing angles are 0.
pub fn rotation_from_angles(n: usize, angles: &[f64]) -> Mat {
    let mut r = Mat::identity(n);
    let mut k = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            let theta = angles.get(k).copied().unwrap_or(0.0);
            if theta != 0.0 {
                r = r.mul(&givens(n, i, j, theta));
            }
            k += 1;
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_two_by_two() {
        let m = Mat::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let e = m.sym_eigen();
        assert!((e.values()[0] - 1.0).abs() < 1e-14);
        assert!((e.values()[1] - 3.0).abs() < 1e-14);
        assert!((m.sym_op_norm() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn sqrt_of_two_one() {
        let m = Mat::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let h = m.sym_pow(0.5).unwrap();
        let s3 = 3f64.sqrt();
        assert!((h.get(0, 0) - (s3 + 1.0) / 2.0).abs() < 1e-13);
        assert!((h.get(0, 1) - (s3 - 1.0) / 2.0).abs() < 1e-13);
        assert!(h.mul(&h).max_abs_diff(&m) < 1e-13);
    }

    #[test]
    fn op_norm_matches_sym_for_symmetric() {
        let m = Mat::from_rows(&[&[4.0, 1.0, 0.5], &[1.0, 3.0, 0.2], &[0.5, 0.2, 1.0]]);
        assert!((m.op_norm() - m.sym_op_norm()).abs() < 1e-12);
        let d = Mat::diag(&[2.0, -5.0]);
        assert!((d.op_norm() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn three_by_three_reconstructs() {
        let m = Mat::from_rows(&[&[5.0, 2.0, -1.0], &[2.0, 4.0, 0.3], &[-1.0, 0.3, 2.0]]);
        let back = m.sym_eigen().recompose(|l| l);
        assert!(back.max_abs_diff(&m) < 1e-12);
    }

    #[test]
    fn rotations_are_orthogonal() {
        let r = rotation_from_angles(3, &[0.3, -1.1, 0.7]);
        let rtr = r.transpose().mul(&r);
        assert!(rtr.max_abs_diff(&Mat::identity(3)) < 1e-14);
    }
}
