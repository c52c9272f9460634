//! Small dense linear algebra.
//!
//! Everything here targets the single-digit dimensions of the plants this
//! crate simulates. Singular values come from one-sided (Hestenes) Jacobi on
//! the orientation with fewer columns, symmetric eigenvalues from cyclic
//! Jacobi rotations, and SPD factorizations from Cholesky.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use serde::de::Deserializer;
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest one are treated as zero.
pub const RANK_TOL: f64 = 1e-9;

/// Allowed asymmetry (relative to `max(1, max|m_ij|)`) for symmetric routines.
pub const SYM_TOL: f64 = 1e-12;

const JACOBI_EPS: f64 = 1e-15;
const MAX_SWEEPS: usize = 100;

/// Dense real matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from row slices. Panics on ragged input; use
    /// [`Matrix::try_from_rows`] for untrusted data.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self {
            rows: r,
            cols: c,
            data: rows.iter().flat_map(|row| row.iter().copied()).collect(),
        }
    }

    pub fn try_from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::new(r, c, rows.iter().flatten().copied().collect())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { values[i] } else { 0.0 })
    }

    /// Column vector (n x 1).
    pub fn column(values: &[f64]) -> Self {
        Self { rows: values.len(), cols: 1, data: values.to_vec() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Checked product.
    pub fn dot(&self, other: &Matrix) -> Result<Matrix> {
        mat_mul(self, other)
    }

    /// Checked matrix-vector product.
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::Dimension(format!(
                "{}x{} matrix times {}-vector",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok(self.apply(x))
    }

    /// Unchecked matrix-vector product; panics on mismatch.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matrix-vector dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    /// Horizontal concatenation `[m_0, m_1, ...]`.
    pub fn hstack(blocks: &[Matrix]) -> Result<Matrix> {
        let Some(first) = blocks.first() else {
            return Err(Error::Dimension("hstack of zero blocks".into()));
        };
        let rows = first.rows;
        if blocks.iter().any(|b| b.rows != rows) {
            return Err(Error::Dimension("hstack blocks differ in row count".into()));
        }
        let cols = blocks.iter().map(|b| b.cols).sum();
        let mut out = Matrix::zeros(rows, cols);
        let mut offset = 0;
        for b in blocks {
            for i in 0..rows {
                for j in 0..b.cols {
                    out[(i, offset + j)] = b[(i, j)];
                }
            }
            offset += b.cols;
        }
        Ok(out)
    }

    /// Columns `start..start+len`.
    pub fn columns(&self, start: usize, len: usize) -> Matrix {
        Matrix::from_fn(self.rows, len, |i, j| self[(i, start + j)])
    }

    /// Integer power of a square matrix; `pow(0)` is the identity.
    pub fn pow(&self, k: usize) -> Matrix {
        assert!(self.is_square(), "pow of non-square matrix");
        let mut out = Matrix::identity(self.rows);
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    fn check_symmetric(&self) -> Result<()> {
        let asym = self.asymmetry();
        if asym > SYM_TOL * self.max_abs().max(1.0) {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(())
    }

    /// Thin singular value decomposition `m = U diag(s) V^T`, `s` descending.
    pub fn svd(&self) -> Svd {
        if self.rows >= self.cols {
            jacobi_svd_tall(self)
        } else {
            let t = jacobi_svd_tall(&self.transpose());
            Svd { u: t.v, s: t.s, v: t.u }
        }
    }

    /// Singular values in descending order (`min(rows, cols)` of them).
    pub fn singular_values(&self) -> Vec<f64> {
        self.svd().s
    }

    /// Induced 2-norm.
    pub fn spectral_norm(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.singular_values().first().copied().unwrap_or(0.0)
    }

    pub fn sigma_min(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.singular_values().last().copied().unwrap_or(0.0)
    }

    /// Moore-Penrose pseudoinverse with relative truncation [`RANK_TOL`].
    pub fn pinv(&self) -> Matrix {
        let Svd { u, s, v } = self.svd();
        let smax = s.first().copied().unwrap_or(0.0);
        let cutoff = RANK_TOL * smax;
        let mut out = Matrix::zeros(self.cols, self.rows);
        for (k, &sk) in s.iter().enumerate() {
            if sk <= cutoff || sk == 0.0 {
                continue;
            }
            let inv = 1.0 / sk;
            for i in 0..self.cols {
                let vik = v[(i, k)] * inv;
                for j in 0..self.rows {
                    out[(i, j)] += vik * u[(j, k)];
                }
            }
        }
        out
    }

    /// All eigenvalues of a symmetric matrix, ascending.
    pub fn sym_eigenvalues(&self) -> Result<Vec<f64>> {
        self.check_symmetric()?;
        let mut vals = jacobi_eigenvalues(self);
        vals.sort_by(f64::total_cmp);
        Ok(vals)
    }

    /// `(lambda_min, lambda_max)` of a symmetric matrix.
    pub fn sym_eig_bounds(&self) -> Result<(f64, f64)> {
        let vals = self.sym_eigenvalues()?;
        match (vals.first(), vals.last()) {
            (Some(&lo), Some(&hi)) => Ok((lo, hi)),
            _ => Err(Error::Dimension("eigenvalues of an empty matrix".into())),
        }
    }

    /// Lower-triangular Cholesky factor of an SPD matrix.
    pub fn cholesky(&self) -> Result<Matrix> {
        self.check_symmetric()?;
        cholesky_lower(self).ok_or(Error::NotPositiveDefinite)
    }

    /// `ln det` of a symmetric positive definite matrix.
    pub fn logdet_spd(&self) -> Result<f64> {
        let l = self.cholesky()?;
        Ok((0..l.rows).map(|i| 2.0 * l[(i, i)].ln()).sum())
    }
}

/// Free-function form of the checked product.
pub fn mat_mul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::Dimension(format!(
            "{}x{} times {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a[(i, k)];
            if aik == 0.0 {
                continue;
            }
            for j in 0..b.cols {
                out.data[i * b.cols + j] += aik * b.data[k * b.cols + j];
            }
        }
    }
    Ok(out)
}

pub fn spectral_norm(m: &Matrix) -> f64 {
    m.spectral_norm()
}

pub fn sigma_min(m: &Matrix) -> f64 {
    m.sigma_min()
}

pub fn pinv(m: &Matrix) -> Matrix {
    m.pinv()
}

pub fn sym_eig_bounds(m: &Matrix) -> Result<(f64, f64)> {
    m.sym_eig_bounds()
}

pub fn logdet_spd(m: &Matrix) -> Result<f64> {
    m.logdet_spd()
}

/// Thin SVD factors.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

fn jacobi_svd_tall(m: &Matrix) -> Svd {
    let (r, c) = m.shape();
    debug_assert!(r >= c);
    // Work on columns: w = m * v, orthogonalized in place.
    let mut w: Vec<Vec<f64>> = (0..c).map(|j| (0..r).map(|i| m[(i, j)]).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..c).map(|j| (0..c).map(|i| if i == j { 1.0 } else { 0.0 }).collect()).collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..c {
            for q in p + 1..c {
                let alpha: f64 = w[p].iter().map(|x| x * x).sum();
                let beta: f64 = w[q].iter().map(|x| x * x).sum();
                let gamma: f64 = w[p].iter().zip(&w[q]).map(|(a, b)| a * b).sum();
                if gamma == 0.0 || gamma.abs() <= JACOBI_EPS * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                rotate_pair(&mut w, p, q, cs, sn);
                rotate_pair(&mut v, p, q, cs, sn);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(f64, usize)> = w
        .iter()
        .enumerate()
        .map(|(j, col)| (col.iter().map(|x| x * x).sum::<f64>().sqrt(), j))
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut u = Matrix::zeros(r, c);
    let mut vm = Matrix::zeros(c, c);
    let mut s = Vec::with_capacity(c);
    for (k, &(sigma, j)) in order.iter().enumerate() {
        s.push(sigma);
        for i in 0..r {
            u[(i, k)] = if sigma > 0.0 { w[j][i] / sigma } else { 0.0 };
        }
        for i in 0..c {
            vm[(i, k)] = v[j][i];
        }
    }
    Svd { u, s, v: vm }
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, cs: f64, sn: f64) {
    let (left, right) = cols.split_at_mut(q);
    let (cp, cq) = (&mut left[p], &mut right[0]);
    for (a, b) in cp.iter_mut().zip(cq.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = cs * x - sn * y;
        *b = sn * x + cs * y;
    }
}

fn jacobi_eigenvalues(m: &Matrix) -> Vec<f64> {
    let n = m.rows;
    let mut a = m.clone();
    // Symmetrize away rounding-level asymmetry.
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = avg;
            a[(j, i)] = avg;
        }
    }
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        let diag: f64 = (0..n).map(|i| a[(i, i)] * a[(i, i)]).sum();
        if off <= JACOBI_EPS * JACOBI_EPS * diag || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[(i, i)]).collect()
}

fn cholesky_lower(m: &Matrix) -> Option<Matrix> {
    let n = m.rows;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

/// Lower factor `L` with `L L^T = m` for a symmetric PSD matrix. Zero pivots
/// produce zero columns instead of failing.
pub(crate) fn psd_factor(m: &Matrix) -> Matrix {
    let n = m.rows;
    let scale = m.max_abs().max(f64::MIN_POSITIVE);
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 1e-14 * scale {
            continue;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    l
}

/// Solves `X * G = C` for `X` when `G` is SPD, via Cholesky. Returns `None`
/// when `G` is not numerically positive definite at [`RANK_TOL`] conditioning.
pub(crate) fn solve_right_spd(c: &Matrix, g: &Matrix) -> Option<Matrix> {
    let l = cholesky_lower(g)?;
    let n = g.rows;
    let (dmin, dmax) = (0..n).fold((f64::INFINITY, 0.0f64), |(lo, hi), i| {
        let d = l[(i, i)] * l[(i, i)];
        (lo.min(d), hi.max(d))
    });
    // Pivots bound the Gram spectrum only loosely; stay well clear of the truncation regime.
    if dmin <= RANK_TOL * 1e3 * dmax {
        return None;
    }
    // X G = C  <=>  G X^T = C^T.
    let mut out = Matrix::zeros(c.rows, n);
    let mut y = vec![0.0; n];
    for r in 0..c.rows {
        let b = c.row(r);
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= l[(i, k)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= l[(k, i)] * out[(r, k)];
            }
            out[(r, i)] = s / l[(i, i)];
        }
    }
    Some(out)
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    /// Panics on dimension mismatch; use [`mat_mul`] for checked products.
    fn mul(self, rhs: &Matrix) -> Matrix {
        mat_mul(self, rhs).expect("matrix product dimension mismatch")
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.shape(), rhs.shape(), "matrix sum dimension mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.shape(), rhs.shape(), "matrix difference dimension mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        self.scale(-1.0)
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix{}x{}{:?}", self.rows, self.cols, self.to_rows())
    }
}

impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        Matrix::try_from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Euclidean vector helpers.
pub mod vec {
    pub fn norm(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(a.len(), b.len());
        a.iter().zip(b).map(|(x, y)| x + y).collect()
    }

    pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(a.len(), b.len());
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    }

    pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
        a.iter().map(|x| x * s).collect()
    }

    /// Concatenates blocks in the given order.
    pub fn stack(blocks: &[Vec<f64>]) -> Vec<f64> {
        blocks.iter().flatten().copied().collect()
    }

    /// Shrinks `x` by the smallest representable amounts until its computed
    /// norm is at most `r`.
    pub fn clamp_norm(mut x: Vec<f64>, r: f64) -> Vec<f64> {
        let mut guard = 0;
        while norm(&x) > r && guard < 64 {
            let shrink = 1.0 - f64::EPSILON * (1u64 << guard.min(20)) as f64;
            for v in x.iter_mut() {
                *v *= shrink;
            }
            guard += 1;
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
    }

    /// Eigenvalues of a symmetric 2x2 matrix by the quadratic formula.
    fn eig2(m: &Matrix) -> (f64, f64) {
        let (a, b, d) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
        let tr = a + d;
        let det = a * d - b * b;
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        (tr / 2.0 - disc, tr / 2.0 + disc)
    }

    fn reach1() -> Matrix {
        Matrix::from_rows(&[&[0.0, H], &[1.0, H]])
    }

    #[test]
    fn identity_product_and_zero_product() {
        let m = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(mat_mul(&Matrix::identity(2), &m).unwrap(), m);
        assert_eq!(mat_mul(&Matrix::zeros(2, 2), &m).unwrap(), Matrix::zeros(2, 2));
        assert!(matches!(mat_mul(&m, &Matrix::zeros(3, 1)), Err(Error::Dimension(_))));
    }

    #[test]
    fn rotation_times_input_column() {
        let a1 = Matrix::from_rows(&[&[H, H], &[-H, H]]);
        let b1 = Matrix::column(&[0.0, 1.0]);
        let ab = mat_mul(&a1, &b1).unwrap();
        assert!(close(ab[(0, 0)], H, 1e-15) && close(ab[(1, 0)], H, 1e-15));
    }

    #[test]
    fn norms_of_simple_matrices() {
        assert!(close(Matrix::diag(&[3.0, 4.0]).spectral_norm(), 4.0, 1e-12));
        let t = 0.3f64;
        let rot = Matrix::from_rows(&[&[t.cos(), -t.sin()], &[t.sin(), t.cos()]]);
        assert!(close(rot.spectral_norm(), 1.0, 1e-12));
        assert!(close(Matrix::identity(3).sigma_min(), 1.0, 1e-12));
        assert!(Matrix::from_rows(&[&[1.0, 1.0], &[1.0, 1.0]]).sigma_min() <= 1e-10);
    }

    #[test]
    fn singular_values_match_characteristic_polynomial() {
        let m = reach1();
        let (lo, hi) = eig2(&(&m.transpose() * &m));
        assert!(close(m.spectral_norm(), hi.sqrt(), 1e-10));
        assert!(close(m.sigma_min(), lo.sqrt(), 1e-10));
    }

    #[test]
    fn pinv_examples() {
        assert_eq!(Matrix::identity(3).pinv(), Matrix::identity(3));
        let p = reach1().pinv();
        let expect = Matrix::from_rows(&[&[-1.0, 1.0], &[2f64.sqrt(), 0.0]]);
        assert!((&p - &expect).max_abs() < 1e-12, "{p:?}");
        let z = Matrix::zeros(2, 3).pinv();
        assert_eq!(z.shape(), (3, 2));
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn pinv_of_full_row_rank_fat_matrix() {
        let m = Matrix::from_rows(&[&[1.0, 2.0, 0.5], &[0.0, -1.0, 3.0]]);
        let mmt = &m * &m.transpose();
        let det = mmt[(0, 0)] * mmt[(1, 1)] - mmt[(0, 1)] * mmt[(1, 0)];
        let inv = Matrix::from_rows(&[
            &[mmt[(1, 1)] / det, -mmt[(0, 1)] / det],
            &[-mmt[(1, 0)] / det, mmt[(0, 0)] / det],
        ]);
        let formula = &m.transpose() * &inv;
        assert!((&m.pinv() - &formula).max_abs() < 1e-12);
    }

    #[test]
    fn symmetric_eigen_bounds() {
        assert_eq!(Matrix::diag(&[1.0, 5.0]).sym_eig_bounds().unwrap(), (1.0, 5.0));
        assert_eq!(Matrix::identity(3).sym_eig_bounds().unwrap(), (1.0, 1.0));
        let l = Matrix::from_rows(&[&[1.3, 0.0], &[-0.7, 0.4]]);
        let g = &l * &l.transpose();
        let (lo, hi) = g.sym_eig_bounds().unwrap();
        let (elo, ehi) = eig2(&g);
        assert!(close(lo, elo, 1e-10) && close(hi, ehi, 1e-10));
        let asym = Matrix::from_rows(&[&[1.0, 2.0], &[0.0, 1.0]]);
        assert!(matches!(asym.sym_eig_bounds(), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn logdet_examples() {
        assert_eq!(Matrix::identity(4).logdet_spd().unwrap(), 0.0);
        assert!(close(Matrix::diag(&[2.0, 3.0]).logdet_spd().unwrap(), 6f64.ln(), 1e-14));
        let c = Matrix::identity(3).scale(7.0);
        assert!(close(c.logdet_spd().unwrap(), 3.0 * 7f64.ln(), 1e-14));
        let indefinite = Matrix::diag(&[1.0, -1.0]);
        assert_eq!(indefinite.logdet_spd(), Err(Error::NotPositiveDefinite));
    }

    #[test]
    fn constructor_rejects_bad_input() {
        assert!(matches!(Matrix::new(2, 2, vec![1.0; 3]), Err(Error::Dimension(_))));
        assert_eq!(Matrix::new(1, 1, vec![f64::NAN]), Err(Error::NonFinite));
    }

    #[test]
    fn clamp_norm_never_exceeds_radius() {
        let x = vec::clamp_norm(vec![0.6 * 1.0000000000000002, 0.8], 1.0);
        assert!(vec::norm(&x) <= 1.0);
    }

    fn det_cofactor(m: &Matrix) -> f64 {
        match m.rows() {
            1 => m[(0, 0)],
            n => (0..n)
                .map(|j| {
                    let minor = Matrix::from_fn(n - 1, n - 1, |r, c| m[(r + 1, if c < j { c } else { c + 1 })]);
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    sign * m[(0, j)] * det_cofactor(&minor)
                })
                .sum(),
        }
    }

    fn arb_matrix(max: usize) -> impl Strategy<Value = Matrix> {
        (1..=max, 1..=max).prop_flat_map(|(r, c)| {
            proptest::collection::vec(-3.0f64..3.0, r * c)
                .prop_map(move |data| Matrix::new(r, c, data).unwrap())
        })
    }

    proptest! {
        #[test]
        fn moore_penrose_conditions(m in arb_matrix(6)) {
            let p = m.pinv();
            let tol = 1e-9 * (1.0 + m.spectral_norm());
            prop_assert!((&(&(&m * &p) * &m) - &m).max_abs() <= tol);
            prop_assert!((&(&(&p * &m) * &p) - &p).max_abs() <= tol * (1.0 + p.spectral_norm()));
            prop_assert!((&m * &p).asymmetry() <= tol);
            prop_assert!((&p * &m).asymmetry() <= tol);
        }

        #[test]
        fn norm_ordering_and_transpose_invariance(m in arb_matrix(6)) {
            let s = m.spectral_norm();
            prop_assert!(s >= m.sigma_min());
            prop_assert!(close(s, m.transpose().spectral_norm(), 1e-10));
            if m.shape() == (1, 1) {
                prop_assert_eq!(s, m.sigma_min());
            }
        }

        #[test]
        fn logdet_matches_cofactor_determinant(d in 1usize..=3, data in proptest::collection::vec(-2.0f64..2.0, 9)) {
            let l = Matrix::from_fn(d, d, |i, j| data[i * 3 + j]);
            let g = &(&l * &l.transpose()) + &Matrix::identity(d).scale(0.1);
            let det = det_cofactor(&g);
            prop_assert!((g.logdet_spd().unwrap() - det.ln()).abs() <= 1e-9);
        }
    }
}
