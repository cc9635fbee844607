//! Small dense linear algebra: row-major matrices, LU solves, one-sided
//! Jacobi SVD. Everything here targets matrices of modest size (system
//! dimension or coefficient-space dimension); large structured operators
//! are handled matrix-free in the spectrum module.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use std::ops::{Index, IndexMut};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn diag(entries: &[T]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = entries[i];
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn col(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: T) -> Self {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dims");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.cols, x.len(), "matvec dims");
        let mut out = vec![T::zero(); self.rows];
        for i in 0..self.rows {
            let mut acc = T::zero();
            for j in 0..self.cols {
                acc = acc + self[(i, j)] * x[j];
            }
            out[i] = acc;
        }
        out
    }

    /// x^T A, returned as a vector of length `cols`.
    pub fn tmatvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.rows, x.len(), "tmatvec dims");
        let mut out = vec![T::zero(); self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            for j in 0..self.cols {
                out[j] = out[j] + xi * self[(i, j)];
            }
        }
        out
    }

    /// Max absolute entry; cheap sanity norm.
    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, &x| acc.max(x.abs()))
    }

    /// Frobenius norm.
    pub fn frobenius(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, &x| acc + x * x)
            .sqrt()
    }

    /// Spectral norm (largest singular value).
    pub fn spectral_norm(&self) -> T {
        if self.rows == 0 || self.cols == 0 {
            return T::zero();
        }
        let sv = self.singular_values();
        sv.first().copied().unwrap_or_else(T::zero)
    }

    /// Singular values in descending order, via one-sided Jacobi.
    pub fn singular_values(&self) -> Vec<T> {
        jacobi_svd(self, false).sigma
    }

    /// Full SVD `A = U diag(sigma) V^T` with singular values descending.
    pub fn svd(&self) -> Svd<T> {
        jacobi_svd(self, true)
    }

    /// LU factorization with partial pivoting.
    pub fn lu(&self) -> Result<Lu<T>> {
        Lu::new(self)
    }

    /// Inverse with a condition-number guard (spectral condition estimate).
    pub fn inverse_guarded(&self, guard: T, index: i64) -> Result<Mat<T>> {
        let sv = self.singular_values();
        let smax = sv.first().copied().unwrap_or_else(T::zero);
        let smin = sv.last().copied().unwrap_or_else(T::zero);
        if smin <= T::zero() {
            return Err(Error::SingularMatrix {
                index,
                defect: smin.as_f64(),
            });
        }
        let cond = smax / smin;
        if cond > guard {
            return Err(Error::IllConditioned {
                index,
                cond: cond.as_f64(),
                guard: guard.as_f64(),
            });
        }
        self.lu()?.inverse()
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorization with partial pivoting.
pub struct Lu<T> {
    lu: Mat<T>,
    piv: Vec<usize>,
}

impl<T: Scalar> Lu<T> {
    fn new(a: &Mat<T>) -> Result<Self> {
        assert_eq!(a.rows, a.cols, "LU requires a square matrix");
        let n = a.rows;
        let mut lu = a.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs();
            for i in k + 1..n {
                let v = lu[(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == T::zero() {
                return Err(Error::SingularMatrix {
                    index: k as i64,
                    defect: 0.0,
                });
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                piv.swap(k, p);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let m = lu[(i, k)] / pivot;
                lu[(i, k)] = m;
                for j in k + 1..n {
                    lu[(i, j)] = lu[(i, j)] - m * lu[(k, j)];
                }
            }
        }
        Ok(Lu { lu, piv })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.rows;
        assert_eq!(b.len(), n);
        let mut x: Vec<T> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let mut acc = x[i];
            for j in 0..i {
                acc = acc - self.lu[(i, j)] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc = acc - self.lu[(i, j)] * x[j];
            }
            x[i] = acc / self.lu[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> Result<Mat<T>> {
        let n = self.lu.rows;
        let mut inv = Mat::zeros(n, n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e[j] = T::one();
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
            e[j] = T::zero();
        }
        Ok(inv)
    }
}

/// SVD result: `a = u * diag(sigma) * v^T`.
pub struct Svd<T> {
    pub u: Mat<T>,
    pub sigma: Vec<T>,
    pub v: Mat<T>,
}

/// One-sided Jacobi SVD. Accurate for the small matrices used here;
/// columns of `b` are rotated until mutually orthogonal.
fn jacobi_svd<T: Scalar>(a: &Mat<T>, want_vectors: bool) -> Svd<T> {
    let m = a.rows;
    let n = a.cols;
    assert!(m >= n, "jacobi_svd requires rows >= cols");
    let mut b = a.clone();
    let mut v = Mat::identity(n);
    let eps = T::epsilon() * T::of(32.0);
    let max_sweeps = 60;
    for _ in 0..max_sweeps {
        let mut off = T::zero();
        for p in 0..n {
            for q in p + 1..n {
                let mut app = T::zero();
                let mut aqq = T::zero();
                let mut apq = T::zero();
                for i in 0..m {
                    let bp = b[(i, p)];
                    let bq = b[(i, q)];
                    app = app + bp * bp;
                    aqq = aqq + bq * bq;
                    apq = apq + bp * bq;
                }
                let denom = (app * aqq).sqrt();
                if denom == T::zero() || apq.abs() <= eps * denom {
                    continue;
                }
                off = off.max(apq.abs() / denom);
                // Jacobi rotation zeroing the (p,q) Gram entry.
                let tau = (aqq - app) / (T::of(2.0) * apq);
                let t = if tau >= T::zero() {
                    T::one() / (tau + (T::one() + tau * tau).sqrt())
                } else {
                    -T::one() / (-tau + (T::one() + tau * tau).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let bp = b[(i, p)];
                    let bq = b[(i, q)];
                    b[(i, p)] = c * bp - s * bq;
                    b[(i, q)] = s * bp + c * bq;
                }
                for i in 0..n {
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if off <= eps {
            break;
        }
    }
    let mut sigma: Vec<T> = (0..n)
        .map(|j| {
            let mut acc = T::zero();
            for i in 0..m {
                acc = acc + b[(i, j)] * b[(i, j)];
            }
            acc.sqrt()
        })
        .collect();
    // Sort descending, permuting b and v columns along.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        sigma[j]
            .partial_cmp(&sigma[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let sigma_sorted: Vec<T> = order.iter().map(|&k| sigma[k]).collect();
    let mut u = Mat::zeros(m, n);
    let mut v_sorted = Mat::zeros(n, n);
    for (newj, &oldj) in order.iter().enumerate() {
        let s = sigma[oldj];
        for i in 0..m {
            u[(i, newj)] = if s > T::zero() { b[(i, oldj)] / s } else { T::zero() };
        }
        if want_vectors {
            for i in 0..n {
                v_sorted[(i, newj)] = v[(i, oldj)];
            }
        }
    }
    sigma = sigma_sorted;
    Svd {
        u,
        sigma,
        v: v_sorted,
    }
}

/// QR-orthonormalize the columns of `a` in place (modified Gram-Schmidt).
/// Returns false when a column collapses to numerical zero.
pub fn orthonormalize_columns<T: Scalar>(a: &mut Mat<T>) -> bool {
    let m = a.rows;
    let n = a.cols;
    for j in 0..n {
        for k in 0..j {
            let mut dot = T::zero();
            for i in 0..m {
                dot = dot + a[(i, k)] * a[(i, j)];
            }
            for i in 0..m {
                a[(i, j)] = a[(i, j)] - dot * a[(i, k)];
            }
        }
        let mut norm = T::zero();
        for i in 0..m {
            norm = norm + a[(i, j)] * a[(i, j)];
        }
        let norm = norm.sqrt();
        if norm <= T::epsilon() * T::of(1e3) {
            return false;
        }
        for i in 0..m {
            a[(i, j)] = a[(i, j)] / norm;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn near(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn lu_solves_random_system() {
        let a = Mat::from_rows(&[
            vec![4.0, 1.0, -2.0],
            vec![0.5, 3.0, 1.0],
            vec![-1.0, 0.25, 2.0],
        ]);
        let x = vec![1.0, -2.0, 0.5];
        let b = a.matvec(&x);
        let got = a.lu().unwrap().solve(&b);
        for (g, e) in got.iter().zip(&x) {
            assert!(near(*g, *e, 1e-12));
        }
    }

    #[test]
    fn inverse_roundtrip() {
        let a = Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        let inv = a.inverse_guarded(1e12, 0).unwrap();
        let id = a.matmul(&inv);
        assert!(near(id[(0, 0)], 1.0, 1e-13));
        assert!(near(id[(0, 1)], 0.0, 1e-13));
        assert!(near(id[(1, 0)], 0.0, 1e-13));
        assert!(near(id[(1, 1)], 1.0, 1e-13));
    }

    #[test]
    fn singular_matrix_rejected() {
        let a = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(a.inverse_guarded(1e12_f64, 7).is_err());
    }

    #[test]
    fn svd_of_diagonal_is_exact() {
        let a: Mat<f64> = Mat::diag(&[3.0, 0.5, 2.0]);
        let sv = a.singular_values();
        assert!(near(sv[0], 3.0, 1e-14));
        assert!(near(sv[1], 2.0, 1e-14));
        assert!(near(sv[2], 0.5, 1e-14));
    }

    #[test]
    fn svd_reconstructs_matrix() {
        let a = Mat::from_rows(&[
            vec![1.0, 2.0, 0.0],
            vec![-1.0, 0.5, 3.0],
            vec![0.25, -2.0, 1.0],
        ]);
        let svd = a.svd();
        let s = Mat::diag(&svd.sigma);
        let rec = svd.u.matmul(&s).matmul(&svd.v.transpose());
        assert!(rec.sub(&a).max_abs() < 1e-12);
        // U, V orthogonal
        let utu = svd.u.transpose().matmul(&svd.u);
        let vtv = svd.v.transpose().matmul(&svd.v);
        assert!(utu.sub(&Mat::identity(3)).max_abs() < 1e-12);
        assert!(vtv.sub(&Mat::identity(3)).max_abs() < 1e-12);
    }

    #[test]
    fn spectral_norm_matches_known_value() {
        // [[3,0],[4,5]] has singular values sqrt(45) and sqrt(... ) with
        // sigma_max^2 = (50 + sqrt(50^2 - 4*225))/2 = (50+40)/2 = 45.
        let a = Mat::from_rows(&[vec![3.0, 0.0], vec![4.0, 5.0]]);
        assert!(near(a.spectral_norm(), 45.0_f64.sqrt(), 1e-12));
    }

    #[test]
    fn works_at_f32() {
        let a: Mat<f32> = Mat::diag(&[2.0, 0.5]);
        let sv = a.singular_values();
        assert!((sv[0] - 2.0).abs() < 1e-6);
        assert!((sv[1] - 0.5).abs() < 1e-6);
    }
}
