//! Small dense linear algebra for the d ≤ 3 (phase space ≤ 6) problems handled here.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::scalar::{lit, Scalar};

pub type Point<S> = Vec<S>;

#[inline]
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[inline]
pub fn norm<S: Scalar>(a: &[S]) -> S {
    dot(a, a).sqrt()
}

#[inline]
pub fn sub<S: Scalar>(a: &[S], b: &[S]) -> Vec<S> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

#[inline]
pub fn add<S: Scalar>(a: &[S], b: &[S]) -> Vec<S> {
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

#[inline]
pub fn scale<S: Scalar>(a: &[S], k: S) -> Vec<S> {
    a.iter().map(|&x| x * k).collect()
}

/// `a + k * b`
#[inline]
pub fn axpy<S: Scalar>(a: &[S], k: S, b: &[S]) -> Vec<S> {
    a.iter().zip(b).map(|(&x, &y)| x + k * y).collect()
}

#[inline]
pub fn dist<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<S>()
        .sqrt()
}

#[inline]
pub fn max_abs<S: Scalar>(a: &[S]) -> S {
    a.iter().fold(S::zero(), |m, &x| m.max(x.abs()))
}

pub fn all_finite<S: Scalar>(a: &[S]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn scaled_identity(n: usize, k: S) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = k;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged matrix rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    /// `u vᵀ`
    pub fn outer(u: &[S], v: &[S]) -> Self {
        let mut m = Self::zeros(u.len(), v.len());
        for (i, &a) in u.iter().enumerate() {
            for (j, &b) in v.iter().enumerate() {
                m[(i, j)] = a * b;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<S> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == S::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[S]) -> Vec<S> {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, k: S) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * k).collect(),
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(S, S) -> S) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn max_abs(&self) -> S {
        max_abs(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        all_finite(&self.data)
    }

    /// `(A + Aᵀ)/2`
    pub fn symmetric_part(&self) -> Self {
        let half = lit::<S>(0.5);
        self.add(&self.transpose()).scale(half)
    }

    /// Eigenvalues of a symmetric matrix, ascending (cyclic Jacobi).
    pub fn symmetric_eigenvalues(&self) -> Vec<S> {
        self.symmetric_eigen().0
    }

    /// Eigenvalues ascending and the matching unit eigenvectors as columns.
    pub fn symmetric_eigen(&self) -> (Vec<S>, Matrix<S>) {
        assert_eq!(self.rows, self.cols, "eigenvalues of a non-square matrix");
        let n = self.rows;
        let mut a = self.symmetric_part();
        let mut v = Matrix::identity(n);
        for _sweep in 0..64 {
            let mut off = S::zero();
            for i in 0..n {
                for j in (i + 1)..n {
                    off = off + a[(i, j)] * a[(i, j)];
                }
            }
            let scale = a.max_abs().max(S::min_positive_value());
            if off.sqrt() <= S::eps() * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq == S::zero() {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (lit::<S>(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + S::one()).sqrt());
                    let c = S::one() / (t * t + S::one()).sqrt();
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
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            a[(i, i)]
                .partial_cmp(&a[(j, j)])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let values = order.iter().map(|&i| a[(i, i)]).collect();
        let mut vectors = Matrix::zeros(n, n);
        for (col, &i) in order.iter().enumerate() {
            for k in 0..n {
                vectors[(k, col)] = v[(k, i)];
            }
        }
        (values, vectors)
    }

    pub fn min_symmetric_eigenvalue(&self) -> S {
        self.symmetric_eigenvalues()
            .first()
            .copied()
            .unwrap_or(S::zero())
    }

    /// Solves `A x = b` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &[S]) -> Option<Vec<S>> {
        assert_eq!(self.rows, self.cols);
        assert_eq!(self.rows, b.len());
        let n = self.rows;
        let mut a = self.clone();
        let mut x = b.to_vec();
        let scale = a.max_abs();
        if scale == S::zero() || !scale.is_finite() {
            return None;
        }
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| {
                    a[(i, col)]
                        .abs()
                        .partial_cmp(&a[(j, col)].abs())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .unwrap();
            if a[(piv, col)].abs() <= S::eps() * scale * lit(1e-3) {
                return None;
            }
            if piv != col {
                for k in 0..n {
                    a.data.swap(piv * n + k, col * n + k);
                }
                x.swap(piv, col);
            }
            let d = a[(col, col)];
            for r in (col + 1)..n {
                let f = a[(r, col)] / d;
                if f == S::zero() {
                    continue;
                }
                for k in col..n {
                    a[(r, k)] = a[(r, k)] - f * a[(col, k)];
                }
                x[r] = x[r] - f * x[col];
            }
        }
        for col in (0..n).rev() {
            let mut s = x[col];
            for k in (col + 1)..n {
                s = s - a[(col, k)] * x[k];
            }
            x[col] = s / a[(col, col)];
        }
        all_finite(&x).then_some(x)
    }

    pub fn inverse(&self) -> Option<Self> {
        let n = self.rows;
        let mut inv = Self::zeros(n, n);
        for j in 0..n {
            let mut e = vec![S::zero(); n];
            e[j] = S::one();
            let col = self.solve(&e)?;
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        Some(inv)
    }
}

impl<S> Index<(usize, usize)> for Matrix<S> {
    type Output = S;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.cols + j]
    }
}

impl<S> IndexMut<(usize, usize)> for Matrix<S> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i * self.cols + j]
    }
}

/// Singular values of the matrix whose rows are `vectors`, descending.
pub fn singular_values<S: Scalar>(vectors: &[Vec<S>], dim: usize) -> Vec<S> {
    let mut gram = Matrix::zeros(dim, dim);
    for v in vectors {
        for i in 0..dim {
            for j in 0..dim {
                gram[(i, j)] = gram[(i, j)] + v[i] * v[j];
            }
        }
    }
    let mut sv: Vec<S> = gram
        .symmetric_eigenvalues()
        .into_iter()
        .map(|e: S| e.max(S::zero()).sqrt())
        .collect();
    sv.reverse();
    sv
}

/// Orthonormal basis of the orthogonal complement of `normal` (which need not be unit).
pub fn orthonormal_complement<S: Scalar>(normal: &[S]) -> Vec<Vec<S>> {
    let d = normal.len();
    let n = scale(normal, S::one() / norm(normal));
    let mut basis: Vec<Vec<S>> = vec![n];
    for k in 0..d {
        let mut e = vec![S::zero(); d];
        e[k] = S::one();
        for b in &basis {
            let c = dot(&e, b);
            e = axpy(&e, -c, b);
        }
        let len = norm(&e);
        if len > lit(1e-8) {
            basis.push(scale(&e, S::one() / len));
        }
        if basis.len() == d {
            break;
        }
    }
    basis.remove(0);
    basis
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_eigenvalues_of_known_matrix() {
        let m = Matrix::<f64>::from_rows(&[
            vec![2.0, 1.0, 0.0],
            vec![1.0, 2.0, 0.0],
            vec![0.0, 0.0, 5.0],
        ]);
        let ev = m.symmetric_eigenvalues();
        assert!((ev[0] - 1.0).abs() < 1e-14);
        assert!((ev[1] - 3.0).abs() < 1e-14);
        assert!((ev[2] - 5.0).abs() < 1e-14);
        let (vals, vecs) = m.symmetric_eigen();
        for (j, &lam) in vals.iter().enumerate() {
            let u = vecs.column(j);
            let r = sub(&m.matvec(&u), &scale(&u, lam));
            assert!(norm(&r) < 1e-13);
            assert!((norm(&u) - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn solve_and_inverse() {
        let m = Matrix::from_rows(&[vec![4.0, 1.0], vec![2.0, 3.0]]);
        let x = m.solve(&[1.0, 2.0]).unwrap();
        assert!((4.0 * x[0] + x[1] - 1.0f64).abs() < 1e-14);
        assert!((2.0 * x[0] + 3.0 * x[1] - 2.0f64).abs() < 1e-14);
        let inv = m.inverse().unwrap();
        let id = m.matmul(&inv);
        assert!(id.sub(&Matrix::identity(2)).max_abs() < 1e-14);
        let singular = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(singular.solve(&[1.0, 1.0]).is_none());
    }

    #[test]
    fn complement_is_orthonormal() {
        let n: Vec<f64> = vec![1.0, 2.0, -0.5];
        let b = orthonormal_complement(&n);
        assert_eq!(b.len(), 2);
        for v in &b {
            assert!(dot(v, &n).abs() < 1e-14);
            assert!((norm(v) - 1.0).abs() < 1e-14);
        }
        assert!(dot(&b[0], &b[1]).abs() < 1e-14);
    }

    #[test]
    fn singular_values_of_rank_one_set() {
        let sv = singular_values(&[vec![1.0, 1.0], vec![2.0, 2.0]], 2);
        assert!((sv[0] - 10.0f64.sqrt()).abs() < 1e-12);
        assert!(sv[1] < 1e-7);
    }
}
