//! Dense kernels: row-major matrices, vector helpers, cyclic Jacobi
//! eigendecomposition and rank-truncated pseudoinverse application.
//!
//! Everything here is deterministic: fixed sweep orders, sequential
//! reductions, no parallelism.

use crate::error::{check_len, Error, Result};

const JACOBI_MAX_SWEEPS: usize = 100;

/// Dense real matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_len("row-major matrix data", rows * cols, data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from a list of equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            check_len("matrix row length", cols, row.len())?;
            data.extend_from_slice(row);
        }
        Self::from_row_major(rows.len(), cols, data)
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(n: usize, cols: &[Vec<f64>]) -> Result<Self> {
        let mut m = Self::zeros(n, cols.len());
        for (j, c) in cols.iter().enumerate() {
            check_len("matrix column length", n, c.len())?;
            for (i, v) in c.iter().enumerate() {
                m.data[i * cols.len() + j] = *v;
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.cols).map(|j| self.col(j)).collect()
    }

    /// Copies the contiguous row range `[start, end)`.
    pub fn row_block(&self, start: usize, end: usize) -> Matrix {
        Matrix {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }

    /// Stacks the rows of several matrices with equal column count.
    pub fn vstack(parts: &[&Matrix]) -> Result<Matrix> {
        let cols = parts.first().map_or(0, |m| m.cols);
        let mut data = Vec::new();
        let mut rows = 0;
        for p in parts {
            check_len("vstack column count", cols, p.cols)?;
            data.extend_from_slice(&p.data);
            rows += p.rows;
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// `A x`
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec: vector length mismatch");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `Aᵀ y`
    pub fn matvec_t(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows, "matvec_t: vector length mismatch");
        let mut out = vec![0.0; self.cols];
        for (i, &yi) in y.iter().enumerate() {
            if yi != 0.0 {
                axpy(yi, self.row(i), &mut out);
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        check_len("matmul inner dimension", self.cols, other.rows)?;
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a != 0.0 {
                    axpy(a, other.row(k), orow);
                }
            }
        }
        Ok(out)
    }

    /// `A Aᵀ`, exactly symmetric.
    pub fn gram_rows(&self) -> Matrix {
        let m = self.rows;
        let mut g = Matrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = dot(self.row(i), self.row(j));
                g.data[i * m + j] = v;
                g.data[j * m + i] = v;
            }
        }
        g
    }

    /// `Aᵀ A`, exactly symmetric.
    pub fn gram_cols(&self) -> Matrix {
        self.transpose().gram_rows()
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        check_len("matrix subtraction rows", self.rows, other.rows)?;
        check_len("matrix subtraction cols", self.cols, other.cols)?;
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: sub(&self.data, &other.data),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        norm(&self.data)
    }

    /// Largest `|S_ij - S_ji|`; requires a square matrix.
    pub fn asymmetry(&self) -> f64 {
        let n = self.rows;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(alpha: f64, a: &[f64]) -> Vec<f64> {
    a.iter().map(|x| alpha * x).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Removes the components of `v` along the orthonormal vectors in `basis`
/// using `passes` rounds of classical Gram-Schmidt.
pub fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>], passes: usize) {
    for _ in 0..passes {
        let coeffs: Vec<f64> = basis.iter().map(|q| dot(v, q)).collect();
        for (c, q) in coeffs.iter().zip(basis) {
            axpy(-c, q, v);
        }
    }
}

/// Rank tolerance `max(rows, cols) * 2^-52`, applied relative to the largest
/// eigenvalue of a Gram matrix.
pub fn default_rank_tol(rows: usize, cols: usize) -> f64 {
    rows.max(cols).max(1) as f64 * f64::EPSILON
}

/// Eigendecomposition `S = Q diag(values) Qᵀ` of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEig {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, matching `values`.
    pub vectors: Matrix,
}

impl SymEig {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn lambda_max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn lambda_min(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.vectors.col(i)
    }

    pub fn reconstruct(&self) -> Matrix {
        let n = self.dim();
        let mut s = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for (k, lam) in self.values.iter().enumerate() {
                    acc += self.vectors.get(i, k) * lam * self.vectors.get(j, k);
                }
                s.set(i, j, acc);
            }
        }
        s
    }

    /// Applies the rank-truncated pseudoinverse: eigenvalues at or below
    /// `rank_tol * lambda_max` are treated as zero.
    pub fn pseudo_apply(&self, v: &[f64], rank_tol: f64) -> Result<Vec<f64>> {
        check_len("pseudo_apply vector", self.dim(), v.len())?;
        let n = self.dim();
        let mut out = vec![0.0; n];
        let lmax = self.lambda_max();
        if lmax <= 0.0 {
            return Ok(out);
        }
        let cutoff = rank_tol * lmax;
        for (k, &lam) in self.values.iter().enumerate() {
            if lam <= cutoff {
                break;
            }
            let c = v.iter().enumerate().map(|(i, vi)| self.vectors.get(i, k) * vi).sum::<f64>() / lam;
            for (i, o) in out.iter_mut().enumerate() {
                *o += c * self.vectors.get(i, k);
            }
        }
        Ok(out)
    }

    /// Number of eigenvalues above `rank_tol * lambda_max`.
    pub fn numerical_rank(&self, rank_tol: f64) -> usize {
        let lmax = self.lambda_max();
        if lmax <= 0.0 {
            return 0;
        }
        self.values.iter().filter(|&&l| l > rank_tol * lmax).count()
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Rejects non-square input and input whose asymmetry exceeds
/// `1e-12 * max(1, max|S|)`.
pub fn sym_eig(s: &Matrix) -> Result<SymEig> {
    if !s.is_square() {
        return Err(Error::NotSquare {
            rows: s.rows(),
            cols: s.cols(),
        });
    }
    let asym = s.asymmetry();
    if asym > 1e-12 * s.max_abs().max(1.0) {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    let n = s.rows();
    let mut a = s.clone();
    // symmetrise so rotations act on an exactly symmetric matrix
    for i in 0..n {
        for j in i + 1..n {
            let m = 0.5 * (a.get(i, j) + a.get(j, i));
            a.set(i, j, m);
            a.set(j, i, m);
        }
    }
    let mut v = Matrix::identity(n);
    let scale = a.frobenius();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += a.get(i, j) * a.get(i, j);
            }
        }
        if off.sqrt() <= 1e-3 * f64::EPSILON * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_infinite() {
                    0.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                if t == 0.0 {
                    a.set(p, q, 0.0);
                    a.set(q, p, 0.0);
                    continue;
                }
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - sn * akq);
                    a.set(k, q, sn * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - sn * aqk);
                    a.set(q, k, sn * apk + c * aqk);
                }
                a.set(p, q, 0.0);
                a.set(q, p, 0.0);
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - sn * vkq);
                    v.set(k, q, sn * vkp + c * vkq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps ties in index order
    order.sort_by(|&i, &j| a.get(j, j).total_cmp(&a.get(i, i)));
    let values = order.iter().map(|&i| a.get(i, i)).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors.set(k, dst, v.get(k, src));
        }
    }
    Ok(SymEig { values, vectors })
}

/// Applies the rank-truncated pseudoinverse of the matrix decomposed in `eig`.
pub fn pseudo_apply(eig: &SymEig, v: &[f64], rank_tol: f64) -> Result<Vec<f64>> {
    eig.pseudo_apply(v, rank_tol)
}

/// Orthonormal basis of the row space `R(Aᵀ)`, returned as the columns of an
/// `n x r` matrix with `r` the numerical rank of `A`.
///
/// `rank_tol` is relative to the largest eigenvalue of the smaller Gram
/// matrix (`AᵀA` or `AAᵀ`).
pub fn orthonormal_range_basis(a: &Matrix, rank_tol: f64) -> Result<Matrix> {
    let (m, n) = (a.rows(), a.cols());
    if m == 0 || n == 0 {
        return Err(Error::Contract(
            "range basis needs nonzero dimensions".into(),
        ));
    }
    let cols = if n <= m {
        let eig = sym_eig(&a.gram_cols())?;
        let r = eig.numerical_rank(rank_tol);
        (0..r).map(|k| eig.vector(k)).collect::<Vec<_>>()
    } else {
        let eig = sym_eig(&a.gram_rows())?;
        let r = eig.numerical_rank(rank_tol);
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(r);
        for k in 0..r {
            let mut v = a.matvec_t(&eig.vector(k));
            orthogonalize(&mut v, &basis, 2);
            let nv = norm(&v);
            if nv == 0.0 {
                continue;
            }
            basis.push(scale(1.0 / nv, &v));
        }
        basis
    };
    Matrix::from_columns(n, &cols)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn eig_of_diagonal() {
        let e = sym_eig(&m(&[&[2.0, 0.0], &[0.0, 3.0]])).unwrap();
        assert_eq!(e.values, vec![3.0, 2.0]);
        assert_eq!(e.vector(0).iter().map(|v| v.abs()).collect::<Vec<_>>(), vec![0.0, 1.0]);
        assert_eq!(e.vector(1).iter().map(|v| v.abs()).collect::<Vec<_>>(), vec![1.0, 0.0]);
    }

    #[test]
    fn eig_of_zero() {
        let e = sym_eig(&Matrix::zeros(2, 2)).unwrap();
        assert_eq!(e.values, vec![0.0, 0.0]);
    }

    #[test]
    fn eig_of_two_by_two() {
        // roots of (2 - l)^2 - 1 = 0
        let e = sym_eig(&m(&[&[2.0, 1.0], &[1.0, 2.0]])).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_rejects_bad_input() {
        assert!(matches!(
            sym_eig(&Matrix::zeros(2, 3)),
            Err(Error::NotSquare { .. })
        ));
        assert!(matches!(
            sym_eig(&m(&[&[1.0, 2.0], &[0.0, 1.0]])),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn pseudo_apply_cases() {
        let id = sym_eig(&Matrix::identity(3)).unwrap();
        assert_eq!(id.pseudo_apply(&[1.0, -2.0, 3.0], 1e-12).unwrap(), vec![1.0, -2.0, 3.0]);

        let zero = sym_eig(&Matrix::zeros(2, 2)).unwrap();
        assert_eq!(zero.pseudo_apply(&[5.0, 7.0], 1e-12).unwrap(), vec![0.0, 0.0]);

        // rank-1 truncation: (4, 1) -> (4/4, dropped)
        let d = sym_eig(&m(&[&[4.0, 0.0], &[0.0, 1e-20]])).unwrap();
        let out = d.pseudo_apply(&[4.0, 1.0], 1e-12).unwrap();
        assert_eq!(out, vec![1.0, 0.0]);

        assert!(matches!(
            id.pseudo_apply(&[1.0], 1e-12),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn range_basis_cases() {
        let b = orthonormal_range_basis(&Matrix::identity(3), 1e-12).unwrap();
        assert_eq!(b.cols(), 3);

        let b = orthonormal_range_basis(&m(&[&[1.0, 0.0, 0.0]]), 1e-12).unwrap();
        assert_eq!(b.cols(), 1);
        assert!((b.get(0, 0).abs() - 1.0).abs() < 1e-14);
        assert!(b.get(1, 0).abs() < 1e-14 && b.get(2, 0).abs() < 1e-14);

        let b = orthonormal_range_basis(&m(&[&[1.0, 1.0], &[1.0, 1.0]]), 1e-12).unwrap();
        assert_eq!(b.cols(), 1);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((b.get(0, 0).abs() - h).abs() < 1e-14);
        assert!((b.get(1, 0).abs() - h).abs() < 1e-14);
        assert!(b.get(0, 0) * b.get(1, 0) > 0.0);
    }

    #[test]
    fn matrix_shapes() {
        let a = m(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        assert_eq!(a.matvec(&[1.0, 0.0, -1.0]), vec![-2.0, -2.0]);
        assert_eq!(a.matvec_t(&[1.0, 1.0]), vec![5.0, 7.0, 9.0]);
        assert_eq!(a.transpose().transpose(), a);
        let g = a.gram_rows();
        assert_eq!(g.data(), &[14.0, 32.0, 32.0, 77.0]);
        assert!(Matrix::from_row_major(2, 2, vec![1.0]).is_err());
        assert!(Matrix::from_row_major(1, 1, vec![f64::NAN]).is_err());
    }
}
