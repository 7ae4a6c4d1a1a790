//! Dense vectors and matrices.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A finite real vector of positive dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseVector<T> {
    data: Vec<T>,
}

/// The three norms used throughout: ℓ1, ℓ2 and ℓ∞.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Norms<T> {
    pub l1: T,
    pub l2: T,
    pub linf: T,
}

impl<T: Real> DenseVector<T> {
    /// Builds a vector, rejecting empty input and non-finite coordinates.
    pub fn new(data: Vec<T>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidDimension("vector must have d >= 1".into()));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("coordinate {i} is {}", data[i])));
        }
        Ok(Self { data })
    }

    /// Wraps data produced by arithmetic on already validated vectors.
    pub(crate) fn from_vec_unchecked(data: Vec<T>) -> Self {
        Self { data }
    }

    pub fn zeros(d: usize) -> Self {
        Self { data: vec![T::zero(); d] }
    }

    pub fn filled(d: usize, v: T) -> Self {
        Self { data: vec![v; d] }
    }

    pub fn basis(d: usize, i: usize) -> Self {
        let mut v = Self::zeros(d);
        v.data[i] = T::one();
        v
    }

    pub fn from_fn(d: usize, f: impl FnMut(usize) -> T) -> Self {
        Self { data: (0..d).map(f).collect() }
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.data.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimensionMismatch { expected, got: self.dim() });
        }
        Ok(())
    }

    pub fn dot(&self, other: &Self) -> T {
        debug_assert_eq!(self.dim(), other.dim());
        self.data.iter().zip(&other.data).map(|(a, b)| *a * *b).sum()
    }

    pub fn norm_l1(&self) -> T {
        self.data.iter().map(|v| v.abs()).sum()
    }

    pub fn norm_l2(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn norm_sq(&self) -> T {
        self.data.iter().map(|v| *v * *v).sum()
    }

    pub fn norm_linf(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn norms(&self) -> Norms<T> {
        norms(self)
    }

    /// `self += alpha * x`
    pub fn axpy(&mut self, alpha: T, x: &Self) {
        debug_assert_eq!(self.dim(), x.dim());
        for (a, b) in self.data.iter_mut().zip(&x.data) {
            *a = *a + alpha * *b;
        }
    }

    pub fn scale(&mut self, alpha: T) {
        for a in &mut self.data {
            *a = *a * alpha;
        }
    }

    pub fn scaled(&self, alpha: T) -> Self {
        Self::from_vec_unchecked(self.data.iter().map(|v| *v * alpha).collect())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_vec_unchecked(self.data.iter().map(|v| f(*v)).collect())
    }

    pub fn dist_sq(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a - *b) * (*a - *b))
            .sum()
    }

    /// Bit-level fingerprint, equal for bit-identical vectors.
    pub fn fingerprint(&self) -> u64 {
        // FNV-1a over the f64 bit patterns
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in &self.data {
            for byte in v.as_f64().to_bits().to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }
}

/// ℓ1, ℓ2 and ℓ∞ norms of `x`.
pub fn norms<T: Real>(x: &DenseVector<T>) -> Norms<T> {
    Norms { l1: x.norm_l1(), l2: x.norm_l2(), linf: x.norm_linf() }
}

impl<T> Index<usize> for DenseVector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.data[i]
    }
}

impl<T> IndexMut<usize> for DenseVector<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.data[i]
    }
}

impl<T: Real> Add for &DenseVector<T> {
    type Output = DenseVector<T>;
    fn add(self, rhs: Self) -> DenseVector<T> {
        debug_assert_eq!(self.dim(), rhs.dim());
        DenseVector::from_vec_unchecked(self.data.iter().zip(&rhs.data).map(|(a, b)| *a + *b).collect())
    }
}

impl<T: Real> Sub for &DenseVector<T> {
    type Output = DenseVector<T>;
    fn sub(self, rhs: Self) -> DenseVector<T> {
        debug_assert_eq!(self.dim(), rhs.dim());
        DenseVector::from_vec_unchecked(self.data.iter().zip(&rhs.data).map(|(a, b)| *a - *b).collect())
    }
}

impl<T: Real> Mul<T> for &DenseVector<T> {
    type Output = DenseVector<T>;
    fn mul(self, rhs: T) -> DenseVector<T> {
        self.scaled(rhs)
    }
}

impl<T: Real> Neg for &DenseVector<T> {
    type Output = DenseVector<T>;
    fn neg(self) -> DenseVector<T> {
        self.map(|v| -v)
    }
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, T::one());
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidDimension(format!("{rows}x{cols} matrix")));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix entry".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidDimension("ragged rows".into()));
        }
        Self::from_row_major(r, c, rows.iter().flatten().copied().collect())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Reshapes a flattened (row-major) vector.
    pub fn from_vector(rows: usize, cols: usize, v: &DenseVector<T>) -> Result<Self> {
        Self::from_row_major(rows, cols, v.as_slice().to_vec())
    }

    pub fn to_vector(&self) -> DenseVector<T> {
        DenseVector::from_vec_unchecked(self.data.clone())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| *a * *b).sum())
            .collect()
    }

    pub fn transpose_matvec(&self, y: &[T]) -> Vec<T> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (i, yi) in y.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o = *o + *a * *yi;
            }
        }
        out
    }

    /// `AᵀA`
    pub fn gram(&self) -> Self {
        let mut g = Self::zeros(self.cols, self.cols);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..self.cols {
                for j in i..self.cols {
                    let v = g.get(i, j) + row[i] * row[j];
                    g.set(i, j, v);
                }
            }
        }
        for i in 0..self.cols {
            for j in 0..i {
                g.set(i, j, g.get(j, i));
            }
        }
        g
    }

    pub fn frobenius_inner(&self, other: &Self) -> T {
        self.data.iter().zip(&other.data).map(|(a, b)| *a * *b).sum()
    }

    pub fn frobenius_norm(&self) -> T {
        self.frobenius_inner(self).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| *v == T::zero())
    }

    /// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
    pub fn symmetric_eigenvalues(&self) -> Vec<T> {
        assert_eq!(self.rows, self.cols, "square matrix required");
        let n = self.rows;
        let mut a = self.clone();
        let eps = T::epsilon();
        for _sweep in 0..100 {
            let mut off = T::zero();
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        off = off + a.get(i, j) * a.get(i, j);
                    }
                }
            }
            let scale: T = a.data.iter().map(|v| *v * *v).sum();
            if off <= eps * eps * scale || off == T::zero() {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a.get(p, q);
                    if apq == T::zero() {
                        continue;
                    }
                    let app = a.get(p, p);
                    let aqq = a.get(q, q);
                    let theta = (aqq - app) / (T::lit(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
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
                }
            }
        }
        let mut eig: Vec<T> = (0..n).map(|i| a.get(i, i)).collect();
        eig.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        eig
    }

    /// Singular values, descending, by one-sided Jacobi rotations.
    pub fn singular_values(&self) -> Vec<T> {
        // work on the orientation with at most as many columns as rows
        let a = if self.cols <= self.rows { self.clone() } else { self.transpose() };
        let (m, n) = (a.rows, a.cols);
        let mut cols: Vec<Vec<T>> = (0..n).map(|j| (0..m).map(|i| a.get(i, j)).collect()).collect();
        let eps = T::epsilon();
        for _sweep in 0..60 {
            let mut rotated = false;
            for p in 0..n {
                for q in (p + 1)..n {
                    let alpha: T = cols[p].iter().map(|v| *v * *v).sum();
                    let beta: T = cols[q].iter().map(|v| *v * *v).sum();
                    let gamma: T = cols[p].iter().zip(&cols[q]).map(|(x, y)| *x * *y).sum();
                    if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                    let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                    let c = T::one() / (T::one() + t * t).sqrt();
                    let s = c * t;
                    for i in 0..m {
                        let x = cols[p][i];
                        let y = cols[q][i];
                        cols[p][i] = c * x - s * y;
                        cols[q][i] = s * x + c * y;
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let mut sv: Vec<T> = cols.iter().map(|c| c.iter().map(|v| *v * *v).sum::<T>().sqrt()).collect();
        sv.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
        sv
    }

    pub fn nuclear_norm(&self) -> T {
        self.singular_values().into_iter().sum()
    }

    /// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
    pub fn cholesky(&self) -> Result<Self> {
        let n = self.rows;
        if n != self.cols {
            return Err(Error::DimensionMismatch { expected: n, got: self.cols });
        }
        let mut l = Self::zeros(n, n);
        for j in 0..n {
            let mut diag = self.get(j, j);
            for k in 0..j {
                diag = diag - l.get(j, k) * l.get(j, k);
            }
            if !(diag > T::zero()) {
                return Err(Error::NumericalFailure { iteration: j, what: "matrix is not positive definite".into() });
            }
            let ljj = diag.sqrt();
            l.set(j, j, ljj);
            for i in (j + 1)..n {
                let mut v = self.get(i, j);
                for k in 0..j {
                    v = v - l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, v / ljj);
            }
        }
        Ok(l)
    }

    pub fn log_det_spd(&self) -> Result<T> {
        let l = self.cholesky()?;
        Ok((0..self.rows).map(|i| l.get(i, i).ln()).sum::<T>() * T::lit(2.0))
    }

    /// Operator (spectral) norm of a symmetric matrix.
    pub fn symmetric_spectral_norm(&self) -> T {
        self.symmetric_eigenvalues().into_iter().fold(T::zero(), |m, l| m.max(l.abs()))
    }
}
