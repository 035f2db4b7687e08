//! Dense column-major matrices over `f32` or `f64`.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{Index, IndexMut};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Working precisions: `f32` for the algorithms, `f64` for oracles.
pub trait Real: Float + FromPrimitive + ToPrimitive + Sum + Debug + Default + Send + Sync + 'static {
    fn of(x: f64) -> Self;
    fn f64(self) -> f64;
}

impl Real for f32 {
    fn of(x: f64) -> Self {
        x as f32
    }
    fn f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn of(x: f64) -> Self {
        x
    }
    fn f64(self) -> f64 {
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    /// Wraps column-major `data`.
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "Matrix::new",
                format!("{rows}x{cols} needs {} values, got {}", rows * cols, data.len()),
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Builds from row-major nested rows (handy in tests).
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::shape("Matrix::from_rows", "ragged rows"));
        }
        Ok(Self::from_fn(m, n, |i, j| rows[i][j]))
    }

    pub fn diag(values: &[T]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { values[i] } else { T::zero() })
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

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn col(&self, j: usize) -> &[T] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [T] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// Columns `start..end` as a new matrix.
    pub fn columns(&self, start: usize, end: usize) -> Self {
        Matrix { rows: self.rows, cols: end - start, data: self.data[start * self.rows..end * self.rows].to_vec() }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn cast<U: Real>(&self) -> Matrix<U> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| U::of(x.f64())).collect() }
    }

    pub fn to_f64(&self) -> Matrix<f64> {
        self.cast()
    }

    pub fn to_f32(&self) -> Matrix<f32> {
        self.cast()
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|x| x * s)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip(other, "Matrix::sub", |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip(other, "Matrix::add", |a, b| a + b)
    }

    fn zip(&self, other: &Self, op: &'static str, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::shape(op, format!("{:?} vs {:?}", self.shape(), other.shape())));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    /// Frobenius norm, accumulated in `f64`.
    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x.f64() * x.f64()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m: f64, x| m.max(x.f64().abs()))
    }

    pub fn count_non_finite(&self) -> usize {
        self.data.iter().filter(|x| !x.is_finite()).count()
    }

    pub fn is_finite(&self) -> bool {
        self.count_non_finite() == 0
    }

    /// `self * other` in precision `T`, one axpy per term, fixed order.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::shape("matmul", format!("{:?} x {:?}", self.shape(), other.shape())));
        }
        let m = self.rows;
        let mut out = Self::zeros(m, other.cols);
        if m == 0 {
            return Ok(out);
        }
        out.data.par_chunks_mut(m).enumerate().for_each(|(j, c)| {
            for (l, &b) in other.col(j).iter().enumerate() {
                if b != T::zero() {
                    for (ci, &a) in c.iter_mut().zip(self.col(l)) {
                        *ci = *ci + a * b;
                    }
                }
            }
        });
        Ok(out)
    }

    /// `self^T * other` in precision `T`, without forming the transpose.
    pub fn t_matmul(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::shape("t_matmul", format!("{:?}^T x {:?}", self.shape(), other.shape())));
        }
        let n = self.cols;
        let mut out = Self::zeros(n, other.cols);
        if n == 0 {
            return Ok(out);
        }
        out.data.par_chunks_mut(n).enumerate().for_each(|(j, c)| {
            let b = other.col(j);
            for (i, ci) in c.iter_mut().enumerate() {
                *ci = dot(self.col(i), b);
            }
        });
        Ok(out)
    }

    /// `||self^T self - I||_F`, in `f64`.
    pub fn orthonormality_defect(&self) -> f64 {
        let q = self.to_f64();
        let g = q.t_matmul(&q).expect("square gram");
        let mut s = 0.0;
        for j in 0..g.cols {
            for i in 0..g.rows {
                let d = g[(i, j)] - if i == j { 1.0 } else { 0.0 };
                s += d * d;
            }
        }
        s.sqrt()
    }
}

/// Dot product with four interleaved partial sums.
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for r in 0..4 {
            acc[r] = acc[r] + a[4 * c + r] * b[4 * c + r];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s = s + a[i] * b[i];
    }
    s
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i + j * self.rows]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i + j * self.rows]
    }
}
