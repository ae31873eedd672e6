//! Dense vectors and matrices at desk scale.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Index, IndexMut, Sub};

use crate::error::CoreError;

/// A point of the ambient space `R^d`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn from_slice(coords: &[f64]) -> Self {
        Point(coords.to_vec())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    #[inline]
    pub fn dot(&self, other: &Point) -> f64 {
        dot(&self.0, &other.0)
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        libm::sqrt(self.norm_sq())
    }

    pub fn dist_sq(&self, other: &Point) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn dist(&self, other: &Point) -> f64 {
        libm::sqrt(self.dist_sq(other))
    }

    pub fn scaled(&self, s: f64) -> Point {
        Point(self.0.iter().map(|v| s * v).collect())
    }

    /// `self + s * other`
    pub fn add_scaled(&self, s: f64, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a + s * b).collect())
    }

    /// In-place `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &Point) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += s * b;
        }
    }

    /// `(1 - t) * self + t * other`
    pub fn lerp(&self, other: &Point, t: f64) -> Point {
        Point(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| (1.0 - t) * a + t * b)
                .collect(),
        )
    }

    pub fn max_abs_diff(&self, other: &Point) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()))
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

impl Index<usize> for Point {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Point {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add for &Point {
    type Output = Point;
    fn add(self, rhs: &Point) -> Point {
        Point(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &Point {
    type Output = Point;
    fn sub(self, rhs: &Point) -> Point {
        Point(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<(), CoreError> {
    if expected == got {
        Ok(())
    } else {
        Err(CoreError::DimensionMismatch { expected, got })
    }
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, CoreError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            check_dim(c, row.len())?;
            data.extend_from_slice(row);
        }
        Ok(Matrix {
            rows: r,
            cols: c,
            data,
        })
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

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.rows).all(|i| (0..self.cols).all(|j| i == j || self[(i, j)] == 0.0))
    }

    pub fn mul_vec(&self, x: &Point) -> Point {
        debug_assert_eq!(self.cols, x.dim());
        Point((0..self.rows).map(|i| dot(self.row(i), x.as_slice())).collect())
    }

    /// `self^T x`
    pub fn tr_mul_vec(&self, x: &Point) -> Point {
        debug_assert_eq!(self.rows, x.dim());
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * xi;
            }
        }
        Point(out)
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| s * a).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|a| a * a).sum())
    }

    /// Spectral norm estimate by power iteration on `M^T M`.
    pub fn spectral_norm(&self) -> f64 {
        const MAX_ITERS: usize = 2000;
        if self.data.iter().all(|a| *a == 0.0) {
            return 0.0;
        }
        // Irregular start so that no singular direction is orthogonal to it by symmetry.
        let mut v = Point(
            (0..self.cols)
                .map(|j| 1.0 + 0.1 * libm::sin(j as f64 + 1.0))
                .collect(),
        );
        let n = v.norm();
        v = v.scaled(1.0 / n);
        let mut sigma_sq = 0.0;
        for _ in 0..MAX_ITERS {
            let w = self.tr_mul_vec(&self.mul_vec(&v));
            let next = v.dot(&w);
            let wn = w.norm();
            if wn == 0.0 {
                break;
            }
            v = w.scaled(1.0 / wn);
            let done = (next - sigma_sq).abs() <= 1e-15 * next.abs();
            sigma_sq = f64::max(sigma_sq, next);
            if done {
                break;
            }
        }
        // Rayleigh quotient of the final vector is the tightest available lower estimate.
        let w = self.mul_vec(&v);
        f64::max(libm::sqrt(sigma_sq), w.norm())
    }

    /// Solves `self * x = b` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &Point) -> Result<Point, CoreError> {
        if !self.is_square() {
            return Err(CoreError::DimensionMismatch {
                expected: self.rows,
                got: self.cols,
            });
        }
        check_dim(self.rows, b.dim())?;
        let n = self.rows;
        let mut a = self.data.clone();
        let mut rhs = b.0.clone();
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
                .unwrap_or(col);
            if a[pivot * n + col].abs() <= 1e-14 * scale.max(1.0) {
                return Err(CoreError::SingularSystem);
            }
            if pivot != col {
                for j in 0..n {
                    a.swap(col * n + j, pivot * n + j);
                }
                rhs.swap(col, pivot);
            }
            let p = a[col * n + col];
            for i in col + 1..n {
                let factor = a[i * n + col] / p;
                if factor != 0.0 {
                    for j in col..n {
                        a[i * n + j] -= factor * a[col * n + j];
                    }
                    rhs[i] -= factor * rhs[col];
                }
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| a[i * n + j] * x[j]).sum();
            x[i] = (rhs[i] - s) / a[i * n + i];
        }
        Ok(Point(x))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn spectral_norm_of_diagonal() {
        let m = Matrix::diagonal(&[1.0, -3.0, 2.0]);
        assert!((m.spectral_norm() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_norm_of_rotation_block() {
        // [[0, 2], [-2, 0]] has both singular values equal to 2.
        let m = Matrix::from_rows(&[vec![0.0, 2.0], vec![-2.0, 0.0]]).unwrap();
        assert!((m.spectral_norm() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn solve_small_system() {
        let m = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let x = m.solve(&Point::new(vec![3.0, 5.0])).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14);
        assert!((x[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn solve_rejects_singular() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert_eq!(m.solve(&Point::new(vec![1.0, 1.0])), Err(CoreError::SingularSystem));
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(Matrix::from_rows(&[vec![1.0, 2.0], vec![1.0]]).is_err());
    }
}
