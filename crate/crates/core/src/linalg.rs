//! Dense row-major matrices and the Cholesky machinery used by the GP.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Self { rows, cols, data }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self { rows: rows.len(), cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn push_row(&mut self, row: &[f64]) {
        if self.rows == 0 && self.cols == 0 {
            self.cols = row.len();
        }
        assert_eq!(row.len(), self.cols, "row length mismatch");
        self.data.extend_from_slice(row);
        self.rows += 1;
    }
}

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = A + jitter·I`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    n: usize,
    /// Packed row-major lower triangle: row `i` holds `i + 1` entries.
    l: Vec<f64>,
    jitter: f64,
}

#[inline]
fn tri(i: usize) -> usize {
    i * (i + 1) / 2
}

const JITTER_LADDER: [f64; 6] = [0.0, 1e-10, 1e-8, 1e-6, 1e-4, 1e-2];

impl Cholesky {
    /// Factorizes a symmetric matrix, escalating diagonal jitter when needed.
    ///
    /// Jitter is relative to the mean diagonal entry.
    pub fn factor(a: &Matrix) -> Result<Self> {
        assert_eq!(a.rows(), a.cols(), "Cholesky needs a square matrix");
        let n = a.rows();
        let scale = if n == 0 { 1.0 } else { (0..n).map(|i| a.get(i, i)).sum::<f64>() / n as f64 };
        let scale = if scale.is_finite() && scale > 0.0 { scale } else { 1.0 };
        for &rel in &JITTER_LADDER {
            let jitter = rel * scale;
            if let Some(l) = Self::try_factor(a, jitter) {
                return Ok(Self { n, l, jitter });
            }
        }
        Err(Error::NotPositiveDefinite { jitter: JITTER_LADDER[JITTER_LADDER.len() - 1] * scale })
    }

    fn try_factor(a: &Matrix, jitter: f64) -> Option<Vec<f64>> {
        let n = a.rows();
        let mut l = vec![0.0; tri(n)];
        for i in 0..n {
            for j in 0..=i {
                let mut s = a.get(i, j);
                let (ri, rj) = (tri(i), tri(j));
                for k in 0..j {
                    s -= l[ri + k] * l[rj + k];
                }
                if i == j {
                    let d = s + jitter;
                    if !(d > 0.0) || !d.is_finite() {
                        return None;
                    }
                    l[ri + i] = libm::sqrt(d);
                } else {
                    l[ri + j] = s / l[rj + j];
                }
            }
        }
        Some(l)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Diagonal jitter that was added to make the factorization succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        debug_assert!(j <= i);
        self.l[tri(i) + j]
    }

    /// Row `i` of `L` up to and including the diagonal.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.l[tri(i)..tri(i) + i + 1]
    }

    /// Solves `L x = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.n);
        for i in 0..self.n {
            let row = self.row(i);
            let mut s = b[i];
            for k in 0..i {
                s -= row[k] * b[k];
            }
            b[i] = s / row[i];
        }
    }

    /// Solves `Lᵀ x = b` in place.
    pub fn solve_upper_in_place(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.n);
        for i in (0..self.n).rev() {
            let xi = b[i] / self.at(i, i);
            b[i] = xi;
            let row = self.row(i);
            for k in 0..i {
                b[k] -= row[k] * xi;
            }
        }
    }

    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        x
    }

    /// Solves `(L Lᵀ) x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        x
    }

    /// `log det(L Lᵀ)`.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|i| libm::log(self.at(i, i))).sum::<f64>()
    }

    /// Inverse of `L Lᵀ` as a dense matrix.
    pub fn inverse(&self) -> Matrix {
        let n = self.n;
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            self.solve_lower_in_place(&mut e);
            self.solve_upper_in_place(&mut e);
            for i in 0..n {
                inv.set(i, j, e[i]);
            }
        }
        inv
    }

    /// Extends the factor of `A` to that of `[[A, b], [bᵀ, c]]`.
    ///
    /// Returns `None` when the Schur complement is not positive.
    pub fn extend(&self, b: &[f64], c: f64) -> Option<Self> {
        debug_assert_eq!(b.len(), self.n);
        let w = self.solve_lower(b);
        let schur = c + self.jitter - w.iter().map(|v| v * v).sum::<f64>();
        if !(schur > 0.0) || !schur.is_finite() {
            return None;
        }
        let mut l = Vec::with_capacity(tri(self.n + 1));
        l.extend_from_slice(&self.l);
        l.extend_from_slice(&w);
        l.push(libm::sqrt(schur));
        Some(Self { n: self.n + 1, l, jitter: self.jitter })
    }

    /// Reconstructs `L Lᵀ` (including any jitter).
    pub fn reconstruct(&self) -> Matrix {
        let n = self.n;
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let (ri, rj) = (self.row(i), self.row(j));
                let s: f64 = (0..=j).map(|k| ri[k] * rj[k]).sum();
                m.set(i, j, s);
                m.set(j, i, s);
            }
        }
        m
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}
