//! Hyper-rectangular domains.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A closed box `[a_1, b_1] × … × [a_d, b_d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::Config(format!(
                "bounds need matching non-empty corners, got {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        for (j, (a, b)) in lower.iter().zip(&upper).enumerate() {
            if !(a < b) || !a.is_finite() || !b.is_finite() {
                return Err(Error::Config(format!("degenerate bound {j}: [{a}, {b}]")));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn unit(d: usize) -> Self {
        Self { lower: alloc::vec![0.0; d], upper: alloc::vec![1.0; d] }
    }

    pub fn cube(d: usize, a: f64, b: f64) -> Self {
        Self::new(alloc::vec![a; d], alloc::vec![b; d]).expect("valid cube")
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    #[inline]
    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    #[inline]
    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    #[inline]
    pub fn width(&self, j: usize) -> f64 {
        self.upper[j] - self.lower[j]
    }

    pub fn min_side(&self) -> f64 {
        (0..self.dim()).map(|j| self.width(j)).fold(f64::INFINITY, f64::min)
    }

    pub fn diagonal(&self) -> f64 {
        libm::sqrt((0..self.dim()).map(|j| self.width(j) * self.width(j)).sum())
    }

    /// Whether `y` lies in the closed box.
    #[inline]
    pub fn contains(&self, y: &[f64]) -> bool {
        y.iter().zip(&self.lower).zip(&self.upper).all(|((v, a), b)| *v >= *a && *v <= *b)
    }

    pub fn check(&self, y: &[f64]) -> Result<()> {
        for j in 0..self.dim() {
            if !(y[j] >= self.lower[j] && y[j] <= self.upper[j]) {
                return Err(Error::OutOfBounds {
                    coordinate: j,
                    value: y[j],
                    lower: self.lower[j],
                    upper: self.upper[j],
                });
            }
        }
        Ok(())
    }

    /// Clamps `y` into the box in place.
    #[inline]
    pub fn project(&self, y: &mut [f64]) {
        for j in 0..y.len() {
            y[j] = y[j].clamp(self.lower[j], self.upper[j]);
        }
    }

    /// Maps a point of the unit cube into the box.
    #[inline]
    pub fn from_unit(&self, u: &[f64], out: &mut [f64]) {
        for j in 0..u.len() {
            out[j] = self.lower[j] + u[j] * self.width(j);
        }
    }

    #[inline]
    pub fn to_unit(&self, y: &[f64], out: &mut [f64]) {
        for j in 0..y.len() {
            out[j] = (y[j] - self.lower[j]) / self.width(j);
        }
    }

    pub fn center(&self) -> Vec<f64> {
        (0..self.dim()).map(|j| 0.5 * (self.lower[j] + self.upper[j])).collect()
    }
}
