//! Sobol' low-discrepancy sequences (Joe–Kuo direction numbers, Gray-code
//! order) with optional nested uniform (Owen) scrambling.

use alloc::vec;
use alloc::vec::Vec;

use super::direction_numbers::{MAX_DIMENSION, PRIMITIVES};
use super::seed::mix64;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

const BITS: usize = 32;
/// Largest number of points a stream may emit.
pub const MAX_POINTS: u64 = 1 << 31;
const INV_2_32: f64 = 1.0 / 4_294_967_296.0;
const INV_2_53: f64 = 1.0 / 9_007_199_254_740_992.0;
const ONE_BELOW: f64 = 1.0 - INV_2_53;

/// A deterministic cursor over a (possibly scrambled) Sobol' sequence.
///
/// Clone the stream to hand an independent, identically positioned copy to
/// another consumer.
#[derive(Debug, Clone)]
pub struct SobolStream {
    dimension: usize,
    scramble_seed: Option<u64>,
    cursor: u64,
    directions: Vec<[u32; BITS]>,
    /// Gray-code state for `cursor`, i.e. the unscrambled integer point.
    state: Vec<u32>,
    dim_keys: Vec<u64>,
}

fn direction_vectors(dim: usize) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    if dim == 0 {
        for (b, slot) in v.iter_mut().enumerate() {
            *slot = 1 << (31 - b);
        }
        return v;
    }
    let (s, a, m) = PRIMITIVES[dim - 1];
    let s = s as usize;
    for b in 0..s.min(BITS) {
        v[b] = m[b] << (31 - b);
    }
    for b in s..BITS {
        let mut x = v[b - s] ^ (v[b - s] >> s);
        for k in 1..s {
            if (a >> (s - 1 - k)) & 1 == 1 {
                x ^= v[b - k];
            }
        }
        v[b] = x;
    }
    v
}

impl SobolStream {
    /// Creates a stream. `scramble_seed = None` yields the raw sequence
    /// starting at the origin.
    pub fn new(dimension: usize, scramble_seed: Option<u64>) -> Result<Self> {
        if dimension == 0 || dimension > MAX_DIMENSION {
            return Err(Error::Config(alloc::format!(
                "Sobol' dimension {dimension} outside supported range 1..={MAX_DIMENSION}"
            )));
        }
        let directions = (0..dimension).map(direction_vectors).collect();
        let dim_keys = match scramble_seed {
            Some(seed) => (0..dimension)
                .map(|d| mix64(seed ^ mix64(0x5eed_0000_0000_0000 ^ d as u64)))
                .collect(),
            None => Vec::new(),
        };
        Ok(Self {
            dimension,
            scramble_seed,
            cursor: 0,
            directions,
            state: vec![0; dimension],
            dim_keys,
        })
    }

    pub fn scrambled(dimension: usize, seed: u64) -> Result<Self> {
        Self::new(dimension, Some(seed))
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn scramble_seed(&self) -> Option<u64> {
        self.scramble_seed
    }

    pub fn cursor(&self) -> u64 {
        self.cursor
    }

    /// Moves the cursor to an absolute index.
    pub fn seek(&mut self, index: u64) -> Result<()> {
        if index > MAX_POINTS {
            return Err(Error::StreamExhausted { cursor: index, requested: 0 });
        }
        let gray = index ^ (index >> 1);
        for (d, s) in self.state.iter_mut().enumerate() {
            let mut x = 0u32;
            for b in 0..BITS {
                if (gray >> b) & 1 == 1 {
                    x ^= self.directions[d][b];
                }
            }
            *s = x;
        }
        self.cursor = index;
        Ok(())
    }

    /// Skips `count` points.
    pub fn skip(&mut self, count: u64) -> Result<()> {
        self.seek(self.cursor.saturating_add(count))
    }

    /// Writes the next point into `out` (length `dimension`).
    pub fn next_into(&mut self, out: &mut [f64]) -> Result<()> {
        if self.cursor >= MAX_POINTS {
            return Err(Error::StreamExhausted { cursor: self.cursor, requested: 1 });
        }
        debug_assert_eq!(out.len(), self.dimension);
        match self.scramble_seed {
            None => {
                for (o, &x) in out.iter_mut().zip(&self.state) {
                    *o = x as f64 * INV_2_32;
                }
            }
            Some(_) => {
                for (d, o) in out.iter_mut().enumerate() {
                    *o = owen_scramble(self.state[d], self.dim_keys[d]);
                }
            }
        }
        // Advance the Gray-code state: flip the direction at the lowest zero bit.
        let c = (!self.cursor).trailing_zeros() as usize;
        if c < BITS {
            for (s, v) in self.state.iter_mut().zip(&self.directions) {
                *s ^= v[c];
            }
        }
        self.cursor += 1;
        Ok(())
    }

    /// Returns the next `count` points as a `count × dimension` matrix.
    pub fn points(&mut self, count: usize) -> Result<Matrix> {
        if count == 0 {
            return Err(Error::Config("requested zero Sobol' points".into()));
        }
        if self.cursor + count as u64 > MAX_POINTS {
            return Err(Error::StreamExhausted { cursor: self.cursor, requested: count as u64 });
        }
        let mut m = Matrix::zeros(count, self.dimension);
        for i in 0..count {
            self.next_into(m.row_mut(i))?;
        }
        Ok(m)
    }
}

/// Nested uniform scrambling of one 32-bit coordinate.
///
/// Each output bit is flipped according to a hash of the key, the bit level
/// and all more significant input bits, which is the defining property of
/// Owen's scheme. Bits below 2^-32 are filled with a uniform draw from the
/// same hash family so the result is strictly positive.
#[inline]
fn owen_scramble(x: u32, key: u64) -> f64 {
    let mut out = 0u32;
    for level in 0..BITS {
        let shift = 31 - level;
        let prefix = if level == 0 { 0 } else { (x >> (32 - level)) as u64 };
        let h = mix64(key ^ ((level as u64) << 56) ^ prefix.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let bit = ((x >> shift) & 1) ^ (h >> 63) as u32;
        out |= bit << shift;
    }
    let tail = mix64(key ^ (0xFFu64 << 56) ^ (x as u64).wrapping_mul(0xD1B5_4A32_D192_ED03));
    let frac = ((tail >> 11) as f64 + 0.5) * INV_2_53;
    let v = (out as f64 + frac) * INV_2_32;
    v.min(ONE_BELOW)
}
