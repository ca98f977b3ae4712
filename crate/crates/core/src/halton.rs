//! Plain (unscrambled) Halton sequences used as multivariate rank targets.
//!
//! Point `i ≥ 1` in dimension `d` is the vector of radical inverses of `i` in the
//! first `d` prime bases. The radical inverse is formed as an exact integer
//! ratio and divided once, so distinct indices give distinct floats.

use alloc::format;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// The prime bases available to [`HaltonSequence`].
pub const PRIMES: [u64; 20] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71,
];

pub const MAX_DIM: usize = PRIMES.len();

/// Radical inverse of `index` in `base`: the base-`b` digits of `index` mirrored about the point.
pub fn halton_point(index: u64, base: u64) -> Result<f64> {
    if index == 0 {
        return Err(Error::invalid("Halton index must be at least 1"));
    }
    if base < 2 {
        return Err(Error::invalid(format!("Halton base {base} must be at least 2")));
    }
    let mut rest = index;
    let mut numerator: u128 = 0;
    let mut denominator: u128 = 1;
    while rest > 0 {
        numerator = numerator * base as u128 + (rest % base) as u128;
        denominator *= base as u128;
        rest /= base;
    }
    Ok(numerator as f64 / denominator as f64)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HaltonSequence {
    dim: usize,
    index_offset: u64,
}

impl HaltonSequence {
    pub fn new(dim: usize) -> Result<Self> {
        Self::with_offset(dim, 0)
    }

    /// Points start at index `1 + offset`.
    pub fn with_offset(dim: usize, index_offset: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("Halton dimension must be positive"));
        }
        if dim > MAX_DIM {
            return Err(Error::UnsupportedDimension { dim, max: MAX_DIM });
        }
        Ok(HaltonSequence { dim, index_offset })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bases(&self) -> &'static [u64] {
        &PRIMES[..self.dim]
    }

    /// Writes point number `k` (0-based within this sequence) into `out`.
    pub fn point_into(&self, k: u64, out: &mut [f64]) {
        let index = k + 1 + self.index_offset;
        for (v, &b) in out.iter_mut().zip(self.bases()) {
            *v = halton_point(index, b).expect("index and base validated");
        }
    }

    /// The first `n` points as an `n × d` matrix.
    pub fn block(&self, n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, self.dim);
        for i in 0..n {
            self.point_into(i as u64, m.row_mut(i));
        }
        m
    }
}

/// Rows `1..=n` of the `d`-dimensional Halton sequence.
pub fn halton_block(n: usize, d: usize) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::invalid("Halton block needs at least one point"));
    }
    Ok(HaltonSequence::new(d)?.block(n))
}
