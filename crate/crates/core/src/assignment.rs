//! Exact balanced linear sum assignment.
//!
//! Jonker–Volgenant: column reduction with reduction transfer, then a
//! Dijkstra-style shortest augmenting path for every row still free.
//! `O(n³)` worst case. The augmenting row reduction phase is left out; on
//! rank-matching costs it costs more than it saves.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::{Matrix, Permutation};

/// Above this size a warning is logged.
pub const WARN_SIZE: usize = 4096;
/// Above this size solving is refused.
pub const MAX_SIZE: usize = 16384;

/// A square matrix of finite, non-negative costs. `value(i, j)` is the cost of giving column `j` to row `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    values: Vec<f64>,
}

impl CostMatrix {
    /// Validates squareness, finiteness and non-negativity.
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::shape(
                format!("{} entries for a {n}x{n} cost matrix", n * n),
                format!("{} entries", values.len()),
            ));
        }
        for (k, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row: k / n, col: k % n });
            }
            if v < 0.0 {
                return Err(Error::invalid(format!("negative cost {v} at ({}, {})", k / n, k % n)));
            }
        }
        Ok(CostMatrix { n, values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let m = Matrix::from_rows(rows)?;
        if m.rows() != m.cols() && m.rows() != 0 {
            return Err(Error::shape("square cost matrix", format!("{}x{}", m.rows(), m.cols())));
        }
        CostMatrix::new(m.rows(), m.into_vec())
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n + col]
    }

    /// `Σ_col value(perm(col), col)`.
    pub fn cost_of(&self, perm: &Permutation) -> f64 {
        (0..self.n).map(|c| self.value(perm.apply(c), c)).sum()
    }
}

/// A minimum-cost perfect matching: column `c` is assigned row `perm(c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub perm: Permutation,
    pub total_cost: f64,
}

/// Cost matrix `C_ij = ‖points_i − targets_j‖² / n` for rank computation.
pub fn rank_cost_matrix(points: &Matrix, targets: &Matrix) -> Result<CostMatrix> {
    points.check_same_shape(targets)?;
    let n = points.rows();
    let scale = if n == 0 { 0.0 } else { 1.0 / n as f64 };
    let mut values = Vec::with_capacity(n * n);
    for p in points.iter_rows() {
        for t in targets.iter_rows() {
            let d2: f64 = p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
            values.push(d2 * scale);
        }
    }
    CostMatrix::new(n, values)
}

/// Minimum-cost perfect matching. Ties are resolved by scan order and are not part of the contract.
pub fn solve_lsap(costs: &CostMatrix) -> Result<Assignment> {
    let n = costs.n;
    if n > MAX_SIZE {
        return Err(Error::TooLarge { n, max: MAX_SIZE });
    }
    if n > WARN_SIZE {
        log::warn!("solving a {n}x{n} assignment problem; expect O(n^3) running time");
    }
    if n == 0 {
        return Ok(Assignment {
            perm: Permutation::identity(0),
            total_cost: 0.0,
        });
    }
    let mut jv = Jv::new(costs);
    for i in jv.column_reduction() {
        jv.augment(i)?;
    }
    // perm(col) = row holding that column
    let perm = Permutation::from_vec(jv.y.iter().map(|&i| i as usize).collect())?;
    let total_cost = costs.cost_of(&perm);
    Ok(Assignment { perm, total_cost })
}

const NONE: isize = -1;

/// Jonker–Volgenant state: `x[row]` = column, `y[col]` = row, `v` = column duals.
struct Jv<'a> {
    n: usize,
    c: &'a [f64],
    x: Vec<isize>,
    y: Vec<isize>,
    v: Vec<f64>,
}

impl<'a> Jv<'a> {
    fn new(costs: &'a CostMatrix) -> Self {
        let n = costs.n;
        Jv {
            n,
            c: &costs.values,
            x: vec![NONE; n],
            y: vec![NONE; n],
            v: vec![f64::INFINITY; n],
        }
    }

    #[inline]
    fn cost(&self, i: usize, j: usize) -> f64 {
        self.c[i * self.n + j]
    }

    /// Column reduction with reduction transfer; returns the unassigned rows.
    #[allow(clippy::needless_range_loop)]
    fn column_reduction(&mut self) -> Vec<usize> {
        let n = self.n;
        let mut argmin = vec![0usize; n];
        for i in 0..n {
            for j in 0..n {
                let c = self.cost(i, j);
                if c < self.v[j] {
                    self.v[j] = c;
                    argmin[j] = i;
                }
            }
        }
        let mut unique = vec![true; n];
        for j in (0..n).rev() {
            let i = argmin[j];
            if self.x[i] == NONE {
                self.x[i] = j as isize;
                self.y[j] = i as isize;
            } else {
                unique[i] = false;
            }
        }
        let mut free = Vec::new();
        for i in 0..n {
            if self.x[i] == NONE {
                free.push(i);
            } else if unique[i] && n > 1 {
                let j = self.x[i] as usize;
                let mut min = f64::INFINITY;
                for j2 in 0..n {
                    if j2 != j {
                        min = min.min(self.cost(i, j2) - self.v[j2]);
                    }
                }
                self.v[j] -= min;
            }
        }
        free
    }

    /// Shortest augmenting path from free row `start` (Dijkstra on reduced costs).
    fn augment(&mut self, start: usize) -> Result<()> {
        let n = self.n;
        let mut cols: Vec<usize> = (0..n).collect();
        let mut d: Vec<f64> = (0..n).map(|j| self.cost(start, j) - self.v[j]).collect();
        let mut pred = vec![start; n];
        // cols[..lo] ready, cols[lo..hi] to scan, cols[hi..] untouched
        let (mut lo, mut hi) = (0usize, 0usize);
        let mut n_ready = 0usize;
        let mut level = 0.0;
        let mut end = None;
        let mut guard = 0usize;
        while end.is_none() {
            guard += 1;
            if guard > 4 * n + 4 {
                return Err(Error::numeric("assignment search did not terminate"));
            }
            if lo == hi {
                n_ready = lo;
                let mut mind = d[cols[lo]];
                let first = lo + 1;
                hi = first;
                for k in first..n {
                    let j = cols[k];
                    if d[j] <= mind {
                        if d[j] < mind {
                            hi = lo;
                            mind = d[j];
                        }
                        cols[k] = cols[hi];
                        cols[hi] = j;
                        hi += 1;
                    }
                }
                level = mind;
                for &j in &cols[lo..hi] {
                    if self.y[j] == NONE {
                        end = Some(j);
                        break;
                    }
                }
            }
            if end.is_none() {
                // scan
                while lo != hi && end.is_none() {
                    let j = cols[lo];
                    lo += 1;
                    let i = self.y[j] as usize;
                    let mind = d[j];
                    let h = self.cost(i, j) - self.v[j] - mind;
                    let mut k = hi;
                    while k < n {
                        let j = cols[k];
                        let red = self.cost(i, j) - self.v[j] - h;
                        if red < d[j] {
                            d[j] = red;
                            pred[j] = i;
                            if red == mind {
                                if self.y[j] == NONE {
                                    end = Some(j);
                                    break;
                                }
                                cols[k] = cols[hi];
                                cols[hi] = j;
                                hi += 1;
                            }
                        }
                        k += 1;
                    }
                }
            }
        }
        for &j in &cols[..n_ready] {
            self.v[j] += d[j] - level;
        }
        let mut j = end.expect("loop exits with a path end");
        loop {
            let i = pred[j];
            self.y[j] = i as isize;
            let next = self.x[i];
            self.x[i] = j as isize;
            if i == start {
                break;
            }
            j = next as usize;
        }
        Ok(())
    }
}
