//! Grid world and hidden ground truth.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rectangular search area of `rows x cols` cells, flattened row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridEnvironment {
    pub rows: usize,
    pub cols: usize,
    /// Meters per grid step. Dimensionless (1.0) for the synthetic benchmark.
    #[serde(default = "default_cell_size")]
    pub cell_size: f64,
}

fn default_cell_size() -> f64 {
    1.0
}

impl GridEnvironment {
    pub fn new(rows: usize, cols: usize, cell_size: f64) -> Result<Self> {
        let env = Self { rows, cols, cell_size };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::config(format!(
                "grid must be at least 1x1, got {}x{}",
                self.rows, self.cols
            )));
        }
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return Err(Error::config("cell_size must be positive and finite"));
        }
        Ok(())
    }

    /// Total number of cells.
    #[inline]
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn contains(&self, row: isize, col: isize) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.rows && (col as usize) < self.cols
    }

    pub fn flatten(&self, row: usize, col: usize) -> Result<usize> {
        if row >= self.rows || col >= self.cols {
            return Err(Error::OutOfBounds {
                row,
                col,
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(row * self.cols + col)
    }

    /// Inverse of [`flatten`](Self::flatten). Panics if `cell` is out of range.
    #[inline]
    pub fn unflatten(&self, cell: usize) -> (usize, usize) {
        assert!(cell < self.len(), "cell {cell} outside grid of {}", self.len());
        (cell / self.cols, cell % self.cols)
    }

    /// Euclidean distance between two cells in cell units.
    pub fn cell_distance(&self, a: usize, b: usize) -> f64 {
        let (ra, ca) = self.unflatten(a);
        let (rb, cb) = self.unflatten(b);
        let dr = ra as f64 - rb as f64;
        let dc = ca as f64 - cb as f64;
        dr.hypot(dc)
    }

    /// Chebyshev (king-move) distance between two cells.
    pub fn chebyshev(&self, a: usize, b: usize) -> usize {
        let (ra, ca) = self.unflatten(a);
        let (rb, cb) = self.unflatten(b);
        ra.abs_diff(rb).max(ca.abs_diff(cb))
    }
}

/// Sparse binary occupancy vector over the grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub beta: Vec<u8>,
    pub k: usize,
}

impl GroundTruth {
    pub fn from_support(len: usize, support: &[usize]) -> Result<Self> {
        let mut beta = vec![0u8; len];
        for &m in support {
            if m >= len {
                return Err(Error::config(format!("support cell {m} outside grid of {len}")));
            }
            beta[m] = 1;
        }
        let k = beta.iter().filter(|&&b| b == 1).count();
        Ok(Self { beta, k })
    }

    pub fn support(&self) -> Vec<usize> {
        self.beta
            .iter()
            .enumerate()
            .filter_map(|(m, &b)| (b == 1).then_some(m))
            .collect()
    }

    #[inline]
    pub fn get(&self, cell: usize) -> f64 {
        f64::from(self.beta[cell])
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    /// Exact match against a thresholded estimate.
    pub fn matches(&self, estimate: &[u8]) -> bool {
        self.beta.as_slice() == estimate
    }
}

/// Draw `k` distinct cells uniformly without replacement.
pub fn generate_ground_truth<R: Rng + ?Sized>(env: &GridEnvironment, k: usize, rng: &mut R) -> Result<GroundTruth> {
    let m = env.len();
    if k > m {
        return Err(Error::config(format!("k = {k} exceeds cell count {m}")));
    }
    let mut beta = vec![0u8; m];
    for cell in index::sample(rng, m, k).into_iter() {
        beta[cell] = 1;
    }
    Ok(GroundTruth { beta, k })
}
