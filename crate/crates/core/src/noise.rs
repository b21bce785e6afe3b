//! Depth-dependent detector noise.
//!
//! The table maps a depth (pyramid row for the synthetic grid, meters for
//! terrain scenarios) to the variance of the confidence perturbation. Between
//! knots the variance is interpolated linearly; outside the table it is held
//! at the nearest end value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Variance levels of the synthetic benchmark, keyed by pyramid depth row 1..=3.
pub const SYNTHETIC_VARIANCES: [f64; 3] = [0.005, 0.020, 0.045];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NoiseTable", into = "NoiseTable")]
pub struct DepthNoiseModel {
    depths: Vec<f64>,
    variances: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NoiseTable {
    depths: Vec<f64>,
    variances: Vec<f64>,
}

impl TryFrom<NoiseTable> for DepthNoiseModel {
    type Error = Error;
    fn try_from(t: NoiseTable) -> Result<Self> {
        DepthNoiseModel::new(t.depths, t.variances)
    }
}

impl From<DepthNoiseModel> for NoiseTable {
    fn from(m: DepthNoiseModel) -> Self {
        NoiseTable {
            depths: m.depths,
            variances: m.variances,
        }
    }
}

impl DepthNoiseModel {
    pub fn new(depths: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        if depths.is_empty() || depths.len() != variances.len() {
            return Err(Error::config(
                "noise table needs matching, non-empty depth and variance lists",
            ));
        }
        if depths.iter().chain(&variances).any(|x| !x.is_finite()) {
            return Err(Error::config("noise table entries must be finite"));
        }
        if depths.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("noise table depths must be strictly increasing"));
        }
        if variances.iter().any(|&v| v < 0.0) {
            return Err(Error::config("noise variances must be non-negative"));
        }
        if variances.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::config("noise variances must be non-decreasing with depth"));
        }
        Ok(Self { depths, variances })
    }

    /// Three-level table of the synthetic benchmark.
    pub fn synthetic() -> Self {
        Self::new(vec![1.0, 2.0, 3.0], SYNTHETIC_VARIANCES.to_vec()).expect("valid table")
    }

    pub fn constant(variance: f64) -> Result<Self> {
        Self::new(vec![0.0], vec![variance])
    }

    /// Same knots with every level replaced by the nearest-depth variance.
    pub fn flattened(&self) -> Self {
        Self {
            depths: self.depths.clone(),
            variances: vec![self.variances[0]; self.variances.len()],
        }
    }

    pub fn depths(&self) -> &[f64] {
        &self.depths
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    /// Depth of the closest calibrated level.
    pub fn nearest_depth(&self) -> f64 {
        self.depths[0]
    }

    pub fn variance(&self, depth: f64) -> f64 {
        let d = &self.depths;
        let v = &self.variances;
        if depth <= d[0] {
            return v[0];
        }
        let last = d.len() - 1;
        if depth >= d[last] {
            return v[last];
        }
        // first knot strictly above depth
        let hi = d.partition_point(|&x| x <= depth);
        let lo = hi - 1;
        let t = (depth - d[lo]) / (d[hi] - d[lo]);
        v[lo] + t * (v[hi] - v[lo])
    }
}

impl Default for DepthNoiseModel {
    fn default() -> Self {
        Self::synthetic()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn synthetic_levels() {
        let m = DepthNoiseModel::synthetic();
        assert_eq!(m.variance(1.0), 0.005);
        assert_eq!(m.variance(2.0), 0.020);
        assert_eq!(m.variance(3.0), 0.045);
    }

    #[test]
    fn clamps_outside_table() {
        let m = DepthNoiseModel::synthetic();
        assert_eq!(m.variance(0.0), 0.005);
        assert_eq!(m.variance(7.5), 0.045);
    }

    #[test]
    fn interpolates_between_knots() {
        let m = DepthNoiseModel::synthetic();
        assert!((m.variance(1.5) - 0.0125).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(DepthNoiseModel::new(vec![1.0, 2.0], vec![0.1]).is_err());
        assert!(DepthNoiseModel::new(vec![2.0, 1.0], vec![0.1, 0.2]).is_err());
        assert!(DepthNoiseModel::new(vec![1.0, 2.0], vec![0.2, 0.1]).is_err());
        assert!(DepthNoiseModel::new(vec![1.0], vec![-0.1]).is_err());
        assert!(DepthNoiseModel::new(vec![], vec![]).is_err());
    }

    #[test]
    fn flattened_is_constant() {
        let m = DepthNoiseModel::synthetic().flattened();
        for d in [0.0, 1.0, 2.5, 3.0, 10.0] {
            assert_eq!(m.variance(d), 0.005);
        }
    }

    proptest! {
        #[test]
        fn variance_is_monotone(a in 0.0f64..10.0, b in 0.0f64..10.0) {
            let m = DepthNoiseModel::synthetic();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(m.variance(lo) <= m.variance(hi));
            prop_assert!(m.variance(lo) >= 0.0);
        }
    }
}
