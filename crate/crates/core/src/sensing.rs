//! Camera-like sensing actions and noisy detector observations.
//!
//! An action is a pose (cell + heading). Its footprint is a pyramid of depth
//! rows 1, 2, 3 ahead of the agent with widths 2, 4, 6. Each visible cell
//! becomes a one-hot row of the sensing matrix.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::grid::{GridEnvironment, GroundTruth};
use crate::noise::DepthNoiseModel;

/// Half-widths of the footprint per depth row (full widths 2/4/6).
pub const PYRAMID_HALF_WIDTHS: [isize; 3] = [1, 2, 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Heading {
    N,
    S,
    E,
    W,
}

impl Heading {
    /// Enumeration order used for action sets.
    pub const ALL: [Heading; 4] = [Heading::N, Heading::S, Heading::E, Heading::W];

    /// (row, col) step of one depth row ahead.
    fn forward(self) -> (isize, isize) {
        match self {
            Heading::N => (-1, 0),
            Heading::S => (1, 0),
            Heading::E => (0, 1),
            Heading::W => (0, -1),
        }
    }

    /// (row, col) step along the footprint's width.
    fn lateral(self) -> (isize, isize) {
        match self {
            Heading::N | Heading::S => (0, 1),
            Heading::E | Heading::W => (1, 0),
        }
    }
}

/// How the depth of a footprint cell is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthMetric {
    /// Projection distance in rows (1, 2, 3).
    #[default]
    Rows,
    /// Euclidean distance from the agent's cell in meters.
    Meters,
}

/// Line-of-sight oracle between two grid cells.
pub trait Visibility: Sync {
    fn visible(&self, from: usize, to: usize) -> bool;
}

/// Footprint cells in depth-major, left-to-right order as `(cell, depth)`.
pub fn enumerate_fov_cells(
    agent_cell: usize,
    heading: Heading,
    env: &GridEnvironment,
    metric: DepthMetric,
    visibility: Option<&dyn Visibility>,
) -> Vec<(usize, f64)> {
    let (ar, ac) = env.unflatten(agent_cell);
    let (fr, fc) = heading.forward();
    let (lr, lc) = heading.lateral();
    let mut out = Vec::with_capacity(12);
    for (row_idx, &half) in PYRAMID_HALF_WIDTHS.iter().enumerate() {
        let d = row_idx as isize + 1;
        for off in -half..half {
            let r = ar as isize + d * fr + off * lr;
            let c = ac as isize + d * fc + off * lc;
            if !env.contains(r, c) {
                continue;
            }
            let cell = r as usize * env.cols + c as usize;
            if let Some(vis) = visibility {
                if !vis.visible(agent_cell, cell) {
                    continue;
                }
            }
            let depth = match metric {
                DepthMetric::Rows => d as f64,
                DepthMetric::Meters => (d as f64).hypot(off as f64) * env.cell_size,
            };
            out.push((cell, depth));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FovCell {
    pub cell: usize,
    pub depth: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingAction {
    pub agent_cell: usize,
    pub heading: Heading,
    pub fov: Vec<FovCell>,
}

impl SensingAction {
    pub fn new(agent_cell: usize, heading: Heading, cells: &[(usize, f64)], noise: &DepthNoiseModel) -> Self {
        let fov = cells
            .iter()
            .map(|&(cell, depth)| FovCell {
                cell,
                depth,
                variance: noise.variance(depth),
            })
            .collect();
        Self {
            agent_cell,
            heading,
            fov,
        }
    }

    /// Single-cell observation of the agent's own cell at the closest calibrated depth.
    pub fn point(cell: usize, noise: &DepthNoiseModel) -> Self {
        Self::new(cell, Heading::N, &[(cell, noise.nearest_depth())], noise)
    }

    /// Number of visible cells.
    #[inline]
    pub fn q(&self) -> usize {
        self.fov.len()
    }

    /// Same footprint with variances recomputed from another noise table.
    pub fn reweighted(&self, noise: &DepthNoiseModel) -> Self {
        let mut out = self.clone();
        for f in &mut out.fov {
            f.variance = noise.variance(f.depth);
        }
        out
    }
}

/// One-hot sensing matrix: row `q` has a single 1 at column `hot[q]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix {
    pub width: usize,
    pub hot: Vec<usize>,
}

impl SensingMatrix {
    pub fn rows(&self) -> usize {
        self.hot.len()
    }

    /// Row-major dense copy.
    pub fn dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.rows() * self.width];
        for (q, &m) in self.hot.iter().enumerate() {
            out[q * self.width + m] = 1.0;
        }
        out
    }
}

/// Sensing matrix and the diagonal of its noise covariance.
pub fn build_sensing(action: &SensingAction, env: &GridEnvironment) -> (SensingMatrix, Vec<f64>) {
    let hot = action.fov.iter().map(|f| f.cell).collect();
    let sigma = action.fov.iter().map(|f| f.variance).collect();
    (SensingMatrix { width: env.len(), hot }, sigma)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    /// Global completion index, 1-based. Zero until assigned by the simulator.
    pub id: u64,
    pub agent: usize,
    pub issue_time: f64,
    pub completion_time: f64,
    pub action: SensingAction,
    pub y: Vec<f64>,
}

impl Measurement {
    /// `(cell, y, variance)` for every row.
    pub fn rows(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.action
            .fov
            .iter()
            .zip(&self.y)
            .map(|(f, &y)| (f.cell, y, f.variance))
    }
}

/// Detector confidences for every footprint cell.
///
/// The perturbation magnitude is half-normal with the cell's depth variance
/// and always points toward the wrong label; scores are clamped to `[0, 1]`.
pub fn observe<R: Rng + ?Sized>(truth: &GroundTruth, action: &SensingAction, rng: &mut R) -> Measurement {
    let y = action
        .fov
        .iter()
        .map(|f| {
            let z: f64 = StandardNormal.sample(rng);
            let n = z.abs() * f.variance.sqrt();
            let b = truth.get(f.cell);
            let raw = if b > 0.5 { b - n } else { b + n };
            raw.clamp(0.0, 1.0)
        })
        .collect();
    Measurement {
        id: 0,
        agent: 0,
        issue_time: 0.0,
        completion_time: 0.0,
        action: action.clone(),
        y,
    }
}
