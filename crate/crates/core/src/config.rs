//! Experiment configuration, read from TOML.
//!
//! Every file carries `schema_version`; only version 1 is understood. All
//! sections are optional and default to the 16x16 synthetic benchmark with
//! four NATS agents and lossless, immediate sharing.
//!
//! ```toml
//! schema_version = 1
//! seed = 7
//! trials = 40
//! budget = 400
//! threshold = 0.5
//!
//! [grid]
//! rows = 16
//! cols = 16
//! cell_size = 1.0
//!
//! [targets]
//! k = 5
//!
//! [agents]
//! count = 4
//! policy = "nats"              # nats | bints | ig | rnd | point
//! # policies = ["nats", "ig"]  # optional per-agent override
//!
//! [noise]
//! depths = [1.0, 2.0, 3.0]
//! variances = [0.005, 0.02, 0.045]
//! metric = "rows"              # rows | meters
//! belief = "depth_aware"       # depth_aware | flat
//!
//! [planner]
//! # radius = 5                 # Chebyshev cells; default whole grid (5 on terrain)
//! # alpha = 0.0                # travel weight; default 0 (1 on terrain)
//!
//! [sbl]
//! a = 0.0
//! b = 0.0
//! em_iterations = 1
//! jitter = 1e-9
//! gamma_floor = 1e-8
//! warm_start = false          # carry prior variances across decisions
//!
//! [comm]
//! drop = 0.0
//! delay = { kind = "constant", value = 0.0 }
//!
//! [timing]
//! duration = 1.0
//! jitter = 0.2
//!
//! # [terrain]
//! # dem = "hills.asc"
//! # spacing = 30.0
//! # observer_height = 2.0
//! # visibility_threshold = 0.5
//! # pixel_stride = 1
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridEnvironment;
use crate::inference::SblConfig;
use crate::noise::DepthNoiseModel;
use crate::policy::PolicyKind;
use crate::sensing::DepthMetric;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::trials")]
    pub trials: usize,
    /// Total measurement budget `T` across all agents.
    #[serde(default = "defaults::budget")]
    pub budget: usize,
    /// Recovery decision threshold on the posterior mean.
    #[serde(default = "defaults::threshold")]
    pub threshold: f64,
    /// Stop a run as soon as the pooled estimate equals the ground truth.
    #[serde(default = "defaults::yes")]
    pub stop_on_recovery: bool,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub targets: TargetSection,
    #[serde(default)]
    pub agents: AgentSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub planner: PlannerSection,
    #[serde(default)]
    pub sbl: SblConfig<f64>,
    #[serde(default)]
    pub comm: CommSection,
    #[serde(default)]
    pub timing: TimingSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terrain: Option<TerrainSection>,
    #[serde(default)]
    pub trace: TraceSection,
}

mod defaults {
    pub fn trials() -> usize {
        40
    }
    pub fn budget() -> usize {
        400
    }
    pub fn threshold() -> f64 {
        0.5
    }
    pub fn yes() -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub rows: usize,
    pub cols: usize,
    pub cell_size: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            rows: 16,
            cols: 16,
            cell_size: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetSection {
    pub k: usize,
}

impl Default for TargetSection {
    fn default() -> Self {
        Self { k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSection {
    pub count: usize,
    pub policy: PolicyKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policies: Option<Vec<PolicyKind>>,
    /// Starting cells; random when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<usize>>,
}

impl Default for AgentSection {
    fn default() -> Self {
        Self {
            count: 4,
            policy: PolicyKind::Nats,
            policies: None,
            start: None,
        }
    }
}

impl AgentSection {
    pub fn policy_of(&self, agent: usize) -> PolicyKind {
        self.policies
            .as_ref()
            .and_then(|p| p.get(agent).copied())
            .unwrap_or(self.policy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeliefNoise {
    /// Agents model the true depth-dependent variances.
    #[default]
    DepthAware,
    /// Agents assume the nearest-depth variance everywhere.
    Flat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub depths: Vec<f64>,
    pub variances: Vec<f64>,
    pub metric: DepthMetric,
    pub belief: BeliefNoise,
}

impl Default for NoiseSection {
    fn default() -> Self {
        let m = DepthNoiseModel::synthetic();
        Self {
            depths: m.depths().to_vec(),
            variances: m.variances().to_vec(),
            metric: DepthMetric::Rows,
            belief: BeliefNoise::DepthAware,
        }
    }
}

impl NoiseSection {
    pub fn model(&self) -> Result<DepthNoiseModel> {
        DepthNoiseModel::new(self.depths.clone(), self.variances.clone())
    }
}

/// Unset fields take the scenario default: unbounded and free travel on the
/// synthetic grid, radius 5 and `alpha = 1` on terrain.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerSection {
    /// Chebyshev radius of the action set, in cells.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<usize>,
    /// Weight of the travel-distance penalty.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelayDistribution {
    Constant { value: f64 },
    Uniform { low: f64, high: f64 },
    Exponential { mean: f64 },
}

impl Default for DelayDistribution {
    fn default() -> Self {
        DelayDistribution::Constant { value: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommSection {
    pub drop: f64,
    pub delay: DelayDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingSection {
    /// Base sensing duration per action.
    pub duration: f64,
    /// Width of the uniform jitter added to each duration.
    pub jitter: f64,
}

impl Default for TimingSection {
    fn default() -> Self {
        Self {
            duration: 1.0,
            jitter: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerrainSection {
    pub dem: PathBuf,
    #[serde(default = "terrain_defaults::spacing")]
    pub spacing: f64,
    #[serde(default = "terrain_defaults::observer_height")]
    pub observer_height: f64,
    #[serde(default = "terrain_defaults::visibility_threshold")]
    pub visibility_threshold: f64,
    #[serde(default = "terrain_defaults::pixel_stride")]
    pub pixel_stride: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodata_fill: Option<f64>,
}

impl TerrainSection {
    /// Section for `dem` with default spacing, height and thresholds.
    pub fn new(dem: impl Into<PathBuf>) -> Self {
        Self {
            dem: dem.into(),
            spacing: terrain_defaults::spacing(),
            observer_height: terrain_defaults::observer_height(),
            visibility_threshold: terrain_defaults::visibility_threshold(),
            pixel_stride: terrain_defaults::pixel_stride(),
            nodata_fill: None,
        }
    }
}

mod terrain_defaults {
    pub fn spacing() -> f64 {
        30.0
    }
    pub fn observer_height() -> f64 {
        2.0
    }
    pub fn visibility_threshold() -> f64 {
        0.5
    }
    pub fn pixel_stride() -> usize {
        1
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceSection {
    /// Log each agent's belief (mu, diag V, gamma) at every decision.
    pub snapshots: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            trials: defaults::trials(),
            budget: defaults::budget(),
            threshold: defaults::threshold(),
            stop_on_recovery: true,
            grid: GridSection::default(),
            targets: TargetSection::default(),
            agents: AgentSection::default(),
            noise: NoiseSection::default(),
            planner: PlannerSection::default(),
            sbl: SblConfig::default(),
            comm: CommSection::default(),
            timing: TimingSection::default(),
            terrain: None,
            trace: TraceSection::default(),
        }
    }
}

impl ExperimentConfig {
    /// The synthetic benchmark preset: 16x16, pyramid footprint, unbounded
    /// action set, no travel cost, lossless immediate sharing.
    pub fn benchmark(policy: PolicyKind, agents: usize, k: usize) -> Self {
        let mut c = Self::default();
        c.agents.policy = policy;
        c.agents.count = agents;
        c.targets.k = k;
        c
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load and validate; a relative DEM path is resolved against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        if let (Some(t), Some(dir)) = (cfg.terrain.as_mut(), path.parent()) {
            if t.dem.is_relative() {
                t.dem = dir.join(&t.dem);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Effective action-set radius; `None` is the whole grid.
    pub fn radius(&self) -> Option<usize> {
        match (self.planner.radius, &self.terrain) {
            (Some(r), _) => Some(r),
            (None, Some(_)) => Some(5),
            (None, None) => None,
        }
    }

    /// Effective travel weight.
    pub fn alpha(&self) -> f64 {
        self.planner
            .alpha
            .unwrap_or(if self.terrain.is_some() { 1.0 } else { 0.0 })
    }

    pub fn environment(&self) -> Result<GridEnvironment> {
        GridEnvironment::new(self.grid.rows, self.grid.cols, self.grid.cell_size)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.terrain.is_none() {
            let env = self.environment()?;
            if self.targets.k > env.len() {
                return Err(Error::config(format!(
                    "k = {} exceeds cell count {}",
                    self.targets.k,
                    env.len()
                )));
            }
        }
        if self.agents.count == 0 {
            return Err(Error::config("at least one agent is required"));
        }
        if let Some(p) = &self.agents.policies {
            if p.len() != self.agents.count {
                return Err(Error::config(format!(
                    "{} per-agent policies for {} agents",
                    p.len(),
                    self.agents.count
                )));
            }
        }
        if let Some(s) = &self.agents.start {
            if s.len() != self.agents.count {
                return Err(Error::config("one start cell per agent is required"));
            }
        }
        if self.trials == 0 {
            return Err(Error::config("trials must be at least 1"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::config("threshold must lie in (0, 1)"));
        }
        if !(self.alpha() >= 0.0 && self.alpha().is_finite()) {
            return Err(Error::config("alpha must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.comm.drop) {
            return Err(Error::config("drop probability must lie in [0, 1]"));
        }
        match self.comm.delay {
            DelayDistribution::Constant { value } if !(value >= 0.0 && value.is_finite()) => {
                return Err(Error::config("constant delay must be finite and >= 0"));
            }
            DelayDistribution::Uniform { low, high } if !(low >= 0.0 && high >= low && high.is_finite()) => {
                return Err(Error::config("uniform delay needs 0 <= low <= high"));
            }
            DelayDistribution::Exponential { mean } if !(mean > 0.0 && mean.is_finite()) => {
                return Err(Error::config("exponential delay mean must be positive"));
            }
            _ => {}
        }
        if !(self.timing.duration > 0.0 && self.timing.duration.is_finite()) {
            return Err(Error::config("sensing duration must be positive"));
        }
        if !(self.timing.jitter >= 0.0 && self.timing.jitter.is_finite()) {
            return Err(Error::config("duration jitter must be >= 0"));
        }
        if let Some(t) = &self.terrain {
            if !(t.observer_height >= 0.0) || !(0.0..=1.0).contains(&t.visibility_threshold) {
                return Err(Error::config(
                    "terrain observer height or visibility threshold out of range",
                ));
            }
        }
        self.noise.model()?;
        self.sbl.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_uses_defaults() {
        let cfg = ExperimentConfig::from_toml_str("schema_version = 1\n").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.grid.rows, 16);
        assert_eq!(cfg.noise.variances, vec![0.005, 0.02, 0.045]);
        assert_eq!(cfg.radius(), None);
        assert_eq!(cfg.alpha(), 0.0);
    }

    #[test]
    fn toml_roundtrip() {
        let mut cfg = ExperimentConfig::benchmark(PolicyKind::Ig, 2, 3);
        cfg.comm.delay = DelayDistribution::Uniform { low: 0.5, high: 2.0 };
        cfg.planner.radius = Some(5);
        let text = cfg.to_toml_string();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn rejects_invalid_values() {
        let bad = [
            "schema_version = 2",
            "schema_version = 1\nthreshold = 1.0",
            "schema_version = 1\n[agents]\ncount = 0",
            "schema_version = 1\n[comm]\ndrop = 1.5",
            "schema_version = 1\n[planner]\nalpha = -1.0",
            "schema_version = 1\n[targets]\nk = 300",
            "schema_version = 1\nbogus = 3",
            "schema_version = 1\n[agents]\npolicy = \"rsi\"",
            "schema_version = 1\n[noise]\nvariances = [0.1, 0.05, 0.2]",
        ];
        for text in bad {
            assert!(ExperimentConfig::from_toml_str(text).is_err(), "accepted: {text}");
        }
    }

    #[test]
    fn terrain_planner_defaults() {
        let text = "schema_version = 1\n[terrain]\ndem = \"x.asc\"\n";
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.radius(), Some(5));
        assert_eq!(cfg.alpha(), 1.0);
        let text = "schema_version = 1\n[planner]\nalpha = 0.5\n[terrain]\ndem = \"x.asc\"\n";
        assert_eq!(ExperimentConfig::from_toml_str(text).unwrap().alpha(), 0.5);
    }

    #[test]
    fn per_agent_policies() {
        let text = "schema_version = 1\n[agents]\ncount = 2\npolicies = [\"nats\", \"ig\"]\n";
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.agents.policy_of(0), PolicyKind::Nats);
        assert_eq!(cfg.agents.policy_of(1), PolicyKind::Ig);
    }
}
