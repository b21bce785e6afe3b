//! Repeated-trial studies: recovery-rate curves and time to recovery.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::policy::PolicyKind;
use crate::runtime::{metrics, Scenario};

/// Seed of trial `trial` in a study seeded with `base` (SplitMix64 finalizer).
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    let mut z = base.wrapping_add((trial as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    /// Number of completed measurements at the first exact recovery.
    pub first_recovery: Option<usize>,
    pub measurements: usize,
    /// Mean distance travelled per agent.
    pub mean_travel: f64,
}

/// Run `config.trials` independent trials concurrently. Output is in trial order.
pub fn run_trials(config: &ExperimentConfig) -> Result<Vec<TrialOutcome>> {
    let scenario = Scenario::build(config)?;
    run_trials_in(&scenario)
}

pub fn run_trials_in(scenario: &Scenario) -> Result<Vec<TrialOutcome>> {
    let cfg = &scenario.config;
    let mut out = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = trial_seed(cfg.seed, trial);
            let trace = scenario.run(seed)?;
            let m = metrics(&trace)?;
            Ok(TrialOutcome {
                trial,
                seed,
                first_recovery: m.first_recovery,
                measurements: m.measurements,
                mean_travel: m.travel.iter().sum::<f64>() / m.travel.len() as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by_key(|o| o.trial);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: usize,
    pub rate: f64,
    /// Binomial standard error `sqrt(p (1 - p) / n)`.
    pub se: f64,
}

/// Fraction of trials that have recovered exactly by `T`, for each `T` in `grid`.
pub fn recovery_curve(outcomes: &[TrialOutcome], grid: &[usize]) -> Vec<CurvePoint> {
    let n = outcomes.len() as f64;
    grid.iter()
        .map(|&t| {
            let hits = outcomes
                .iter()
                .filter(|o| o.first_recovery.is_some_and(|r| r <= t))
                .count() as f64;
            let rate = if n > 0.0 { hits / n } else { 0.0 };
            CurvePoint {
                t,
                rate,
                se: (rate * (1.0 - rate) / n).sqrt(),
            }
        })
        .collect()
}

/// Smallest `T` at which the recovery rate reaches `level`.
pub fn measurements_to_level(outcomes: &[TrialOutcome], level: f64) -> Option<usize> {
    let mut firsts: Vec<usize> = outcomes.iter().filter_map(|o| o.first_recovery).collect();
    firsts.sort_unstable();
    let need = (level * outcomes.len() as f64 - 1e-9).ceil().max(1.0) as usize;
    firsts.get(need - 1).copied()
}

/// Median first-recovery `T`; unrecovered trials count as never.
pub fn median_recovery(outcomes: &[TrialOutcome]) -> Option<f64> {
    let mut t: Vec<f64> = outcomes
        .iter()
        .map(|o| o.first_recovery.map_or(f64::INFINITY, |r| r as f64))
        .collect();
    if t.is_empty() {
        return None;
    }
    t.sort_by(f64::total_cmp);
    let n = t.len();
    let m = if n % 2 == 1 {
        t[n / 2]
    } else {
        0.5 * (t[n / 2 - 1] + t[n / 2])
    };
    m.is_finite().then_some(m)
}

/// Parameter varied across a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "param", content = "values", rename_all = "snake_case")]
pub enum Vary {
    /// Only the measurement axis.
    None,
    Agents(Vec<usize>),
    Targets(Vec<usize>),
    Policy(Vec<PolicyKind>),
}

impl Vary {
    fn name(&self) -> &'static str {
        match self {
            Vary::None => "none",
            Vary::Agents(_) => "agents",
            Vary::Targets(_) => "k",
            Vary::Policy(_) => "policy",
        }
    }

    fn labels_and_configs(&self, base: &ExperimentConfig) -> Vec<(String, ExperimentConfig)> {
        let with = |f: &dyn Fn(&mut ExperimentConfig)| {
            let mut c = base.clone();
            f(&mut c);
            c
        };
        match self {
            Vary::None => vec![("base".into(), base.clone())],
            Vary::Agents(v) => v
                .iter()
                .map(|&j| (j.to_string(), with(&|c| c.agents.count = j)))
                .collect(),
            Vary::Targets(v) => v.iter().map(|&k| (k.to_string(), with(&|c| c.targets.k = k))).collect(),
            Vary::Policy(v) => v
                .iter()
                .map(|&p| (p.name().to_string(), with(&|c| c.agents.policy = p)))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: ExperimentConfig,
    pub vary: Vary,
    /// Measurement counts at which the recovery rate is reported.
    pub t_grid: Vec<usize>,
    pub trials: usize,
    /// Recovery level for the time-to-recovery table.
    pub level: f64,
}

impl SweepSpec {
    /// Curve over `0..=budget` for the base config alone.
    pub fn new(base: ExperimentConfig) -> Self {
        Self {
            t_grid: (0..=base.budget).collect(),
            trials: base.trials,
            vary: Vary::None,
            level: 0.7,
            base,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trial count must be at least 1"));
        }
        if !(self.level > 0.0 && self.level <= 1.0) {
            return Err(Error::config("recovery level must lie in (0, 1]"));
        }
        let mut t = self.t_grid.clone();
        t.sort_unstable();
        t.dedup();
        if t.len() != self.t_grid.len() {
            return Err(Error::config("swept T values must be distinct"));
        }
        let labels: Vec<String> = self
            .vary
            .labels_and_configs(&self.base)
            .into_iter()
            .map(|x| x.0)
            .collect();
        let mut uniq = labels.clone();
        uniq.sort();
        uniq.dedup();
        if uniq.len() != labels.len() {
            return Err(Error::config("swept values must be distinct"));
        }
        self.base.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: String,
    pub agents: usize,
    pub outcomes: Vec<TrialOutcome>,
    pub curve: Vec<CurvePoint>,
    /// `T / J` at which the rate first reaches the study level.
    pub t_per_agent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub param: &'static str,
    pub level: f64,
    pub rows: Vec<SweepRow>,
}

/// Run every swept value for `spec.trials` trials. Each run's budget is the
/// largest `T` in the grid; trials stop early at exact recovery.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let t_max = spec.t_grid.iter().copied().max().unwrap_or(0);
    let mut rows = Vec::new();
    for (value, mut cfg) in spec.vary.labels_and_configs(&spec.base) {
        cfg.trials = spec.trials;
        cfg.budget = t_max;
        let outcomes = run_trials(&cfg)?;
        let agents = cfg.agents.count;
        rows.push(SweepRow {
            curve: recovery_curve(&outcomes, &spec.t_grid),
            t_per_agent: measurements_to_level(&outcomes, spec.level).map(|t| t as f64 / agents as f64),
            value,
            agents,
            outcomes,
        });
    }
    Ok(SweepResult {
        param: spec.vary.name(),
        level: spec.level,
        rows,
    })
}

impl SweepResult {
    /// Header `param,value,t,rate,se`.
    pub fn write_curve_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "param,value,t,rate,se")?;
        for row in &self.rows {
            for p in &row.curve {
                writeln!(w, "{},{},{},{},{}", self.param, row.value, p.t, p.rate, p.se)?;
            }
        }
        Ok(())
    }

    /// Header `param,value,level,t_per_agent`; `unreached` when the level is never met.
    pub fn write_time_to_recovery_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "param,value,level,t_per_agent")?;
        for row in &self.rows {
            let v = row
                .t_per_agent
                .map_or_else(|| "unreached".to_string(), |t| t.to_string());
            writeln!(w, "{},{},{},{}", self.param, row.value, self.level, v)?;
        }
        Ok(())
    }

    /// Header `param,value,trial,seed,first_recovery,measurements,mean_travel`.
    pub fn write_trials_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "param,value,trial,seed,first_recovery,measurements,mean_travel")?;
        for row in &self.rows {
            for o in &row.outcomes {
                let first = o.first_recovery.map_or_else(String::new, |t| t.to_string());
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    self.param, row.value, o.trial, o.seed, first, o.measurements, o.mean_travel
                )?;
            }
        }
        Ok(())
    }
}
