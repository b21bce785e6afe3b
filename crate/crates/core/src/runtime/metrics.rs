use serde::{Deserialize, Serialize};

use super::trace::{Event, SimTrace, StopReason};
use crate::error::Result;
use crate::grid::GroundTruth;
use crate::inference::{estimate_beta, fit, Evidence};

/// Summary of one run, recomputed from its trace alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub seed: u64,
    pub agents: usize,
    pub measurements: usize,
    /// `recovered[t]`: the pooled estimate after the first `t` completions equals the truth.
    pub recovered: Vec<bool>,
    /// Smallest `T` with exact recovery.
    pub first_recovery: Option<usize>,
    /// `first_recovery / J`.
    pub per_agent: Option<f64>,
    /// Distance travelled by each agent, in the grid's length unit.
    pub travel: Vec<f64>,
    pub reason: Option<StopReason>,
}

/// Recompute the metrics of `trace` with the truth and settings from its header.
pub fn metrics(trace: &SimTrace) -> Result<MetricsRecord> {
    let cfg = &trace.header.config;
    let env = cfg.environment()?;
    let truth = GroundTruth::from_support(env.len(), &trace.header.truth)?;
    metrics_with(trace, &truth, cfg.threshold)
}

/// Like [`metrics`] with an explicit truth and decision threshold.
pub fn metrics_with(trace: &SimTrace, truth: &GroundTruth, threshold: f64) -> Result<MetricsRecord> {
    let cfg = &trace.header.config;
    let agents = cfg.agents.count;
    let mut evidence = Evidence::new(truth.len());
    let check =
        |ev: &Evidence<f64>| -> Result<bool> { Ok(truth.matches(&estimate_beta(&fit(ev, &cfg.sbl)?, threshold))) };
    let mut recovered = vec![check(&evidence)?];
    for m in trace.measurements() {
        evidence.add(m, cfg.sbl.jitter)?;
        recovered.push(check(&evidence)?);
    }
    let first_recovery = recovered.iter().position(|&r| r);
    let mut travel = vec![0.0; agents];
    let mut reason = None;
    for e in &trace.events {
        match e {
            Event::Final { agent, travel: d, .. } if *agent < agents => travel[*agent] = *d,
            Event::End { reason: r, .. } => reason = Some(*r),
            _ => {}
        }
    }
    Ok(MetricsRecord {
        seed: trace.header.seed,
        agents,
        measurements: recovered.len() - 1,
        first_recovery,
        per_agent: first_recovery.map(|t| t as f64 / agents as f64),
        recovered,
        travel,
        reason,
    })
}
