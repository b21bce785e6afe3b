//! Newline-delimited JSON event log of a simulation run.
//!
//! The first line is a [`TraceHeader`] (`"type": "header"`), followed by one
//! [`Event`] per line in non-decreasing simulation time. Field layout:
//!
//! | type        | fields                                                        |
//! |-------------|---------------------------------------------------------------|
//! | `header`    | schema, version, seed, config, truth, start                   |
//! | `issued`    | time, agent, task, policy, cell, heading, score, known        |
//! | `observed`  | time, agent, measurement                                      |
//! | `sent`      | time, from, to, id, deliver_at                                |
//! | `dropped`   | time, from, to, id                                            |
//! | `delivered` | time, to, id                                                  |
//! | `snapshot`  | time, agent, mu, var, gamma                                   |
//! | `recovery`  | time, t, recovered                                            |
//! | `final`     | time, agent, position, known, travel                          |
//! | `end`       | time, measurements, reason                                    |

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::policy::PolicyKind;
use crate::sensing::{Heading, Measurement};

pub const TRACE_SCHEMA: &str = "nats-trace";
pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub schema: String,
    pub version: u32,
    pub seed: u64,
    pub config: ExperimentConfig,
    /// Support of the hidden ground truth.
    pub truth: Vec<usize>,
    /// Starting cell of each agent.
    pub start: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Budget,
    Recovered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    Issued {
        time: f64,
        agent: usize,
        /// Per-agent action counter, starting at 0.
        task: usize,
        policy: PolicyKind,
        cell: usize,
        heading: Heading,
        score: f64,
        /// Size of the agent's measurement set when it decided.
        known: usize,
    },
    Observed {
        time: f64,
        agent: usize,
        measurement: Measurement,
    },
    Sent {
        time: f64,
        from: usize,
        to: usize,
        id: u64,
        deliver_at: f64,
    },
    Dropped {
        time: f64,
        from: usize,
        to: usize,
        id: u64,
    },
    Delivered {
        time: f64,
        to: usize,
        id: u64,
    },
    Snapshot {
        time: f64,
        agent: usize,
        mu: Vec<f64>,
        var: Vec<f64>,
        gamma: Vec<f64>,
    },
    Recovery {
        time: f64,
        t: usize,
        recovered: bool,
    },
    Final {
        time: f64,
        agent: usize,
        position: usize,
        known: Vec<u64>,
        travel: f64,
    },
    End {
        time: f64,
        measurements: usize,
        reason: StopReason,
    },
}

impl Event {
    pub fn time(&self) -> f64 {
        match self {
            Event::Issued { time, .. }
            | Event::Observed { time, .. }
            | Event::Sent { time, .. }
            | Event::Dropped { time, .. }
            | Event::Delivered { time, .. }
            | Event::Snapshot { time, .. }
            | Event::Recovery { time, .. }
            | Event::Final { time, .. }
            | Event::End { time, .. } => *time,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum HeaderLine {
    Header(TraceHeader),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub header: TraceHeader,
    pub events: Vec<Event>,
}

impl SimTrace {
    /// Completed measurements in completion order.
    pub fn measurements(&self) -> impl Iterator<Item = &Measurement> {
        self.events.iter().filter_map(|e| match e {
            Event::Observed { measurement, .. } => Some(measurement),
            _ => None,
        })
    }

    pub fn write_ndjson<W: Write>(&self, mut w: W) -> Result<()> {
        let head = HeaderLine::Header(self.header.clone());
        serde_json::to_writer(&mut w, &head).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
        for e in &self.events {
            serde_json::to_writer(&mut w, e).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_ndjson(&self) -> String {
        let mut buf = Vec::new();
        self.write_ndjson(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn read_ndjson<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let parse_err = |line: usize, e: serde_json::Error| Error::Parse {
            line,
            message: e.to_string(),
        };
        let (_, first) = lines.next().ok_or_else(|| Error::Parse {
            line: 1,
            message: "empty trace".into(),
        })?;
        let HeaderLine::Header(header) = serde_json::from_str(&first?).map_err(|e| parse_err(1, e))?;
        if header.schema != TRACE_SCHEMA || header.version != TRACE_VERSION {
            return Err(Error::Parse {
                line: 1,
                message: format!("unsupported trace schema {} v{}", header.schema, header.version),
            });
        }
        let mut events = Vec::new();
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            events.push(serde_json::from_str(&line).map_err(|e| parse_err(i + 1, e))?);
        }
        Ok(Self { header, events })
    }
}
