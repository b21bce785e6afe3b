use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::config::DelayDistribution;

/// Outcome of one point-to-point copy of a broadcast.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delivery {
    pub to: usize,
    /// `None` when the copy was dropped.
    pub at: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InFlight {
    pub at: f64,
    pub to: usize,
    /// Index of the measurement in the simulator's store.
    pub slot: usize,
    seq: u64,
}

impl Eq for InFlight {}

impl Ord for InFlight {
    // min-heap on (delivery time, send order)
    fn cmp(&self, other: &Self) -> Ordering {
        other.at.total_cmp(&self.at).then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for InFlight {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Best-effort broadcast: independent drops, random delays, no acknowledgment.
#[derive(Debug, Clone)]
pub struct MessageBus {
    pub drop: f64,
    pub delay: DelayDistribution,
    rng: ChaCha8Rng,
    in_flight: BinaryHeap<InFlight>,
    seq: u64,
}

impl MessageBus {
    pub fn new(drop: f64, delay: DelayDistribution, rng: ChaCha8Rng) -> Self {
        Self {
            drop,
            delay,
            rng,
            in_flight: BinaryHeap::new(),
            seq: 0,
        }
    }

    fn sample_delay(&mut self) -> f64 {
        match self.delay {
            DelayDistribution::Constant { value } => value,
            DelayDistribution::Uniform { low, high } => low + (high - low) * self.rng.random::<f64>(),
            DelayDistribution::Exponential { mean } => {
                Exp::new(1.0 / mean).expect("positive rate").sample(&mut self.rng)
            }
        }
    }

    /// Send measurement `slot` from `from` to every other agent.
    pub fn broadcast(&mut self, from: usize, agents: usize, slot: usize, send_time: f64) -> Vec<Delivery> {
        let mut out = Vec::with_capacity(agents.saturating_sub(1));
        for to in (0..agents).filter(|&a| a != from) {
            let dropped = self.rng.random::<f64>() < self.drop;
            if dropped {
                out.push(Delivery { to, at: None });
                continue;
            }
            let at = send_time + self.sample_delay();
            self.seq += 1;
            self.in_flight.push(InFlight {
                at,
                to,
                slot,
                seq: self.seq,
            });
            out.push(Delivery { to, at: Some(at) });
        }
        out
    }

    pub fn next_time(&self) -> Option<f64> {
        self.in_flight.peek().map(|m| m.at)
    }

    /// Remove the earliest in-flight message.
    pub fn pop(&mut self) -> Option<InFlight> {
        self.in_flight.pop()
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight.len()
    }
}
