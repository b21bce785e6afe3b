//! Discrete-event simulation of asynchronous agents sharing measurements.

pub mod bus;
pub mod metrics;
pub mod sim;
pub mod trace;

pub use bus::{Delivery, MessageBus};
pub use metrics::{metrics, metrics_with, MetricsRecord};
pub use sim::{rng_stream, run_simulation, Scenario};
pub use trace::{Event, SimTrace, StopReason, TraceHeader};
