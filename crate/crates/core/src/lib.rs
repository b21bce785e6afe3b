//! Decentralized multi-agent active search with noise-aware Thompson sampling.
//!
//! Agents on a grid pick sensing poses by sampling a sparse Bayesian posterior
//! over target locations and acting optimally for the sample. Measurements
//! are shared over a lossy, delayed bus and nobody waits for anyone.
//!
//! The linear algebra and policy scoring are generic over [`Real`] (`f32` or
//! `f64`); the simulator itself runs in `f64`.

// `!(x >= lo)` style guards are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod inference;
pub mod noise;
pub mod policy;
pub mod runtime;
pub mod scalar;
pub mod sensing;
pub mod viewshed;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use grid::{generate_ground_truth, GridEnvironment, GroundTruth};
pub use inference::{compute_posterior, em_update_gamma, estimate_beta, fit, sample_posterior, Evidence};
pub use noise::DepthNoiseModel;
pub use policy::{ActionCatalog, PolicyKind};
pub use runtime::{metrics, run_simulation, MetricsRecord, Scenario, SimTrace};
pub use scalar::Real;
pub use sensing::{observe, Heading, Measurement, SensingAction};

pub type Posterior = inference::SblPosterior<f64>;
pub type Posterior32 = inference::SblPosterior<f32>;
pub type SblConfig = inference::SblConfig<f64>;
pub type SblConfig32 = inference::SblConfig<f32>;
