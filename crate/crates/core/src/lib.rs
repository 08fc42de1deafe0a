//! Single-cell downlink scheduling simulator with a QoS-aware proportional
//! fair scheduler and two baselines (Max C/I, static priority).
//!
//! The arithmetic is generic over [`Scalar`], so the same code runs on
//! `f32`, `f64` and exact rationals. The aliases at the crate root fix the
//! scalar to `f64`, which is what the harness and CLI use.

// Negated comparisons keep NaN on the failing side of every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod presets;
mod rng;
pub mod scalar;
pub mod scheduler;
pub mod sim;
pub mod traffic;

pub use channel::{ChannelModel, ChannelVariation, ResourceGrid};
pub use error::Error;
pub use metrics::{AggregateReport, RunReport};
pub use model::{FlowId, Packet, StartOffsetPolicy, TtiClock, UeId};
pub use scalar::Scalar;
pub use scheduler::{Allocation, Grant, SchedulerKind};
pub use sim::{run_single, Simulation};

pub type Scenario = model::Scenario<f64>;
pub type QfiProfile = model::QfiProfile<f64>;
pub type ArrivalSpec = model::ArrivalSpec<f64>;
pub type FlowState = model::FlowState<f64>;
pub type QosPfParams = scheduler::QosPfParams<f64>;
pub type QosPf = scheduler::QosPf<f64>;
pub type Config = config::Config<f64>;
pub type ExperimentPlan = harness::ExperimentPlan<f64>;
pub type WeightConfig = presets::WeightConfig<f64>;

/// Exact rational scalar for oracle checks.
pub type Exact = num_rational::Ratio<i128>;
