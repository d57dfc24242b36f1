//! Hybrid knowledge-graph bioprocess modelling and decision making.
//!
//! * [`model`] two-phase cell-culture kinetics, the discretized hybrid
//!   transition with batch effects, and the SDE ground-truth simulator.
//! * [`abc`] likelihood-free ABC-SMC inference and posterior prediction.
//! * [`planner`] Bayesian sparse sampling, greedy closed-loop control and
//!   open-loop schedule enumeration.
//! * [`baseline`] deterministic ODE fitted by least squares.
//! * [`experiments`] scenario grid and macro-replication harness.

pub mod abc;
pub mod baseline;
pub mod error;
pub mod experiments;
pub mod model;
pub mod planner;
pub mod rng;

pub use error::{Error, Result};
