//! Process model: kinetics, hybrid transition, ground-truth simulator.

pub mod hybrid;
pub mod kinetics;
pub mod trajectory;
pub mod truth;

pub use hybrid::{simulate_hybrid_densities, simulate_hybrid_trajectory};
pub use kinetics::{
    growth_rate_term, hybrid_step_mean, hybrid_step_sample, inhibitor_term, phase_of, GrowthRates,
    Intervention, ModelTheta, PhaseParams, ProcessState,
};
pub use trajectory::Trajectory;
pub use truth::{simulate_ground_truth, simulate_ground_truth_stream, GroundTruthConfig, TruthProcess};
