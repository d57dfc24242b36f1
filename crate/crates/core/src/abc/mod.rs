//! Likelihood-free posterior inference by ABC-SMC.

pub mod kernel;
pub mod kg;
pub mod prior;
pub mod smc;

pub use kernel::{GaussianKernel, KernelCovariance};
pub use kg::{mean_distance, posterior_predict, KgSimulator, PredictiveSummary, WeightedThetas};
pub use prior::{Bounds, PriorSpec};
pub use smc::{
    abc_smc, importance_weight, log_importance_weight, trajectory_distance, AbcConfig,
    GenerationStats, Particle, PosteriorEnsemble, Simulator,
};
