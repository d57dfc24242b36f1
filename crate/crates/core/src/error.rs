use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: observed series has {observed} points, simulated has {simulated}")]
    LengthMismatch { observed: usize, simulated: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("perturbation kernel rejected {0} consecutive proposals outside the prior support")]
    DegenerateKernel(usize),

    #[error("importance weight denominator vanished (kernel density is zero under every previous particle)")]
    ZeroKernelDensity,

    #[error("all particle weights are zero in generation {0}")]
    ZeroWeights(usize),

    #[error("infeasible action {action} at step {step}: {reason}")]
    InfeasibleAction {
        step: usize,
        action: String,
        reason: String,
    },

    #[error("sparse-sampling tree needs ~{needed:.3e} nodes, budget is {budget}; reduce B*J")]
    NodeBudget { needed: f64, budget: u64 },

    #[error("duplicate seed label `{0}`")]
    DuplicateLabel(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
