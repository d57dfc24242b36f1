//! Decision problems, Bayesian sparse-sampling planning and open-loop
//! schedule search.

pub mod bio;
pub mod openloop;
pub mod problem;
pub mod sparse;

pub use bio::{greedy_control, BioprocessMdp, ControlTrace, Environment, PlanNode, TraceStep};
pub use openloop::{
    calibrate_unit_scale, enumerate_open_loop, write_ranking_csv, HybridRollout, RolloutModel,
    ScheduleResult, TruthRollout,
};
pub use problem::{CostModel, DecisionProblem, ProblemKind, Schedule, INTERVENE, NO_OP};
pub use sparse::{argmax, qfun, qvalues, tree_size, vfun, PlannerConfig, SparseModel, NODE_BUDGET};
