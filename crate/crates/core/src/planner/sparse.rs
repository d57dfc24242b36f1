//! Bayesian sparse sampling over a generic finite-horizon model.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{SimRng, Stream};

/// Hard cap on the size of one look-ahead tree.
pub const NODE_BUDGET: u64 = 5_000_000;

/// A finite-horizon MDP whose transitions depend on uncertain parameters.
///
/// Steps run `1..=horizon()`; `horizon() + 1` is terminal.
pub trait SparseModel: Sync {
    type State: Clone + Send + Sync;
    type Param: Send + Sync;

    fn horizon(&self) -> usize;
    /// Feasible global action indices at `(t, state)`, ascending.
    fn actions(&self, t: usize, state: &Self::State) -> Vec<usize>;
    /// Upper bound on `actions(t, _).len()` over reachable states.
    fn max_actions(&self, t: usize) -> usize;
    /// One posterior draw.
    fn sample_param(&self, rng: &mut SimRng) -> Self::Param;
    fn transition(
        &self,
        t: usize,
        state: &Self::State,
        action: usize,
        param: &Self::Param,
        rng: &mut SimRng,
    ) -> Result<Self::State>;
    fn reward(&self, _t: usize, _state: &Self::State, _action: usize) -> f64 {
        0.0
    }
    fn terminal_reward(&self, state: &Self::State) -> f64;
}

/// Posterior draws `b` and transition draws `j` per action at every node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerConfig {
    pub b: usize,
    pub j: usize,
    pub node_budget: u64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            b: 2,
            j: 1,
            node_budget: NODE_BUDGET,
        }
    }
}

impl PlannerConfig {
    pub fn new(b: usize, j: usize) -> Self {
        PlannerConfig {
            b,
            j,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.b == 0 || self.j == 0 {
            return Err(Error::InvalidConfig("planner b and j must be at least 1".into()));
        }
        Ok(())
    }
}

/// Upper bound on the number of nodes in the tree rooted at step `t`:
/// `N(t) = 1 + A_t·B·J·N(t+1)`, `N(H+1) = 1`.
pub fn tree_size<M: SparseModel>(model: &M, t: usize, config: &PlannerConfig) -> f64 {
    let bj = (config.b * config.j) as f64;
    let mut n = 1.0;
    for s in (t..=model.horizon()).rev() {
        n = 1.0 + model.max_actions(s) as f64 * bj * n;
    }
    n
}

fn check_budget<M: SparseModel>(model: &M, t: usize, config: &PlannerConfig) -> Result<()> {
    config.validate()?;
    let needed = tree_size(model, t, config);
    if needed > config.node_budget as f64 {
        return Err(Error::NodeBudget {
            needed,
            budget: config.node_budget,
        });
    }
    Ok(())
}

/// Levels below the root whose children are expanded in parallel.
const PARALLEL_DEPTH: usize = 2;

fn q_inner<M: SparseModel>(
    model: &M,
    t: usize,
    state: &M::State,
    action: usize,
    config: &PlannerConfig,
    node: Stream,
    depth: usize,
) -> Result<f64> {
    let action_stream = node.child(action as u64);
    let draws = config.b * config.j;
    let child = |k: usize| -> Result<f64> {
        let (b, j) = (k / config.j, k % config.j);
        let draw_stream = action_stream.child(b as u64);
        let param = model.sample_param(&mut draw_stream.child(0).rng());
        let next = model.transition(
            t,
            state,
            action,
            &param,
            &mut draw_stream.child(1 + 2 * j as u64).rng(),
        )?;
        v_inner(model, t + 1, &next, config, draw_stream.child(2 + 2 * j as u64), depth + 1)
            .map(|(v, _)| v)
    };
    let values: Vec<f64> = if depth < PARALLEL_DEPTH {
        (0..draws).into_par_iter().map(child).collect::<Result<_>>()?
    } else {
        (0..draws).map(child).collect::<Result<_>>()?
    };
    let mean = values.iter().sum::<f64>() / draws as f64;
    Ok(model.reward(t, state, action) + mean)
}

fn v_inner<M: SparseModel>(
    model: &M,
    t: usize,
    state: &M::State,
    config: &PlannerConfig,
    node: Stream,
    depth: usize,
) -> Result<(f64, Option<usize>)> {
    if t > model.horizon() {
        return Ok((model.terminal_reward(state), None));
    }
    let actions = model.actions(t, state);
    let q: Vec<f64> = if depth < PARALLEL_DEPTH {
        actions
            .par_iter()
            .map(|&a| q_inner(model, t, state, a, config, node, depth))
            .collect::<Result<_>>()?
    } else {
        actions
            .iter()
            .map(|&a| q_inner(model, t, state, a, config, node, depth))
            .collect::<Result<_>>()?
    };
    let mut best = 0;
    for k in 1..q.len() {
        if q[k] > q[best] {
            best = k;
        }
    }
    Ok((q[best], Some(actions[best])))
}

/// Estimated optimal value at `(t, state)` and the maximizing action.
///
/// Child `(b, j)` of action `a` at a node with stream `s` uses
/// `s.child(a).child(b)` for the parameter draw and its children for the
/// transition and the subtree, so `vfun` equals the maximum of `qfun` over
/// actions exactly. Ties go to the lowest action index.
pub fn vfun<M: SparseModel>(
    model: &M,
    t: usize,
    state: &M::State,
    config: &PlannerConfig,
    seed: Stream,
) -> Result<(f64, Option<usize>)> {
    check_budget(model, t, config)?;
    v_inner(model, t, state, config, seed, 0)
}

/// Estimated optimal action value of `action` at `(t, state)`.
pub fn qfun<M: SparseModel>(
    model: &M,
    t: usize,
    state: &M::State,
    action: usize,
    config: &PlannerConfig,
    seed: Stream,
) -> Result<f64> {
    check_budget(model, t, config)?;
    if t > model.horizon() {
        return Ok(model.terminal_reward(state));
    }
    q_inner(model, t, state, action, config, seed, 0)
}

/// Q estimates of every feasible action at a node, sharing the node seed.
pub fn qvalues<M: SparseModel>(
    model: &M,
    t: usize,
    state: &M::State,
    config: &PlannerConfig,
    seed: Stream,
) -> Result<Vec<(usize, f64)>> {
    check_budget(model, t, config)?;
    model
        .actions(t, state)
        .into_par_iter()
        .map(|a| q_inner(model, t, state, a, config, seed, 0).map(|q| (a, q)))
        .collect()
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[(usize, f64)]) -> usize {
    let mut best = 0;
    for k in 1..values.len() {
        if values[k].1 > values[best].1 {
            best = k;
        }
    }
    values[best].0
}
