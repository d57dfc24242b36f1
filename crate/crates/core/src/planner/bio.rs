//! The culture MDP seen through a posterior, and the greedy controller.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::problem::{DecisionProblem, INTERVENE};
use super::sparse::{argmax, qvalues, PlannerConfig, SparseModel};
use crate::abc::WeightedThetas;
use crate::error::Result;
use crate::model::{hybrid_step_sample, ModelTheta, ProcessState, TruthProcess};
use crate::rng::{SimRng, Stream};

/// A tree node: culture state plus the history the reward depends on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanNode {
    pub state: ProcessState,
    pub rho_initial: f64,
    pub interventions: usize,
}

impl PlanNode {
    pub fn start(rho: f64) -> Self {
        PlanNode {
            state: ProcessState::initial(rho),
            rho_initial: rho,
            interventions: 0,
        }
    }
}

/// Culture MDP under posterior uncertainty. Each transition draws its own
/// growth rate from the sampled θ.
pub struct BioprocessMdp<'a> {
    pub problem: &'a DecisionProblem,
    pub posterior: &'a WeightedThetas,
}

impl<'a> BioprocessMdp<'a> {
    pub fn new(problem: &'a DecisionProblem, posterior: &'a WeightedThetas) -> Self {
        BioprocessMdp { problem, posterior }
    }
}

impl SparseModel for BioprocessMdp<'_> {
    type State = PlanNode;
    type Param = ModelTheta;

    fn horizon(&self) -> usize {
        self.problem.horizon_steps
    }

    fn actions(&self, t: usize, node: &PlanNode) -> Vec<usize> {
        self.problem.actions(t, node.interventions)
    }

    fn max_actions(&self, t: usize) -> usize {
        self.problem.max_actions(t)
    }

    fn sample_param(&self, rng: &mut SimRng) -> ModelTheta {
        *self.posterior.sample(rng)
    }

    fn transition(
        &self,
        t: usize,
        node: &PlanNode,
        action: usize,
        theta: &ModelTheta,
        rng: &mut SimRng,
    ) -> Result<PlanNode> {
        let state = self.problem.apply(t, node.interventions, node.state, action)?;
        let rates = theta.draw_rates(rng);
        Ok(PlanNode {
            state: hybrid_step_sample(&state, theta, &rates, self.problem.dt, rng),
            rho_initial: node.rho_initial,
            interventions: node.interventions + usize::from(action == INTERVENE),
        })
    }

    fn terminal_reward(&self, node: &PlanNode) -> f64 {
        self.problem
            .terminal_reward(node.state.rho, node.rho_initial, node.interventions)
    }
}

/// What the controller acts on.
pub enum Environment {
    /// The posterior-expected noiseless transition.
    Expected,
    /// A ground-truth batch. The controller sees its measured density and
    /// carries its own model-predicted inhibitor.
    Truth(Box<TruthProcess>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub hour: f64,
    /// Density the controller acted on (measured in truth mode).
    pub rho: f64,
    /// Inhibitor the controller believed.
    pub inhibitor: f64,
    /// Q estimate per global action; `None` when infeasible.
    pub q_values: Vec<Option<f64>>,
    pub action: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlTrace {
    pub steps: Vec<TraceStep>,
    pub interventions: usize,
    pub intervention_hours: Vec<f64>,
    /// Harvest density: latent in truth mode, predicted otherwise.
    pub final_rho: f64,
    pub initial_rho: f64,
    pub reward: f64,
}

impl ControlTrace {
    pub fn write_csv<W: Write>(&self, writer: W, problem: &DecisionProblem) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["step", "hour", "rho", "inhibitor", "action", "q_none", "q_intervene"])?;
        let fmt = |q: Option<f64>| q.map_or(String::new(), |v| format!("{v:.12}"));
        for s in &self.steps {
            w.write_record([
                s.step.to_string(),
                format!("{}", s.hour),
                format!("{:.12}", s.rho),
                format!("{:.12}", s.inhibitor),
                problem.action_label(s.action),
                fmt(s.q_values.first().copied().flatten()),
                fmt(s.q_values.get(1).copied().flatten()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Closed-loop greedy control: at every step estimate Q for each feasible
/// action by sparse sampling and take the best (no-op on ties).
///
/// Step `t` plans with the stream `seed.child(t)`.
pub fn greedy_control(
    initial_rho: f64,
    posterior: &WeightedThetas,
    problem: &DecisionProblem,
    config: &PlannerConfig,
    seed: Stream,
    mut environment: Environment,
) -> Result<ControlTrace> {
    let mdp = BioprocessMdp::new(problem, posterior);
    let mut node = PlanNode::start(initial_rho);
    let mut steps = Vec::with_capacity(problem.horizon_steps);
    let mut hours = Vec::new();
    let true_initial = match &environment {
        Environment::Truth(p) => p.state().rho,
        Environment::Expected => initial_rho,
    };
    for t in 1..=problem.horizon_steps {
        if let Environment::Truth(p) = &environment {
            node.state = node.state.with_values(p.observe().max(0.0), node.state.inhibitor);
        }
        let q = qvalues(&mdp, t, &node, config, seed.child(t as u64))?;
        let action = argmax(&q);
        let mut q_values = vec![None; 2];
        for &(a, v) in &q {
            q_values[a] = Some(v);
        }
        steps.push(TraceStep {
            step: t,
            hour: node.state.hour,
            rho: node.state.rho,
            inhibitor: node.state.inhibitor,
            q_values,
            action,
        });
        let acted = problem.apply(t, node.interventions, node.state, action)?;
        if action == INTERVENE {
            hours.push(node.state.hour);
            if let Environment::Truth(p) = &mut environment {
                p.apply(problem.intervention());
            }
        }
        node.interventions += usize::from(action == INTERVENE);
        node.state = posterior.expected_step(&acted, problem.dt);
        if let Environment::Truth(p) = &mut environment {
            p.advance();
        }
    }
    let final_rho = match &environment {
        Environment::Truth(p) => p.state().rho,
        Environment::Expected => node.state.rho,
    };
    Ok(ControlTrace {
        steps,
        interventions: node.interventions,
        intervention_hours: hours,
        final_rho,
        initial_rho: true_initial,
        reward: problem.terminal_reward(final_rho, true_initial, node.interventions),
    })
}
