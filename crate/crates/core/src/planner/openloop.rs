//! Exhaustive evaluation of open-loop schedules.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::problem::{DecisionProblem, Schedule, INTERVENE};
use crate::abc::WeightedThetas;
use crate::error::{Error, Result};
use crate::model::{
    hybrid_step_sample, GroundTruthConfig, GrowthRates, Intervention, ModelTheta, ProcessState,
    TruthProcess,
};
use crate::rng::Stream;

/// A process that can be forked between decision epochs. Replicate `rep`
/// must derive all of its randomness from `stream`, keyed by epoch, so that
/// forks share noise.
pub trait RolloutModel: Sync {
    type Env: Clone + Send;
    fn start(&self, stream: Stream) -> Self::Env;
    fn apply(&self, env: &mut Self::Env, intervention: Intervention);
    fn advance(&self, env: &mut Self::Env);
    /// Current and initial latent density.
    fn densities(&self, env: &Self::Env) -> (f64, f64);
}

/// The ground-truth simulator.
pub struct TruthRollout(pub GroundTruthConfig);

#[derive(Clone)]
pub struct TruthEnv {
    process: TruthProcess,
    rho_initial: f64,
}

impl RolloutModel for TruthRollout {
    type Env = TruthEnv;

    fn start(&self, stream: Stream) -> TruthEnv {
        let process = TruthProcess::new(self.0, stream);
        TruthEnv {
            rho_initial: process.state().rho,
            process,
        }
    }

    fn apply(&self, env: &mut TruthEnv, intervention: Intervention) {
        env.process.apply(intervention);
    }

    fn advance(&self, env: &mut TruthEnv) {
        env.process.advance();
    }

    fn densities(&self, env: &TruthEnv) -> (f64, f64) {
        (env.process.state().rho, env.rho_initial)
    }
}

/// Hybrid model under a weighted parameter set: each replicate draws θ,
/// then one batch of growth rates, from a fixed initial density.
pub struct HybridRollout<'a> {
    pub thetas: &'a WeightedThetas,
    pub rho0: f64,
    pub dt: f64,
}

#[derive(Clone)]
pub struct HybridEnv {
    theta: ModelTheta,
    rates: GrowthRates,
    state: ProcessState,
    stream: Stream,
}

impl RolloutModel for HybridRollout<'_> {
    type Env = HybridEnv;

    fn start(&self, stream: Stream) -> HybridEnv {
        let mut rng = stream.child(0).rng();
        let theta = *self.thetas.sample(&mut rng);
        HybridEnv {
            rates: theta.draw_rates(&mut rng),
            theta,
            state: ProcessState::initial(self.rho0),
            stream,
        }
    }

    fn apply(&self, env: &mut HybridEnv, intervention: Intervention) {
        env.state = intervention.apply(env.state);
    }

    fn advance(&self, env: &mut HybridEnv) {
        let mut rng = env.stream.child(env.state.step as u64).rng();
        env.state = hybrid_step_sample(&env.state, &env.theta, &env.rates, self.dt, &mut rng);
    }

    fn densities(&self, env: &HybridEnv) -> (f64, f64) {
        (env.state.rho, self.rho0)
    }
}

/// Mean reward of one schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleResult {
    pub index: usize,
    pub label: String,
    pub intervention_hours: Vec<f64>,
    pub interventions: usize,
    pub mean: f64,
    pub se: f64,
    /// Mean of the unscaled revenue term.
    pub mean_revenue: f64,
    pub cost: f64,
}

fn rollout_all<M: RolloutModel>(
    problem: &DecisionProblem,
    model: &M,
    schedules: &[Schedule],
    stream: Stream,
) -> Vec<f64> {
    let mut revenue = vec![0.0; schedules.len()];
    let ids: Vec<usize> = (0..schedules.len()).collect();
    descend(problem, model, schedules, &ids, 0, model.start(stream), &mut revenue);
    revenue
}

/// Depth-first over the schedule trie; forks share all noise up to the
/// point where they diverge.
fn descend<M: RolloutModel>(
    problem: &DecisionProblem,
    model: &M,
    schedules: &[Schedule],
    ids: &[usize],
    k: usize,
    mut env: M::Env,
    revenue: &mut [f64],
) {
    if k == problem.horizon_steps {
        let (rho, rho0) = model.densities(&env);
        for &i in ids {
            revenue[i] = problem.reward_parts(rho, rho0, schedules[i].count()).0;
        }
        return;
    }
    let (act, idle): (Vec<usize>, Vec<usize>) =
        ids.iter().partition(|&&i| schedules[i].actions[k] == INTERVENE);
    if !act.is_empty() {
        let mut forked = env.clone();
        model.apply(&mut forked, problem.intervention());
        model.advance(&mut forked);
        descend(problem, model, schedules, &act, k + 1, forked, revenue);
    }
    if !idle.is_empty() {
        model.advance(&mut env);
        descend(problem, model, schedules, &idle, k + 1, env, revenue);
    }
}

/// Replicates handled per parallel batch; accumulation is sequential so
/// results do not depend on thread count.
const CHUNK: usize = 256;

/// Mean reward and standard error of every schedule over `n_reps`
/// replicates, sorted by mean descending; ties keep canonical order (no
/// intervention first, then earliest).
///
/// Replicate `r` uses `stream.child(r)`, shared by all schedules.
pub fn enumerate_open_loop<M: RolloutModel>(
    problem: &DecisionProblem,
    model: &M,
    n_reps: usize,
    stream: Stream,
) -> Result<Vec<ScheduleResult>> {
    problem.validate()?;
    if n_reps == 0 {
        return Err(Error::InvalidConfig("open-loop evaluation needs n_reps >= 1".into()));
    }
    let schedules = problem.schedules();
    let s = schedules.len();
    let mut sum = vec![0.0; s];
    let mut sum_sq = vec![0.0; s];
    let mut start = 0;
    while start < n_reps {
        let end = (start + CHUNK).min(n_reps);
        let batch: Vec<Vec<f64>> = (start..end)
            .into_par_iter()
            .map(|r| rollout_all(problem, model, &schedules, stream.child(r as u64)))
            .collect();
        for rev in batch {
            for i in 0..s {
                sum[i] += rev[i];
                sum_sq[i] += rev[i] * rev[i];
            }
        }
        start = end;
    }
    let n = n_reps as f64;
    let mut out: Vec<ScheduleResult> = schedules
        .iter()
        .enumerate()
        .map(|(i, sched)| {
            let mean_rev = sum[i] / n;
            let var_rev = if n_reps > 1 {
                ((sum_sq[i] - n * mean_rev * mean_rev) / (n - 1.0)).max(0.0)
            } else {
                0.0
            };
            let cost = problem.reward_parts(0.0, 0.0, sched.count()).1;
            ScheduleResult {
                index: i,
                label: problem.schedule_label(sched),
                intervention_hours: sched.hours(problem.dt),
                interventions: sched.count(),
                mean: problem.unit_scale * mean_rev - cost,
                se: problem.unit_scale * (var_rev / n).sqrt(),
                mean_revenue: mean_rev,
                cost,
            }
        })
        .collect();
    out.sort_by(|a, b| b.mean.total_cmp(&a.mean));
    Ok(out)
}

/// The `unit_scale` at which the best schedule's mean reward equals
/// `target`. Rewards are affine in the scale, so the best schedule's reward
/// is convex and increasing in it; solved by bisection.
pub fn calibrate_unit_scale(results: &[ScheduleResult], target: f64) -> Result<f64> {
    let best = |u: f64| {
        results
            .iter()
            .map(|r| u * r.mean_revenue - r.cost)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    if best(lo) > target {
        return Err(Error::InvalidConfig(format!(
            "target {target} is below the zero-revenue reward"
        )));
    }
    while best(hi) < target {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::InvalidConfig("unit_scale calibration diverged".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if best(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn write_ranking_csv<W: Write>(results: &[ScheduleResult], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["rank", "schedule", "hours", "interventions", "mean", "se"])?;
    for (rank, r) in results.iter().enumerate() {
        let hours: Vec<String> = r.intervention_hours.iter().map(|h| format!("{h}")).collect();
        w.write_record([
            (rank + 1).to_string(),
            r.label.clone(),
            hours.join(" "),
            r.interventions.to_string(),
            format!("{:.12}", r.mean),
            format!("{:.12}", r.se),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::simulate_ground_truth_stream;

    #[test]
    fn forks_match_direct_simulation() {
        let cfg = GroundTruthConfig::default();
        let problem = DecisionProblem::medium_exchange();
        let schedules = problem.schedules();
        let rev = rollout_all(&problem, &TruthRollout(cfg), &schedules, Stream::new(21));
        for (i, s) in schedules.iter().enumerate() {
            let t = simulate_ground_truth_stream(&cfg, 30.0, &problem.interventions(s), Stream::new(21));
            let truth = t.rho_true.unwrap();
            let direct = problem.reward_parts(truth[10], truth[0], s.count()).0;
            assert_eq!(rev[i], direct, "{}", problem.schedule_label(s));
        }
    }

    #[test]
    fn no_growth_ties_break_to_never() {
        let mut cfg = GroundTruthConfig::default().noiseless();
        for p in &mut cfg.theta.phases {
            p.mu_g = 0.0;
        }
        let problem = DecisionProblem::medium_exchange();
        let ranked = enumerate_open_loop(&problem, &TruthRollout(cfg), 3, Stream::new(1)).unwrap();
        assert_eq!(ranked[0].label, "none");
        assert_eq!(ranked[1].label, "exchange@0");
    }

    #[test]
    fn hybrid_rollout_is_deterministic_for_noiseless_theta() {
        let thetas = WeightedThetas::single(ModelTheta::case_study(0.0));
        let model = HybridRollout { thetas: &thetas, rho0: 3.0, dt: 3.0 };
        let problem = DecisionProblem::expansion();
        let a = enumerate_open_loop(&problem, &model, 2, Stream::new(1)).unwrap();
        assert!(a.iter().all(|r| r.se == 0.0));
        let b = enumerate_open_loop(&problem, &model, 2, Stream::new(99)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn calibration_hits_target() {
        let results = vec![
            ScheduleResult { index: 0, label: "a".into(), intervention_hours: vec![], interventions: 0, mean: 0.0, se: 0.0, mean_revenue: 2.0, cost: 10.0 },
            ScheduleResult { index: 1, label: "b".into(), intervention_hours: vec![], interventions: 1, mean: 0.0, se: 0.0, mean_revenue: 3.0, cost: 40.0 },
        ];
        let u = calibrate_unit_scale(&results, 100.0).unwrap();
        assert!((u - 140.0 / 3.0).abs() < 1e-9, "{u}");
    }
}
