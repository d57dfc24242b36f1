//! Scenario grid, macro-replication harness and summary tables comparing
//! the hybrid model with the least-squares ODE.

mod stats;

pub use stats::{bootstrap_ci, mean_se};

pub use crate::rng::seed_schedule;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abc::{abc_smc, posterior_predict, AbcConfig, KgSimulator, PosteriorEnsemble, PriorSpec, WeightedThetas};
use crate::baseline::{ls_decide, ls_fit, ls_rank, ode_solve, DeterministicTheta, LsConfig, LsFit, DECIDE_DT_FINE};
use crate::error::{Error, Result};
use crate::model::{simulate_ground_truth_stream, GroundTruthConfig, Trajectory, TruthProcess};
use crate::planner::{
    enumerate_open_loop, greedy_control, DecisionProblem, Environment, HybridRollout, PlannerConfig,
    ProblemKind, ScheduleResult, TruthRollout,
};
use crate::rng::Stream;

/// Two-level factor of the scenario grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    High,
    Low,
}

impl Level {
    pub fn label(self) -> &'static str {
        match self {
            Level::High => "high",
            Level::Low => "low",
        }
    }
}

/// One cell of the experimental grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Batch-to-batch variation of the growth rate.
    pub b2b: Level,
    /// Process noise of the ground-truth SDE.
    pub noise: Level,
    /// Historical batches available for fitting.
    pub m: usize,
    /// Macro-replications.
    pub replications: usize,
}

impl Scenario {
    pub fn new(b2b: Level, noise: Level, m: usize, replications: usize) -> Self {
        Scenario { b2b, noise, m, replications }
    }

    pub fn sigma_g(&self) -> f64 {
        match self.b2b {
            Level::High => 0.016,
            Level::Low => 0.008,
        }
    }

    pub fn sigma_n(&self) -> f64 {
        match self.noise {
            Level::High => 0.03,
            Level::Low => 0.01,
        }
    }

    pub fn ground_truth(&self) -> GroundTruthConfig {
        GroundTruthConfig::case_study(self.sigma_g(), self.sigma_n())
    }

    pub fn label(&self) -> String {
        format!("b2b={},noise={},m={}", self.b2b.label(), self.noise.label(), self.m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.replications == 0 {
            return Err(Error::InvalidConfig(format!(
                "scenario {} needs m >= 1 and replications >= 1",
                self.label()
            )));
        }
        Ok(())
    }

    /// All four noise cells for each dataset size, high variation first.
    pub fn grid(sizes: &[usize], replications: usize) -> Vec<Scenario> {
        let mut out = Vec::new();
        for &m in sizes {
            for b2b in [Level::High, Level::Low] {
                for noise in [Level::High, Level::Low] {
                    out.push(Scenario::new(b2b, noise, m, replications));
                }
            }
        }
        out
    }
}

/// Settings shared by both experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub prior: PriorSpec,
    pub abc: AbcConfig,
    pub ls: LsConfig,
    pub planner: PlannerConfig,
    /// Look-ahead steps for the prediction table.
    pub horizons: Vec<usize>,
    /// Test batches per replication in the prediction experiment.
    pub n_test: usize,
    /// Monte Carlo draws behind each predictive mean.
    pub n_mc: usize,
    /// Ground-truth batches each controller is evaluated on per replication.
    pub decision_batches: usize,
    /// Replicates behind each point of the reward curves.
    pub curve_reps: usize,
    pub bootstrap_resamples: usize,
    /// Length of the simulated historical batches, hours.
    pub history_hours: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            prior: PriorSpec::kinetic_default(),
            abc: AbcConfig::default(),
            ls: LsConfig::default(),
            planner: PlannerConfig::default(),
            horizons: vec![1, 6, 10],
            n_test: 200,
            n_mc: 200,
            decision_batches: 5,
            curve_reps: 500,
            bootstrap_resamples: 1000,
            history_hours: 30.0,
        }
    }
}

impl ExperimentConfig {
    /// Replications and test-set size used for quick runs.
    pub const DESK: (usize, usize) = (10, 200);
    /// The full protocol.
    pub const FULL: (usize, usize) = (30, 1000);

    pub fn validate(&self) -> Result<()> {
        self.prior.validate()?;
        self.abc.validate()?;
        self.ls.validate()?;
        self.planner.validate()?;
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(Error::InvalidConfig("horizons must be non-empty and positive".into()));
        }
        if self.n_test == 0 || self.n_mc == 0 || self.decision_batches == 0 || self.curve_reps == 0 {
            return Err(Error::InvalidConfig(
                "n_test, n_mc, decision_batches and curve_reps must be positive".into(),
            ));
        }
        if self.bootstrap_resamples == 0 {
            return Err(Error::InvalidConfig("bootstrap_resamples must be positive".into()));
        }
        if !(self.history_hours > 0.0) {
            return Err(Error::InvalidConfig("history_hours must be positive".into()));
        }
        Ok(())
    }
}

/// One summarized table cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub scenario: String,
    pub b2b: Level,
    pub noise: Level,
    pub m: usize,
    pub method: String,
    pub quantity: String,
    /// Look-ahead steps, for prediction rows.
    pub horizon: Option<usize>,
    pub hours: Option<f64>,
    pub mean: f64,
    pub se: f64,
    /// 1.96 standard errors.
    pub ci95_half: f64,
    pub replications: usize,
    /// Per-replication values behind the summary.
    pub values: Vec<f64>,
    /// Stream seed of each replication.
    pub rep_seeds: Vec<u64>,
}

/// A set of rows produced from one root seed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub root_seed: u64,
    pub rows: Vec<MetricRow>,
}

impl MetricTable {
    pub fn new(root_seed: u64) -> Self {
        MetricTable { root_seed, rows: Vec::new() }
    }

    pub fn extend(&mut self, other: MetricTable) {
        self.rows.extend(other.rows);
    }

    pub fn find(&self, method: &str, quantity: &str, horizon: Option<usize>) -> Option<&MetricRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.quantity == quantity && r.horizon == horizon)
    }

    /// Summary columns only; per-replication values go to the JSON form.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "scenario", "b2b", "noise", "m", "method", "quantity", "horizon", "hours", "mean", "se",
            "ci95_half", "replications", "root_seed",
        ])?;
        let opt = |v: Option<String>| v.unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.scenario.clone(),
                r.b2b.label().to_string(),
                r.noise.label().to_string(),
                r.m.to_string(),
                r.method.clone(),
                r.quantity.clone(),
                opt(r.horizon.map(|h| h.to_string())),
                opt(r.hours.map(|h| h.to_string())),
                format!("{:.12}", r.mean),
                format!("{:.12}", r.se),
                format!("{:.12}", r.ci95_half),
                r.replications.to_string(),
                self.root_seed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn metric_row(
    scenario: &Scenario,
    method: &str,
    quantity: &str,
    horizon: Option<usize>,
    dt: f64,
    values: Vec<f64>,
    rep_seeds: Vec<u64>,
) -> MetricRow {
    let (mean, se) = mean_se(&values);
    MetricRow {
        scenario: scenario.label(),
        b2b: scenario.b2b,
        noise: scenario.noise,
        m: scenario.m,
        method: method.to_string(),
        quantity: quantity.to_string(),
        horizon,
        hours: horizon.map(|h| h as f64 * dt),
        mean,
        se,
        ci95_half: 1.96 * se,
        replications: values.len(),
        values,
        rep_seeds,
    }
}

pub const HYBRID: &str = "hybrid";
pub const LEAST_SQUARES: &str = "ls";
pub const GROUND_TRUTH: &str = "truth";

/// Stream of replication `r` of a scenario.
pub fn replication_stream(root: Stream, scenario: &Scenario, r: usize) -> Stream {
    root.named(&scenario.label()).child(r as u64)
}

/// `m` historical batches without interventions, latent series removed.
pub fn generate_dataset(truth: &GroundTruthConfig, m: usize, hours: f64, stream: Stream) -> Vec<Trajectory> {
    (0..m)
        .map(|i| simulate_ground_truth_stream(truth, hours, &[], stream.child(i as u64)).observed_only())
        .collect()
}

/// Both models fitted to one replication's data.
#[derive(Clone, Debug)]
pub struct FittedModels {
    pub dataset: Vec<Trajectory>,
    pub ensemble: PosteriorEnsemble,
    pub posterior: WeightedThetas,
    pub ls: LsFit,
}

pub fn fit_replication(scenario: &Scenario, config: &ExperimentConfig, stream: Stream) -> Result<FittedModels> {
    let truth = scenario.ground_truth();
    let t_star = truth.theta.t_star;
    let dataset = generate_dataset(&truth, scenario.m, config.history_hours, stream.named("data"));
    let simulator = KgSimulator::new(&dataset, t_star)?;
    let ensemble = abc_smc(&simulator, &config.prior, &config.abc, stream.named("abc"))?;
    let posterior = WeightedThetas::from_ensemble(&ensemble, t_star)?;
    let ls = ls_fit(&dataset, &DeterministicTheta::default_bounds(), t_star, &config.ls, stream.named("ls"))?;
    Ok(FittedModels { dataset, ensemble, posterior, ls })
}

/// Mean absolute error per method, state and horizon over `n_test` fresh
/// ground-truth batches. Both predictors start from the batch's latent
/// initial density with no inhibitor and are compared with the latent
/// states. Returned in the order of `horizons`, as
/// `[hybrid ρ, hybrid I, ls ρ, ls I]` per horizon.
pub fn prediction_errors(
    truth: &GroundTruthConfig,
    posterior: &WeightedThetas,
    ls: &DeterministicTheta,
    horizons: &[usize],
    n_test: usize,
    n_mc: usize,
    stream: Stream,
) -> Vec<[f64; 4]> {
    let max_h = horizons.iter().copied().max().unwrap_or(0);
    let dt = truth.dt_obs;
    let per_batch: Vec<Vec<[f64; 4]>> = (0..n_test)
        .into_par_iter()
        .map(|i| {
            let batch = stream.named("test").child(i as u64);
            let traj = simulate_ground_truth_stream(truth, max_h as f64 * dt, &[], batch);
            let rho = traj.rho_true.as_ref().expect("ground truth carries latent density");
            let inh = traj.inhibitor_true.as_ref().expect("ground truth carries inhibitor");
            let mut rng = stream.named("predict").child(i as u64).rng();
            let hybrid = posterior_predict(posterior, rho[0], max_h, n_mc, dt, &[], &mut rng);
            let ode = ode_solve(ls, rho[0], max_h as f64 * dt, dt, DECIDE_DT_FINE, &[]);
            let ode_inh = ode.inhibitor_true.as_ref().expect("ode carries inhibitor");
            horizons
                .iter()
                .map(|&h| {
                    [
                        (rho[h] - hybrid.rho_mean[h]).abs(),
                        (inh[h] - hybrid.inhibitor_mean[h]).abs(),
                        (rho[h] - ode.rho_obs[h]).abs(),
                        (inh[h] - ode_inh[h]).abs(),
                    ]
                })
                .collect()
        })
        .collect();
    let mut out = vec![[0.0; 4]; horizons.len()];
    for batch in &per_batch {
        for (acc, e) in out.iter_mut().zip(batch) {
            for q in 0..4 {
                acc[q] += e[q];
            }
        }
    }
    for acc in &mut out {
        for v in acc.iter_mut() {
            *v /= n_test as f64;
        }
    }
    out
}

/// Prediction-error table for one scenario: mean absolute error of both
/// methods on both states at each horizon, summarized over replications.
pub fn prediction_error_experiment(scenario: &Scenario, config: &ExperimentConfig, root_seed: u64) -> Result<MetricTable> {
    scenario.validate()?;
    config.validate()?;
    let root = Stream::new(root_seed);
    let truth = scenario.ground_truth();
    let reps: Vec<(u64, Vec<[f64; 4]>)> = (0..scenario.replications)
        .into_par_iter()
        .map(|r| {
            let stream = replication_stream(root, scenario, r);
            let fitted = fit_replication(scenario, config, stream)?;
            let errors = prediction_errors(
                &truth,
                &fitted.posterior,
                &fitted.ls.theta,
                &config.horizons,
                config.n_test,
                config.n_mc,
                stream,
            );
            Ok((stream.seed(), errors))
        })
        .collect::<Result<_>>()?;
    let seeds: Vec<u64> = reps.iter().map(|r| r.0).collect();
    let mut table = MetricTable::new(root_seed);
    let columns = [(HYBRID, "mae_rho"), (HYBRID, "mae_inhibitor"), (LEAST_SQUARES, "mae_rho"), (LEAST_SQUARES, "mae_inhibitor")];
    for (q, (method, quantity)) in columns.iter().enumerate() {
        for (k, &h) in config.horizons.iter().enumerate() {
            let values = reps.iter().map(|r| r.1[k][q]).collect();
            table
                .rows
                .push(metric_row(scenario, method, quantity, Some(h), truth.dt_obs, values, seeds.clone()));
        }
    }
    Ok(table)
}

/// Reward of one schedule point on a curve, summarized over replications.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub scenario: String,
    pub method: String,
    pub label: String,
    /// Intervention hour; `None` for the schedule without interventions.
    pub hour: Option<f64>,
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

pub fn write_curves_csv<W: Write>(curves: &[CurvePoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["hour", "mean", "ci_lo", "ci_hi", "method", "label", "scenario"])?;
    for c in curves {
        w.write_record([
            c.hour.map(|h| h.to_string()).unwrap_or_default(),
            format!("{:.12}", c.mean),
            format!("{:.12}", c.ci_lo),
            format!("{:.12}", c.ci_hi),
            c.method.clone(),
            c.label.clone(),
            c.scenario.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Result of the decision experiment for one scenario and problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionOutcome {
    pub table: MetricTable,
    /// Reward by exchange hour; empty for expansion, whose schedules are
    /// not indexed by one hour.
    pub curves: Vec<CurvePoint>,
    /// Schedule chosen by least squares in each replication.
    pub ls_choices: Vec<String>,
    /// Intervention hours chosen by the closed-loop controller, per
    /// replication and test batch.
    pub hybrid_choices: Vec<Vec<Vec<f64>>>,
}

struct RepDecision {
    seed: u64,
    hybrid: f64,
    ls: f64,
    ls_label: String,
    hybrid_hours: Vec<Vec<f64>>,
    hybrid_curve: Vec<ScheduleResult>,
    ls_curve: Vec<ScheduleResult>,
}

fn quantity_name(kind: ProblemKind) -> &'static str {
    match kind {
        ProblemKind::MediumExchange => "cost_efficiency",
        ProblemKind::Expansion => "profit",
    }
}

/// Closed-loop hybrid control against least-squares open-loop schedules.
/// Each replication fits both models to fresh data; both are scored on the
/// same ground-truth batches (shared noise) by the terminal reward of
/// `problem`.
pub fn decision_experiment(
    scenario: &Scenario,
    problem: &DecisionProblem,
    config: &ExperimentConfig,
    root_seed: u64,
) -> Result<DecisionOutcome> {
    scenario.validate()?;
    config.validate()?;
    problem.validate()?;
    let root = Stream::new(root_seed);
    let truth = scenario.ground_truth();
    let hours = problem.harvest_hours();
    let curves_wanted = problem.kind == ProblemKind::MediumExchange;

    let reps: Vec<RepDecision> = (0..scenario.replications)
        .into_par_iter()
        .map(|r| {
            let stream = replication_stream(root, scenario, r);
            let fitted = fit_replication(scenario, config, stream)?;
            let (ls_best, ls_plan) = ls_decide(&fitted.ls.theta, problem, truth.mu_rho0)?;
            let mut hybrid_total = 0.0;
            let mut ls_total = 0.0;
            let mut hybrid_hours = Vec::with_capacity(config.decision_batches);
            for k in 0..config.decision_batches {
                let batch = stream.named("batch").child(k as u64);
                let process = TruthProcess::new(truth, batch);
                let trace = greedy_control(
                    process.observe(),
                    &fitted.posterior,
                    problem,
                    &config.planner,
                    stream.named("plan").child(k as u64),
                    Environment::Truth(Box::new(process)),
                )?;
                hybrid_total += trace.reward;
                hybrid_hours.push(trace.intervention_hours);

                let traj = simulate_ground_truth_stream(&truth, hours, &ls_plan, batch);
                let rho = traj.rho_true.as_ref().expect("ground truth carries latent density");
                let used = ls_plan.iter().flatten().count();
                ls_total += problem.terminal_reward(rho[rho.len() - 1], rho[0], used);
            }
            let (hybrid_curve, ls_curve) = if curves_wanted {
                let model = HybridRollout {
                    thetas: &fitted.posterior,
                    rho0: truth.mu_rho0,
                    dt: problem.dt,
                };
                (
                    enumerate_open_loop(problem, &model, config.curve_reps, stream.named("curve"))?,
                    ls_rank(&fitted.ls.theta, problem, truth.mu_rho0)?,
                )
            } else {
                (Vec::new(), Vec::new())
            };
            let n = config.decision_batches as f64;
            Ok(RepDecision {
                seed: stream.seed(),
                hybrid: hybrid_total / n,
                ls: ls_total / n,
                ls_label: ls_best.label,
                hybrid_hours,
                hybrid_curve,
                ls_curve,
            })
        })
        .collect::<Result<_>>()?;

    let seeds: Vec<u64> = reps.iter().map(|r| r.seed).collect();
    let quantity = quantity_name(problem.kind);
    let mut table = MetricTable::new(root_seed);
    table.rows.push(metric_row(scenario, HYBRID, quantity, None, problem.dt, reps.iter().map(|r| r.hybrid).collect(), seeds.clone()));
    table.rows.push(metric_row(scenario, LEAST_SQUARES, quantity, None, problem.dt, reps.iter().map(|r| r.ls).collect(), seeds));

    let mut curves = Vec::new();
    if curves_wanted {
        let schedules = problem.schedules();
        let resample_stream = root.named(&scenario.label()).named("bootstrap");
        for (method, pick) in [
            (HYBRID, (|r: &RepDecision| &r.hybrid_curve) as fn(&RepDecision) -> &Vec<ScheduleResult>),
            (LEAST_SQUARES, |r: &RepDecision| &r.ls_curve),
        ] {
            for (s, schedule) in schedules.iter().enumerate() {
                let values: Vec<f64> = reps
                    .iter()
                    .map(|r| pick(r).iter().find(|x| x.index == s).map_or(f64::NAN, |x| x.mean))
                    .collect();
                let (mean, _) = mean_se(&values);
                let (ci_lo, ci_hi) = bootstrap_ci(
                    &values,
                    config.bootstrap_resamples,
                    0.95,
                    &mut resample_stream.named(method).child(s as u64).rng(),
                );
                curves.push(CurvePoint {
                    scenario: scenario.label(),
                    method: method.to_string(),
                    label: problem.schedule_label(schedule),
                    hour: schedule.hours(problem.dt).first().copied(),
                    mean,
                    ci_lo,
                    ci_hi,
                });
            }
        }
        let truth_curve = enumerate_open_loop(
            problem,
            &TruthRollout(truth),
            config.curve_reps,
            root.named(&scenario.label()).named("truth-curve"),
        )?;
        for (s, schedule) in schedules.iter().enumerate() {
            let r = truth_curve.iter().find(|x| x.index == s).expect("every schedule is ranked");
            curves.push(CurvePoint {
                scenario: scenario.label(),
                method: GROUND_TRUTH.to_string(),
                label: r.label.clone(),
                hour: schedule.hours(problem.dt).first().copied(),
                mean: r.mean,
                ci_lo: r.mean - 1.96 * r.se,
                ci_hi: r.mean + 1.96 * r.se,
            });
        }
    }

    Ok(DecisionOutcome {
        table,
        curves,
        ls_choices: reps.iter().map(|r| r.ls_label.clone()).collect(),
        hybrid_choices: reps.into_iter().map(|r| r.hybrid_hours).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{hybrid_step_mean, ModelTheta, ProcessState};

    fn quick_config() -> ExperimentConfig {
        ExperimentConfig {
            abc: AbcConfig {
                n_particles: 40,
                replications: 4,
                max_generations: 4,
                ..AbcConfig::default()
            },
            ls: LsConfig {
                restarts: 2,
                max_evals: 200,
                ..LsConfig::default()
            },
            planner: PlannerConfig::new(1, 1),
            n_test: 5,
            n_mc: 5,
            decision_batches: 1,
            curve_reps: 5,
            bootstrap_resamples: 50,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn grid_covers_four_noise_cells_per_size() {
        let g = Scenario::grid(&[3, 6, 20], 10);
        assert_eq!(g.len(), 12);
        assert_eq!(g[0].sigma_g(), 0.016);
        assert_eq!(g[0].sigma_n(), 0.03);
        assert_eq!(g[3].sigma_g(), 0.008);
        assert_eq!(g[3].sigma_n(), 0.01);
        assert_eq!(g[11].label(), "b2b=low,noise=low,m=20");
    }

    #[test]
    fn exact_models_on_noiseless_truth() {
        let truth = GroundTruthConfig::default().noiseless();
        let theta = ModelTheta::case_study(0.0);
        let post = WeightedThetas::single(theta);
        let ls = DeterministicTheta::case_study();
        let errors = prediction_errors(&truth, &post, &ls, &[1, 6, 10], 3, 2, Stream::new(4));
        let ode = ode_solve(&ls, truth.mu_rho0, 30.0, 3.0, 0.001, &[]);
        for (e, &h) in errors.iter().zip(&[1usize, 6, 10]) {
            assert!(e[2] < 1e-3 && e[3] < 1e-3, "ls error {e:?}");
            // the hybrid model errs only by its own discretization
            let mut s = ProcessState::initial(truth.mu_rho0);
            for _ in 0..h {
                s = hybrid_step_mean(&s, &theta, &theta.mean_rates(), 3.0);
            }
            let want = (s.rho - ode.rho_obs[h]).abs();
            assert!((e[0] - want).abs() < 1e-3, "h={h}: {} vs {want}", e[0]);
        }
    }

    #[test]
    fn prediction_table_shape_and_reproducibility() {
        let scenario = Scenario::new(Level::Low, Level::Low, 2, 2);
        let config = quick_config();
        let a = prediction_error_experiment(&scenario, &config, 11).unwrap();
        let b = prediction_error_experiment(&scenario, &config, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 12);
        for row in &a.rows {
            assert_eq!(row.values.len(), 2);
            assert!(row.se >= 0.0 && row.ci95_half >= 0.0);
            assert!(row.mean.is_finite());
        }
        let mut csv = Vec::new();
        a.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 13);
    }

    #[test]
    fn decision_experiment_scores_both_methods() {
        let scenario = Scenario::new(Level::Low, Level::Low, 2, 2);
        let config = quick_config();
        let problem = DecisionProblem::medium_exchange();
        let out = decision_experiment(&scenario, &problem, &config, 3).unwrap();
        assert_eq!(out.table.rows.len(), 2);
        assert!(out.table.find(HYBRID, "cost_efficiency", None).is_some());
        assert_eq!(out.ls_choices.len(), 2);
        assert_eq!(out.hybrid_choices.len(), 2);
        assert!(out.hybrid_choices.iter().flatten().all(|h| h.len() <= 1));
        // hybrid, ls and truth points for each of the 11 schedules
        assert_eq!(out.curves.len(), 33);
        assert!(out.curves.iter().all(|c| c.ci_lo <= c.mean + 1e-9 && c.mean <= c.ci_hi + 1e-9));
        let again = decision_experiment(&scenario, &problem, &config, 3).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn rejects_empty_scenario() {
        let s = Scenario::new(Level::Low, Level::Low, 0, 1);
        assert!(prediction_error_experiment(&s, &quick_config(), 1).is_err());
    }
}
