use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use biokg::abc::{abc_smc, KgSimulator, PosteriorEnsemble, WeightedThetas};
use biokg::baseline::{ls_fit, ode_solve, DeterministicRollout, DeterministicTheta, DECIDE_DT_FINE};
use biokg::experiments::{decision_experiment, prediction_error_experiment, write_curves_csv, MetricTable, Scenario};
use biokg::model::{simulate_ground_truth_stream, ModelTheta, Trajectory, TruthProcess};
use biokg::planner::{
    enumerate_open_loop, greedy_control, write_ranking_csv, ControlTrace, DecisionProblem, Environment,
    HybridRollout, ProblemKind, ScheduleResult, TraceStep, TruthRollout,
};
use biokg::rng::Stream;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentKind, RunConfig};
use crate::provenance::{sha256_file, FileDigest, OutputDir, Provenance};

/// Which estimator `fit` runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    Abc,
    Ls,
}

/// A fitted model as written by `fit`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ModelArtifact {
    Abc {
        t_star: f64,
        posterior_mean: ModelTheta,
        ensemble: PosteriorEnsemble,
    },
    Ls {
        /// Same schema as the hybrid parameters, noise terms zero.
        theta: ModelTheta,
        sse: f64,
        best_by_restart: Vec<f64>,
    },
}

#[derive(Deserialize)]
struct ArtifactFile {
    #[serde(flatten)]
    model: ModelArtifact,
}

fn out_dir(config: &RunConfig) -> PathBuf {
    config.io.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn root(config: &RunConfig) -> Stream {
    Stream::new(config.seed)
}

pub fn simulate(config: &RunConfig) -> Result<PathBuf> {
    let dir = out_dir(config);
    let mut out = OutputDir::create(&dir, Provenance::new("simulate", config))?;
    let stream = root(config).named("simulate");
    for i in 0..config.simulate.m {
        let traj = simulate_ground_truth_stream(&config.ground_truth, config.simulate.hours, &[], stream.child(i as u64));
        out.write_csv(&format!("batch_{i:03}.csv"), |w| traj.write_csv(w))?;
    }
    out.finish(config, Vec::new())
}

/// Loads every `*.csv` in `dir` in name order, keeping only what a lab
/// would observe.
pub fn load_dataset(dir: &Path) -> Result<(Vec<Trajectory>, Vec<FileDigest>)> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    let mut data = Vec::with_capacity(files.len());
    let mut digests = Vec::with_capacity(files.len());
    for f in &files {
        let t = Trajectory::load_csv(f).with_context(|| format!("loading {}", f.display()))?;
        data.push(t.observed_only());
        digests.push(FileDigest {
            name: f.file_name().unwrap().to_string_lossy().into_owned(),
            sha256: sha256_file(f)?,
        });
    }
    if data.is_empty() {
        bail!("no trajectories (*.csv) in {}", dir.display());
    }
    Ok((data, digests))
}

pub fn fit(config: &RunConfig, method: FitMethod) -> Result<PathBuf> {
    let Some(data_dir) = config.io.data_dir.as_deref() else {
        bail!("fit needs a data directory (--data or io.data_dir)");
    };
    let (data, inputs) = load_dataset(data_dir)?;
    let t_star = config.ground_truth.theta.t_star;
    let model = match method {
        FitMethod::Abc => {
            let simulator = KgSimulator::new(&data, t_star)?;
            let ensemble = abc_smc(&simulator, &config.prior, &config.abc, root(config).named("fit-abc"))?;
            ModelArtifact::Abc {
                t_star,
                posterior_mean: ModelTheta::from_flat(&ensemble.weighted_mean(), t_star),
                ensemble,
            }
        }
        FitMethod::Ls => {
            let fit = ls_fit(
                &data,
                &DeterministicTheta::default_bounds(),
                t_star,
                &config.experiment.ls,
                root(config).named("fit-ls"),
            )?;
            ModelArtifact::Ls {
                theta: fit.theta.to_model(),
                sse: fit.sse,
                best_by_restart: fit.best_by_restart,
            }
        }
    };
    let dir = out_dir(config);
    let mut out = OutputDir::create(&dir, Provenance::new("fit", config))?;
    out.write_json("model.json", &model)?;
    out.finish(config, inputs)
}

/// Model source for `plan`: a fitted artifact or the ground truth itself.
enum PlanModel {
    Truth,
    Hybrid(WeightedThetas),
    Ode(DeterministicTheta),
}

fn load_plan_model(config: &RunConfig) -> Result<(PlanModel, Vec<FileDigest>)> {
    let Some(path) = config.io.model.as_deref() else {
        bail!("plan needs a model (--model PATH or --model truth)");
    };
    if path == Path::new("truth") {
        return Ok((PlanModel::Truth, Vec::new()));
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: ArtifactFile =
        serde_json::from_str(&text).with_context(|| format!("{} is not a model artifact", path.display()))?;
    let digest = FileDigest {
        name: path.file_name().unwrap_or_default().to_string_lossy().into_owned(),
        sha256: sha256_file(path)?,
    };
    let model = match file.model {
        ModelArtifact::Abc { t_star, ensemble, .. } => {
            if t_star != config.ground_truth.theta.t_star {
                bail!("model phase switch at {t_star} h does not match the configured process");
            }
            PlanModel::Hybrid(WeightedThetas::from_ensemble(&ensemble, t_star)?)
        }
        ModelArtifact::Ls { theta, .. } => PlanModel::Ode(DeterministicTheta::from_model(&theta)),
    };
    Ok((model, vec![digest]))
}

/// The fitted ODE has no posterior to plan over: its trace is the ODE
/// rollout of the best open-loop schedule, without Q estimates.
fn ode_trace(
    theta: &DeterministicTheta,
    problem: &DecisionProblem,
    rho0: f64,
    best: &ScheduleResult,
) -> Result<ControlTrace> {
    let schedule = &problem.schedules()[best.index];
    let plan = problem.interventions(schedule);
    let traj = ode_solve(theta, rho0, problem.harvest_hours(), problem.dt, DECIDE_DT_FINE, &plan);
    let inhibitor = traj.inhibitor_true.as_ref().expect("ode carries inhibitor");
    let steps = (0..problem.horizon_steps)
        .map(|k| TraceStep {
            step: k + 1,
            hour: traj.hours[k],
            rho: traj.rho_obs[k],
            inhibitor: inhibitor[k],
            q_values: vec![None, None],
            action: schedule.actions[k],
        })
        .collect();
    let final_rho = traj.rho_obs[problem.horizon_steps];
    Ok(ControlTrace {
        steps,
        interventions: schedule.count(),
        intervention_hours: schedule.hours(problem.dt),
        final_rho,
        initial_rho: rho0,
        reward: problem.terminal_reward(final_rho, rho0, schedule.count()),
    })
}

#[derive(Serialize)]
struct PlanSummary<'a> {
    problem: &'a DecisionProblem,
    model: String,
    environment: &'static str,
    trace: &'a ControlTrace,
    open_loop_reps: usize,
    best_schedule: &'a ScheduleResult,
}

pub fn plan(config: &RunConfig) -> Result<PathBuf> {
    let (model, inputs) = load_plan_model(config)?;
    let problem = &config.problem;
    let gt = &config.ground_truth;
    let seed = root(config);
    let planner = config.planner.planner_config();
    let reps = config.planner.open_loop_reps;

    let (thetas, ranking, model_name) = match &model {
        PlanModel::Truth => (
            WeightedThetas::single(gt.theta),
            enumerate_open_loop(problem, &TruthRollout(*gt), reps, seed.named("rank"))?,
            "truth",
        ),
        PlanModel::Hybrid(thetas) => {
            let rollout = HybridRollout {
                thetas,
                rho0: gt.mu_rho0,
                dt: problem.dt,
            };
            let ranking = enumerate_open_loop(problem, &rollout, reps, seed.named("rank"))?;
            (thetas.clone(), ranking, "abc")
        }
        PlanModel::Ode(theta) => {
            let rollout = DeterministicRollout {
                theta: *theta,
                rho0: gt.mu_rho0,
                dt: problem.dt,
                dt_fine: DECIDE_DT_FINE,
            };
            let ranking = enumerate_open_loop(problem, &rollout, 1, seed.named("rank"))?;
            (WeightedThetas::single(theta.to_model()), ranking, "ls")
        }
    };

    let (trace, env_name) = match &model {
        PlanModel::Ode(theta) => (ode_trace(theta, problem, gt.mu_rho0, &ranking[0])?, "ode"),
        _ => {
            let (environment, env_name) = if config.planner.truth_environment {
                (Environment::Truth(Box::new(TruthProcess::new(*gt, seed.named("batch")))), "truth")
            } else {
                (Environment::Expected, "expected")
            };
            let trace = greedy_control(gt.mu_rho0, &thetas, problem, &planner, seed.named("control"), environment)?;
            (trace, env_name)
        }
    };

    let dir = out_dir(config);
    let mut out = OutputDir::create(&dir, Provenance::new("plan", config))?;
    out.write_csv("trace.csv", |w| trace.write_csv(w, problem))?;
    out.write_csv("ranking.csv", |w| write_ranking_csv(&ranking, w))?;
    out.write_json(
        "plan.json",
        &PlanSummary {
            problem,
            model: model_name.into(),
            environment: env_name,
            trace: &trace,
            open_loop_reps: if matches!(model, PlanModel::Ode(_)) { 1 } else { reps },
            best_schedule: &ranking[0],
        },
    )?;
    out.finish(config, inputs)
}

#[derive(Serialize)]
struct Choices<'a> {
    scenario: String,
    ls: &'a [String],
    hybrid: &'a [Vec<Vec<f64>>],
}

pub fn experiment(config: &RunConfig) -> Result<PathBuf> {
    let exp = config.experiment_config();
    let e = &config.experiment;
    let mut scenarios = Vec::new();
    for &m in &e.sizes {
        for &b2b in &e.b2b {
            for &noise in &e.noise {
                scenarios.push(Scenario::new(b2b, noise, m, e.replications));
            }
        }
    }
    let dir = out_dir(config);
    let mut out = OutputDir::create(&dir, Provenance::new("experiment", config))?;

    if matches!(e.kind, ExperimentKind::Prediction | ExperimentKind::All) {
        let mut table = MetricTable::new(config.seed);
        for s in &scenarios {
            eprintln!("prediction {}", s.label());
            table.extend(prediction_error_experiment(s, &exp, config.seed)?);
        }
        out.write_csv("prediction.csv", |w| table.write_csv(w))?;
        out.write_json("prediction.json", &table)?;
    }
    if matches!(e.kind, ExperimentKind::Decision | ExperimentKind::All) {
        for &kind in &e.problems {
            let problem = if kind == config.problem.kind {
                config.problem.clone()
            } else {
                DecisionProblem::new(kind)
            };
            let name = match kind {
                ProblemKind::MediumExchange => "exchange",
                ProblemKind::Expansion => "expansion",
            };
            let mut table = MetricTable::new(config.seed);
            let mut curves = Vec::new();
            let mut choices = Vec::new();
            for s in &scenarios {
                eprintln!("decision {name} {}", s.label());
                let o = decision_experiment(s, &problem, &exp, config.seed)?;
                table.extend(o.table);
                curves.extend(o.curves);
                choices.push((s.label(), o.ls_choices, o.hybrid_choices));
            }
            out.write_csv(&format!("decision_{name}.csv"), |w| table.write_csv(w))?;
            out.write_json(&format!("decision_{name}.json"), &table)?;
            if !curves.is_empty() {
                out.write_csv(&format!("curves_{name}.csv"), |w| write_curves_csv(&curves, w))?;
            }
            let choices: Vec<Choices> = choices
                .iter()
                .map(|(scenario, ls, hybrid)| Choices {
                    scenario: scenario.clone(),
                    ls,
                    hybrid,
                })
                .collect();
            #[derive(Serialize)]
            struct ChoiceDoc<'a> {
                choices: Vec<Choices<'a>>,
            }
            out.write_json(&format!("choices_{name}.json"), &ChoiceDoc { choices })?;
        }
    }
    out.finish(config, Vec::new())
}
