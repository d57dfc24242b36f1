//! Deterministic ODE comparator: least-squares fit by bounded simplex
//! search, then exhaustive schedule search on the fitted model.

mod ode;

pub use ode::{integrate, ode_solve, DeterministicTheta};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abc::Bounds;
use crate::error::{Error, Result};
use crate::model::{Intervention, ProcessState, Trajectory};
use crate::planner::{enumerate_open_loop, DecisionProblem, RolloutModel, ScheduleResult};
use crate::rng::Stream;

/// Integration step used inside the fit objective, hours.
pub const FIT_DT_FINE: f64 = 0.1;
/// Integration step used for decisions, hours.
pub const DECIDE_DT_FINE: f64 = 0.01;

/// Settings of the multi-start simplex search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LsConfig {
    pub restarts: usize,
    /// Objective evaluations allowed per local search.
    pub max_evals: usize,
    pub dt_fine: f64,
}

impl Default for LsConfig {
    fn default() -> Self {
        LsConfig {
            restarts: 20,
            max_evals: 1000,
            dt_fine: FIT_DT_FINE,
        }
    }
}

impl LsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.max_evals < 10 {
            return Err(Error::InvalidConfig("least squares needs restarts >= 1 and max_evals >= 10".into()));
        }
        if !(self.dt_fine > 0.0 && self.dt_fine <= 0.1) {
            return Err(Error::InvalidConfig(format!("dt_fine {} must lie in (0, 0.1]", self.dt_fine)));
        }
        Ok(())
    }
}

/// Fitted parameters with the objective they reach.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LsFit {
    pub theta: DeterministicTheta,
    pub sse: f64,
    /// Best objective after each restart, non-increasing.
    pub best_by_restart: Vec<f64>,
    /// Objective at each restart's random start.
    pub start_values: Vec<f64>,
}

/// Sum of squared density residuals over every observation after the
/// first. Each series is integrated from its own first observation.
pub fn ls_objective(theta: &DeterministicTheta, dataset: &[Trajectory], dt_fine: f64) -> f64 {
    let mut sse = 0.0;
    for traj in dataset {
        let mut state = ProcessState::initial(traj.rho_obs[0]);
        for k in 1..traj.len() {
            if let Some(a) = traj.interventions[k - 1] {
                state = a.apply(state);
            }
            let span = traj.hours[k] - traj.hours[k - 1];
            let (r, i) = integrate(theta, traj.hours[k - 1], state.rho, state.inhibitor, span, dt_fine);
            state = state.with_values(r, i);
            let e = traj.rho_obs[k] - r;
            sse += e * e;
        }
    }
    sse
}

/// Multi-start least squares within `bounds`. Restart `i` starts from a
/// uniform draw of `stream.child(i)` and runs the simplex twice, the second
/// time from the first result. The best restart wins; ties keep the first.
pub fn ls_fit(
    dataset: &[Trajectory],
    bounds: &[Bounds],
    t_star: f64,
    config: &LsConfig,
    stream: Stream,
) -> Result<LsFit> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for t in dataset {
        t.validate()?;
    }
    if bounds.len() != DeterministicTheta::DIM {
        return Err(Error::InvalidConfig(format!(
            "least squares needs {} bounds, got {}",
            DeterministicTheta::DIM,
            bounds.len()
        )));
    }
    let to_theta = |u: &[f64]| {
        let v: Vec<f64> = u
            .iter()
            .zip(bounds)
            .map(|(x, b)| b.lower + x.clamp(0.0, 1.0) * b.width())
            .collect();
        DeterministicTheta::from_vec(&v, t_star)
    };
    let objective = |u: &[f64]| ls_objective(&to_theta(u), dataset, config.dt_fine);

    let runs: Vec<(Vec<f64>, f64, f64)> = (0..config.restarts)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.child(i as u64).rng();
            let start: Vec<f64> = (0..bounds.len()).map(|_| rng.random::<f64>()).collect();
            let f0 = objective(&start);
            let (x1, _) = nelder_mead(&objective, &start, config.max_evals);
            let (x2, f2) = nelder_mead(&objective, &x1, config.max_evals);
            (x2, f2, f0)
        })
        .collect();

    let mut best = 0;
    let mut best_by_restart = Vec::with_capacity(runs.len());
    for (i, run) in runs.iter().enumerate() {
        if run.1 < runs[best].1 {
            best = i;
        }
        best_by_restart.push(runs[best].1);
    }
    Ok(LsFit {
        theta: to_theta(&runs[best].0),
        sse: runs[best].1,
        best_by_restart,
        start_values: runs.iter().map(|r| r.2).collect(),
    })
}

/// Simplex descent on the unit box; trial points are projected onto the box.
/// Returns the best vertex and its value.
fn nelder_mead<F: Fn(&[f64]) -> f64>(f: &F, start: &[f64], max_evals: usize) -> (Vec<f64>, f64) {
    const REFLECT: f64 = 1.0;
    const EXPAND: f64 = 2.0;
    const CONTRACT: f64 = 0.5;
    const SHRINK: f64 = 0.5;
    let dim = start.len();
    let project = |x: Vec<f64>| x.into_iter().map(|v| v.clamp(0.0, 1.0)).collect::<Vec<f64>>();

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((start.to_vec(), f(start)));
    for j in 0..dim {
        let mut x = start.to_vec();
        x[j] += if x[j] > 0.5 { -0.1 } else { 0.1 };
        let fx = f(&x);
        simplex.push((x, fx));
    }
    let mut evals = dim + 1;

    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (f_best, f_worst) = (simplex[0].1, simplex[dim].1);
        let size = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if (f_worst - f_best).abs() <= 1e-14 * (1.0 + f_best.abs()) && size < 1e-10 {
            break;
        }
        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|(x, _)| x[j]).sum::<f64>() / dim as f64)
            .collect();
        let along = |t: f64| {
            project(
                centroid
                    .iter()
                    .zip(&simplex[dim].0)
                    .map(|(c, w)| c + t * (c - w))
                    .collect(),
            )
        };

        let xr = along(REFLECT);
        let fr = f(&xr);
        evals += 1;
        if fr < simplex[0].1 {
            let xe = along(EXPAND);
            let fe = f(&xe);
            evals += 1;
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < f_worst {
            let x = along(CONTRACT);
            let v = f(&x);
            (x, v)
        } else {
            let x = along(-CONTRACT);
            let v = f(&x);
            (x, v)
        };
        evals += 1;
        if fc < fr.min(f_worst) {
            simplex[dim] = (xc, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = best
                .iter()
                .zip(&vertex.0)
                .map(|(b, v)| b + SHRINK * (v - b))
                .collect();
            vertex.1 = f(&x);
            vertex.0 = x;
        }
        evals += dim;
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

/// The fitted ODE as a rollout model. It is noise free, so one replicate
/// gives the exact reward of every schedule.
pub struct DeterministicRollout {
    pub theta: DeterministicTheta,
    pub rho0: f64,
    pub dt: f64,
    pub dt_fine: f64,
}

impl RolloutModel for DeterministicRollout {
    type Env = ProcessState;

    fn start(&self, _stream: Stream) -> ProcessState {
        ProcessState::initial(self.rho0)
    }

    fn apply(&self, env: &mut ProcessState, intervention: Intervention) {
        *env = intervention.apply(*env);
    }

    fn advance(&self, env: &mut ProcessState) {
        let hour = (env.step - 1) as f64 * self.dt;
        let (r, i) = integrate(&self.theta, hour, env.rho, env.inhibitor, self.dt, self.dt_fine);
        *env = ProcessState {
            rho: r,
            inhibitor: i,
            step: env.step + 1,
            hour: hour + self.dt,
        };
    }

    fn densities(&self, env: &ProcessState) -> (f64, f64) {
        (env.rho, self.rho0)
    }
}

/// Every schedule ranked by its reward under the fitted ODE started at
/// `rho0`. The first entry is the chosen schedule.
pub fn ls_rank(theta: &DeterministicTheta, problem: &DecisionProblem, rho0: f64) -> Result<Vec<ScheduleResult>> {
    let model = DeterministicRollout {
        theta: *theta,
        rho0,
        dt: problem.dt,
        dt_fine: DECIDE_DT_FINE,
    };
    enumerate_open_loop(problem, &model, 1, Stream::new(0))
}

/// Best schedule under the fitted ODE, as interventions per decision epoch.
pub fn ls_decide(
    theta: &DeterministicTheta,
    problem: &DecisionProblem,
    rho0: f64,
) -> Result<(ScheduleResult, Vec<Option<Intervention>>)> {
    let best = ls_rank(theta, problem, rho0)?.swap_remove(0);
    let schedule = problem.schedules().swap_remove(best.index);
    Ok((best, problem.interventions(&schedule)))
}
