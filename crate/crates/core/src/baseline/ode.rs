use serde::{Deserialize, Serialize};

use crate::abc::{Bounds, PriorSpec};
use crate::model::{growth_rate_term, Intervention, ModelTheta, PhaseParams, Trajectory};

/// Noise-free kinetics with phase-specific growth rates and inhibition
/// parameters shared by both phases.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeterministicTheta {
    pub mu_g: [f64; 2],
    pub k_s: f64,
    pub k_c: f64,
    pub r_d: f64,
    pub t_star: f64,
}

impl DeterministicTheta {
    pub const DIM: usize = 5;

    pub fn case_study() -> Self {
        Self::from_model(&ModelTheta::case_study(0.0))
    }

    /// Growth rates per phase and the phase-1 inhibition parameters.
    pub fn from_model(theta: &ModelTheta) -> Self {
        let p = &theta.phases[0];
        DeterministicTheta {
            mu_g: [p.mu_g, theta.phases[1].mu_g],
            k_s: p.k_s,
            k_c: p.k_c,
            r_d: p.r_d,
            t_star: theta.t_star,
        }
    }

    /// Same schema as the hybrid parameters, with every noise term zero.
    pub fn to_model(&self) -> ModelTheta {
        let phase = |mu_g| PhaseParams {
            mu_g,
            sigma_g: 0.0,
            k_s: self.k_s,
            k_c: self.k_c,
            r_d: self.r_d,
            v_rho: 0.0,
            v_i: 0.0,
        };
        ModelTheta {
            phases: [phase(self.mu_g[0]), phase(self.mu_g[1])],
            t_star: self.t_star,
        }
    }

    pub fn to_vec(&self) -> [f64; 5] {
        [self.mu_g[0], self.mu_g[1], self.k_s, self.k_c, self.r_d]
    }

    pub fn from_vec(v: &[f64], t_star: f64) -> Self {
        DeterministicTheta {
            mu_g: [v[0], v[1]],
            k_s: v[2],
            k_c: v[3],
            r_d: v[4],
            t_star,
        }
    }

    /// Fit box taken from the hybrid prior.
    pub fn default_bounds() -> Vec<Bounds> {
        let prior = PriorSpec::kinetic_default();
        [0, 7, 2, 3, 4].iter().map(|&i| prior.bounds[i]).collect()
    }

    fn rhs(&self, hour: f64, rho: f64, inhibitor: f64) -> (f64, f64) {
        let p = if hour < self.t_star { 0 } else { 1 };
        let d = growth_rate_term(rho, inhibitor, self.mu_g[p], self.k_s, self.k_c);
        (d, d - self.r_d * inhibitor)
    }
}

/// Classical RK4 from `hour` over `span` hours with step `dt_fine`. The
/// phase is fixed per sub-step by its start time.
pub fn integrate(
    theta: &DeterministicTheta,
    hour: f64,
    rho: f64,
    inhibitor: f64,
    span: f64,
    dt_fine: f64,
) -> (f64, f64) {
    let n = (span / dt_fine).round().max(1.0) as usize;
    let h = span / n as f64;
    let (mut y0, mut y1) = (rho, inhibitor);
    for i in 0..n {
        let t = hour + i as f64 * h;
        let f = |a: f64, b: f64| theta.rhs(t, a, b);
        let k1 = f(y0, y1);
        let k2 = f(y0 + 0.5 * h * k1.0, y1 + 0.5 * h * k1.1);
        let k3 = f(y0 + 0.5 * h * k2.0, y1 + 0.5 * h * k2.1);
        let k4 = f(y0 + h * k3.0, y1 + h * k3.1);
        y0 += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        y1 += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        y0 = y0.max(0.0);
        y1 = y1.max(0.0);
    }
    (y0, y1)
}

/// Deterministic trajectory observed every `dt_obs` hours up to
/// `horizon_hours`. Interventions act at observation times, as in the
/// stochastic simulators.
pub fn ode_solve(
    theta: &DeterministicTheta,
    rho0: f64,
    horizon_hours: f64,
    dt_obs: f64,
    dt_fine: f64,
    interventions: &[Option<Intervention>],
) -> Trajectory {
    let steps = (horizon_hours / dt_obs).round() as usize;
    let mut rho = Vec::with_capacity(steps + 1);
    let mut inh = Vec::with_capacity(steps + 1);
    let mut applied = Vec::with_capacity(steps + 1);
    let mut state = crate::model::ProcessState::initial(rho0);
    for k in 0..=steps {
        let action = if k < steps { interventions.get(k).copied().flatten() } else { None };
        if let Some(a) = action {
            state = a.apply(state);
        }
        rho.push(state.rho);
        inh.push(state.inhibitor);
        applied.push(action);
        if k < steps {
            let (r, i) = integrate(theta, k as f64 * dt_obs, state.rho, state.inhibitor, dt_obs, dt_fine);
            state = state.with_values(r, i);
        }
    }
    Trajectory {
        hours: (0..=steps).map(|k| k as f64 * dt_obs).collect(),
        rho_obs: rho.clone(),
        inhibitor_true: Some(inh),
        rho_true: Some(rho),
        interventions: applied,
        batch_growth_rates: None,
    }
}
