use rand::Rng;

use super::kinetics::{hybrid_step_sample, Intervention, ModelTheta, ProcessState};
use super::trajectory::Trajectory;

/// Simulates one batch of the hybrid model.
///
/// The growth rate of each phase is drawn once for the whole batch, then the
/// noisy hybrid update is iterated for `horizon_steps` intervals. An
/// intervention at index `k` is applied to the state at observation `k`
/// before the following interval. Returns `horizon_steps + 1` observations;
/// the latent inhibitor is kept in `inhibitor_true`.
pub fn simulate_hybrid_trajectory<R: Rng + ?Sized>(
    theta: &ModelTheta,
    rho0: f64,
    horizon_steps: usize,
    dt: f64,
    interventions: &[Option<Intervention>],
    rng: &mut R,
) -> Trajectory {
    let rates = theta.draw_rates(rng);
    let mut state = ProcessState::initial(rho0);
    let n = horizon_steps + 1;
    let mut rho = Vec::with_capacity(n);
    let mut inhibitor = Vec::with_capacity(n);
    let mut applied = Vec::with_capacity(n);
    for k in 0..n {
        let action = if k < horizon_steps {
            interventions.get(k).copied().flatten()
        } else {
            None
        };
        if let Some(a) = action {
            state = a.apply(state);
        }
        rho.push(state.rho);
        inhibitor.push(state.inhibitor);
        applied.push(action);
        if k < horizon_steps {
            state = hybrid_step_sample(&state, theta, &rates, dt, rng);
        }
    }
    Trajectory {
        hours: (0..n).map(|k| k as f64 * dt).collect(),
        rho_obs: rho.clone(),
        inhibitor_true: Some(inhibitor),
        rho_true: Some(rho),
        interventions: applied,
        batch_growth_rates: Some(rates.0),
    }
}

/// Density series only, without allocating the full record. Used in the
/// inner loop of inference.
pub fn simulate_hybrid_densities<R: Rng + ?Sized>(
    theta: &ModelTheta,
    rho0: f64,
    dt: f64,
    interventions: &[Option<Intervention>],
    out: &mut [f64],
    rng: &mut R,
) {
    let rates = theta.draw_rates(rng);
    let mut state = ProcessState::initial(rho0);
    let horizon = out.len() - 1;
    for k in 0..out.len() {
        if k < horizon {
            if let Some(a) = interventions.get(k).copied().flatten() {
                state = a.apply(state);
            }
        }
        out[k] = state.rho;
        if k < horizon {
            state = hybrid_step_sample(&state, theta, &rates, dt, rng);
        }
    }
}
