//! Ground-truth culture simulator.
//!
//! Euler–Maruyama integration of the two-phase SDE
//!
//! ```text
//! dρ = g(ρ, I) dt + σ_n dW₁
//! dI = dρ − r_d I dt + σ_n dW₂
//! ```
//!
//! with random initial density, a per-batch growth-rate effect, and Gaussian
//! measurement error on recorded densities only.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::kinetics::{growth_rate_term, GrowthRates, Intervention, ModelTheta, ProcessState};
use super::trajectory::Trajectory;
use crate::error::{Error, Result};
use crate::rng::Stream;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthConfig {
    /// Kinetics; `sigma_g` is the batch effect std, `v_rho`/`v_i` are ignored.
    pub theta: ModelTheta,
    pub sigma_n: f64,
    pub sigma_m: f64,
    pub mu_rho0: f64,
    pub sigma_rho0: f64,
    pub dt_sde: f64,
    pub dt_obs: f64,
}

impl Default for GroundTruthConfig {
    fn default() -> Self {
        Self::case_study(0.008, 0.01)
    }
}

impl GroundTruthConfig {
    pub fn case_study(sigma_g: f64, sigma_n: f64) -> Self {
        GroundTruthConfig {
            theta: ModelTheta::case_study(sigma_g),
            sigma_n,
            sigma_m: 0.2,
            mu_rho0: 3.0,
            sigma_rho0: 0.03,
            dt_sde: 0.01,
            dt_obs: 3.0,
        }
    }

    /// All randomness switched off.
    pub fn noiseless(mut self) -> Self {
        self.sigma_n = 0.0;
        self.sigma_m = 0.0;
        self.sigma_rho0 = 0.0;
        for p in &mut self.theta.phases {
            p.sigma_g = 0.0;
        }
        self
    }

    pub fn substeps(&self) -> usize {
        (self.dt_obs / self.dt_sde).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.substeps();
        if !(self.dt_sde > 0.0 && self.dt_obs > 0.0) || n == 0 {
            return Err(Error::InvalidConfig("dt_sde and dt_obs must be positive".into()));
        }
        if (n as f64 * self.dt_sde - self.dt_obs).abs() > 1e-9 * self.dt_obs {
            return Err(Error::InvalidConfig(format!(
                "dt_sde = {} does not divide dt_obs = {}",
                self.dt_sde, self.dt_obs
            )));
        }
        let stds = [self.sigma_n, self.sigma_m, self.sigma_rho0];
        if stds.iter().any(|s| !(s.is_finite() && *s >= 0.0)) || !self.theta.is_valid() {
            return Err(Error::InvalidConfig("ground-truth stds and kinetics must be finite and >= 0".into()));
        }
        Ok(())
    }
}

const MEASUREMENT_OFFSET: u64 = 1 << 32;

/// One running batch of the ground-truth process.
///
/// Randomness is keyed by `(batch stream, interval index)`, so two copies of
/// the same batch that take different actions still see the same Wiener
/// increments on every interval. Open-loop enumeration relies on this.
#[derive(Clone, Debug)]
pub struct TruthProcess {
    config: GroundTruthConfig,
    stream: Stream,
    rates: GrowthRates,
    state: ProcessState,
}

impl TruthProcess {
    pub fn new(config: GroundTruthConfig, stream: Stream) -> Self {
        let mut rng = stream.child(0).rng();
        let z: f64 = rng.sample(StandardNormal);
        let rho0 = (config.mu_rho0 + config.sigma_rho0 * z).max(0.0);
        let rates = config.theta.draw_rates(&mut rng);
        TruthProcess {
            config,
            stream,
            rates,
            state: ProcessState::initial(rho0),
        }
    }

    pub fn config(&self) -> &GroundTruthConfig {
        &self.config
    }

    /// Latent state.
    pub fn state(&self) -> ProcessState {
        self.state
    }

    pub fn rates(&self) -> GrowthRates {
        self.rates
    }

    /// Measured density at the current epoch.
    pub fn observe(&self) -> f64 {
        if self.config.sigma_m == 0.0 {
            return self.state.rho;
        }
        let mut rng = self
            .stream
            .child(MEASUREMENT_OFFSET + self.state.step as u64)
            .rng();
        let z: f64 = rng.sample(StandardNormal);
        self.state.rho + self.config.sigma_m * z
    }

    pub fn apply(&mut self, intervention: Intervention) {
        self.state = intervention.apply(self.state);
    }

    /// Integrates one observation interval.
    pub fn advance(&mut self) {
        let mut rng = self.stream.child(self.state.step as u64).rng();
        let c = &self.config;
        let h = c.dt_sde;
        let sqrt_h = h.sqrt();
        let n = c.substeps();
        let start = self.state.hour;
        let (mut rho, mut inhibitor) = (self.state.rho, self.state.inhibitor);
        for j in 0..n {
            let hour = start + j as f64 * h;
            let p = c.theta.phase_at(hour);
            let r_g = self.rates.at(hour, c.theta.t_star);
            let drift = growth_rate_term(rho, inhibitor, r_g, p.k_s, p.k_c) * h;
            let (w1, w2) = if c.sigma_n > 0.0 {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                (a * sqrt_h * c.sigma_n, b * sqrt_h * c.sigma_n)
            } else {
                (0.0, 0.0)
            };
            let next_rho = (rho + drift + w1).max(0.0);
            inhibitor = (inhibitor + (next_rho - rho) - p.r_d * inhibitor * h + w2).max(0.0);
            rho = next_rho;
        }
        self.state = self.state.advanced(rho, inhibitor, c.dt_obs);
    }
}

/// Simulates one ground-truth batch over `horizon_hours`, recording every
/// `dt_obs`. An intervention at index `k` acts on the latent state at
/// observation `k`; the record at that index is the post-intervention state.
pub fn simulate_ground_truth<R: Rng + ?Sized>(
    config: &GroundTruthConfig,
    horizon_hours: f64,
    interventions: &[Option<Intervention>],
    rng: &mut R,
) -> Trajectory {
    let stream = Stream::new(rng.random());
    simulate_ground_truth_stream(config, horizon_hours, interventions, stream)
}

pub fn simulate_ground_truth_stream(
    config: &GroundTruthConfig,
    horizon_hours: f64,
    interventions: &[Option<Intervention>],
    stream: Stream,
) -> Trajectory {
    let steps = (horizon_hours / config.dt_obs).round() as usize;
    let mut process = TruthProcess::new(*config, stream);
    let n = steps + 1;
    let mut t = Trajectory {
        hours: Vec::with_capacity(n),
        rho_obs: Vec::with_capacity(n),
        inhibitor_true: Some(Vec::with_capacity(n)),
        rho_true: Some(Vec::with_capacity(n)),
        interventions: Vec::with_capacity(n),
        batch_growth_rates: Some(process.rates().0),
    };
    for k in 0..n {
        let action = if k < steps {
            interventions.get(k).copied().flatten()
        } else {
            None
        };
        if let Some(a) = action {
            process.apply(a);
        }
        let s = process.state();
        t.hours.push(s.hour);
        t.rho_obs.push(process.observe());
        t.inhibitor_true.as_mut().unwrap().push(s.inhibitor);
        t.rho_true.as_mut().unwrap().push(s.rho);
        t.interventions.push(action);
        if k < steps {
            process.advance();
        }
    }
    t
}
