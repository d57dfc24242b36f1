//! Two-phase erythroblast kinetics and the discretized hybrid transition.
//!
//! The mechanistic part is the inhibitor-limited growth model
//!
//! ```text
//! dρ/dt = r_g ρ (1 - 1 / (1 + exp(k_s (k_c - I))))
//! dI/dt = dρ/dt - r_d I
//! ```
//!
//! which the hybrid model discretizes with the observation interval Δt and
//! augments with Gaussian residuals on both states.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Culture state: observable density and latent inhibitor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcessState {
    /// Cell density, 10^6 cells/mL.
    pub rho: f64,
    /// Inhibitor concentration.
    pub inhibitor: f64,
    /// 1-based decision epoch.
    pub step: usize,
    /// Elapsed culture time in hours.
    pub hour: f64,
}

impl ProcessState {
    pub fn initial(rho: f64) -> Self {
        ProcessState {
            rho,
            inhibitor: 0.0,
            step: 1,
            hour: 0.0,
        }
    }

    pub fn with_values(self, rho: f64, inhibitor: f64) -> Self {
        ProcessState {
            rho,
            inhibitor,
            ..self
        }
    }

    /// The same values one epoch later.
    pub(crate) fn advanced(self, rho: f64, inhibitor: f64, dt: f64) -> Self {
        ProcessState {
            rho,
            inhibitor,
            step: self.step + 1,
            hour: self.step as f64 * dt,
        }
    }
}

/// Kinetic and residual parameters of one culture phase.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseParams {
    pub mu_g: f64,
    pub sigma_g: f64,
    pub k_s: f64,
    pub k_c: f64,
    pub r_d: f64,
    pub v_rho: f64,
    pub v_i: f64,
}

impl PhaseParams {
    pub const FIELDS: [&'static str; 7] = ["mu_g", "sigma_g", "k_s", "k_c", "r_d", "v_rho", "v_i"];

    pub fn to_array(&self) -> [f64; 7] {
        [
            self.mu_g,
            self.sigma_g,
            self.k_s,
            self.k_c,
            self.r_d,
            self.v_rho,
            self.v_i,
        ]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        PhaseParams {
            mu_g: v[0],
            sigma_g: v[1],
            k_s: v[2],
            k_c: v[3],
            r_d: v[4],
            v_rho: v[5],
            v_i: v[6],
        }
    }

    pub fn is_valid(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite() && *x >= 0.0)
    }
}

/// Full parameter set of the two-phase hybrid model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelTheta {
    /// Growth phase first, stationary phase second.
    pub phases: [PhaseParams; 2],
    /// Hour at which the stationary phase begins.
    pub t_star: f64,
}

impl ModelTheta {
    /// Number of free parameters (t_star is fixed, not inferred).
    pub const DIM: usize = 14;

    /// Ground-truth values of the erythroblast case study, with the given
    /// batch-to-batch std on the growth rate and no residual noise.
    pub fn case_study(sigma_g: f64) -> Self {
        let phase = |mu_g| PhaseParams {
            mu_g,
            sigma_g,
            k_s: 3.4,
            k_c: 2.6,
            r_d: 0.005,
            v_rho: 0.0,
            v_i: 0.0,
        };
        ModelTheta {
            phases: [phase(0.057), phase(0.0285)],
            t_star: 18.0,
        }
    }

    pub fn phase_at(&self, hour: f64) -> &PhaseParams {
        &self.phases[phase_of(hour, self.t_star) - 1]
    }

    /// Flattened `[phase1 fields.., phase2 fields..]`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.phases.iter().flat_map(|p| p.to_array()).collect()
    }

    pub fn from_flat(v: &[f64], t_star: f64) -> Self {
        assert_eq!(v.len(), Self::DIM, "flat theta must have {} entries", Self::DIM);
        ModelTheta {
            phases: [PhaseParams::from_slice(&v[..7]), PhaseParams::from_slice(&v[7..])],
            t_star,
        }
    }

    pub fn param_names() -> Vec<String> {
        (1..=2)
            .flat_map(|p| PhaseParams::FIELDS.iter().map(move |f| format!("{f}_{p}")))
            .collect()
    }

    /// Mean growth rates, i.e. the batch effect switched off.
    pub fn mean_rates(&self) -> GrowthRates {
        GrowthRates([self.phases[0].mu_g, self.phases[1].mu_g])
    }

    /// Draws one batch's growth rates `r_g,p ~ N(mu_g,p, sigma_g,p^2)`.
    pub fn draw_rates<R: Rng + ?Sized>(&self, rng: &mut R) -> GrowthRates {
        let mut r = [0.0; 2];
        for (slot, p) in r.iter_mut().zip(&self.phases) {
            let z: f64 = rng.sample(StandardNormal);
            *slot = p.mu_g + p.sigma_g * z;
        }
        GrowthRates(r)
    }

    pub fn is_valid(&self) -> bool {
        self.phases.iter().all(PhaseParams::is_valid) && self.t_star.is_finite() && self.t_star > 0.0
    }
}

/// Realized growth rate of a batch in each phase.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthRates(pub [f64; 2]);

impl GrowthRates {
    pub fn at(&self, hour: f64, t_star: f64) -> f64 {
        self.0[phase_of(hour, t_star) - 1]
    }
}

/// Instantaneous state change applied at a decision epoch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Intervention {
    /// Full medium exchange: inhibitor reset to zero.
    Exchange,
    /// Transfer into an `factor`-times larger vessel of fresh medium.
    Expand { factor: f64 },
}

impl Intervention {
    pub fn apply(&self, state: ProcessState) -> ProcessState {
        match *self {
            Intervention::Exchange => state.with_values(state.rho, 0.0),
            Intervention::Expand { factor } => {
                state.with_values(state.rho / factor, state.inhibitor / factor)
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            Intervention::Exchange => "exchange".to_string(),
            Intervention::Expand { factor } => format!("expand:{factor}"),
        }
    }

    pub fn parse(s: &str) -> Option<Option<Intervention>> {
        match s.trim() {
            "" | "none" => Some(None),
            "exchange" => Some(Some(Intervention::Exchange)),
            other => {
                let factor = other.strip_prefix("expand:")?.parse::<f64>().ok()?;
                (factor > 0.0).then_some(Some(Intervention::Expand { factor }))
            }
        }
    }
}

/// Phase index (1 = growth, 2 = stationary). The switch hour itself belongs
/// to the stationary phase.
#[inline]
pub fn phase_of(hour: f64, t_star: f64) -> usize {
    if hour < t_star {
        1
    } else {
        2
    }
}

/// Inhibitor-limited growth rate dρ/dt.
#[inline]
pub fn growth_rate_term(rho: f64, inhibitor: f64, r_g: f64, k_s: f64, k_c: f64) -> f64 {
    r_g * rho * uninhibited_fraction(inhibitor, k_s, k_c)
}

/// `1 - 1/(1 + e^x)` with `x = k_s (k_c - I)`, saturated for |x| > 700.
#[inline]
pub fn uninhibited_fraction(inhibitor: f64, k_s: f64, k_c: f64) -> f64 {
    let x = k_s * (k_c - inhibitor);
    if x > 700.0 {
        1.0
    } else if x < -700.0 {
        0.0
    } else {
        // e^x / (1 + e^x), written to stay accurate for large |x|
        1.0 / (1.0 + (-x).exp())
    }
}

/// dI/dt given the current growth rate.
#[inline]
pub fn inhibitor_term(drho_dt: f64, inhibitor: f64, r_d: f64) -> f64 {
    drho_dt - r_d * inhibitor
}

/// Noiseless hybrid update over one interval `dt`:
/// `ρ' = ρ + dt·g(ρ, I)`, `I' = I + (ρ' - ρ) - dt·r_d·I`.
pub fn hybrid_step_mean(
    state: &ProcessState,
    theta: &ModelTheta,
    rates: &GrowthRates,
    dt: f64,
) -> ProcessState {
    let p = theta.phase_at(state.hour);
    let r_g = rates.at(state.hour, theta.t_star);
    let rho = state.rho + dt * growth_rate_term(state.rho, state.inhibitor, r_g, p.k_s, p.k_c);
    let inhibitor = state.inhibitor + (rho - state.rho) - dt * p.r_d * state.inhibitor;
    state.advanced(rho, inhibitor, dt)
}

/// Hybrid update with Gaussian residuals `e_ρ ~ N(0, v_ρ²)`, `e_I ~ N(0, v_I²)`.
///
/// The inhibitor increment uses the realized (noisy) density change, so the
/// density residual propagates into the inhibitor. Both states are clamped at
/// zero.
pub fn hybrid_step_sample<R: Rng + ?Sized>(
    state: &ProcessState,
    theta: &ModelTheta,
    rates: &GrowthRates,
    dt: f64,
    rng: &mut R,
) -> ProcessState {
    let p = theta.phase_at(state.hour);
    let r_g = rates.at(state.hour, theta.t_star);
    let e_rho: f64 = rng.sample::<f64, _>(StandardNormal) * p.v_rho;
    let e_i: f64 = rng.sample::<f64, _>(StandardNormal) * p.v_i;
    let drift = dt * growth_rate_term(state.rho, state.inhibitor, r_g, p.k_s, p.k_c);
    let rho = (state.rho + drift + e_rho).max(0.0);
    let inhibitor =
        (state.inhibitor + (rho - state.rho) - dt * p.r_d * state.inhibitor + e_i).max(0.0);
    state.advanced(rho, inhibitor, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    const GROWTH_ORACLE: f64 = 0.170_975_238_896_288_31;

    #[test]
    fn growth_term_examples() {
        let v = growth_rate_term(3.0, 0.0, 0.057, 3.4, 2.6);
        assert!((v - GROWTH_ORACLE).abs() < 1e-15);
        let half = growth_rate_term(3.0, 2.6, 0.057, 3.4, 2.6);
        assert!((half - 0.0855).abs() < 1e-15);
        assert_eq!(growth_rate_term(0.0, 1.3, 0.057, 3.4, 2.6), 0.0);
    }

    #[test]
    fn growth_term_saturates() {
        assert_eq!(uninhibited_fraction(-1e6, 3.4, 2.6), 1.0);
        assert_eq!(uninhibited_fraction(1e6, 3.4, 2.6), 0.0);
        assert!(growth_rate_term(2.0, 1e9, 0.05, 5.0, 1.0).is_finite());
    }

    #[test]
    fn low_inhibitor_is_nearly_exponential() {
        let (k_s, k_c) = (3.4, 5.0);
        for i in 0..50 {
            let inhibitor = (k_c - 10.0 / k_s) * i as f64 / 50.0;
            assert!(uninhibited_fraction(inhibitor, k_s, k_c) > 0.9999);
        }
    }

    #[test]
    fn inhibitor_term_examples() {
        assert_eq!(inhibitor_term(0.171, 0.0, 0.005), 0.171);
        assert!((inhibitor_term(0.0, 2.0, 0.005) + 0.01).abs() < 1e-15);
        assert!((inhibitor_term(0.5129, 1.0, 0.005) - 0.5079).abs() < 1e-12);
    }

    #[test]
    fn phase_boundaries() {
        assert_eq!(phase_of(0.0, 18.0), 1);
        assert_eq!(phase_of(18.0, 18.0), 2);
        assert_eq!(phase_of(30.0, 18.0), 2);
    }

    #[test]
    fn one_step_mean_matches_oracle() {
        let theta = ModelTheta::case_study(0.0);
        let s = hybrid_step_mean(&ProcessState::initial(3.0), &theta, &theta.mean_rates(), 3.0);
        assert!((s.rho - 3.512_925_716_688_864_9).abs() < 1e-12);
        assert!((s.inhibitor - 0.512_925_716_688_864_9).abs() < 1e-12);
        assert_eq!(s.step, 2);
        assert_eq!(s.hour, 3.0);
    }

    #[test]
    fn empty_culture_absorbs() {
        let theta = ModelTheta::case_study(0.0);
        let s = hybrid_step_mean(&ProcessState::initial(0.0), &theta, &theta.mean_rates(), 3.0);
        assert_eq!((s.rho, s.inhibitor), (0.0, 0.0));
    }

    #[test]
    fn zero_growth_only_decays() {
        let theta = ModelTheta::case_study(0.0);
        let start = ProcessState::initial(4.0).with_values(4.0, 2.0);
        let s = hybrid_step_mean(&start, &theta, &GrowthRates([0.0, 0.0]), 3.0);
        assert_eq!(s.rho, 4.0);
        assert!((s.inhibitor - 2.0 * (1.0 - 3.0 * 0.005)).abs() < 1e-15);
    }

    #[test]
    fn zero_residuals_reduce_to_mean() {
        let theta = ModelTheta::case_study(0.0);
        let rates = theta.mean_rates();
        let mut rng = Stream::new(1).rng();
        let mut s = ProcessState::initial(3.0);
        for _ in 0..10 {
            let a = hybrid_step_sample(&s, &theta, &rates, 3.0, &mut rng);
            let b = hybrid_step_mean(&s, &theta, &rates, 3.0);
            assert_eq!(a, b);
            s = b;
        }
    }

    #[test]
    fn sample_is_seed_deterministic() {
        let mut theta = ModelTheta::case_study(0.0);
        theta.phases[0].v_rho = 0.1;
        theta.phases[0].v_i = 0.05;
        let rates = theta.mean_rates();
        let s = ProcessState::initial(3.0);
        let a = hybrid_step_sample(&s, &theta, &rates, 3.0, &mut Stream::new(9).rng());
        let b = hybrid_step_sample(&s, &theta, &rates, 3.0, &mut Stream::new(9).rng());
        assert_eq!(a, b);
    }

    #[test]
    fn sample_mean_matches_step_mean() {
        let mut theta = ModelTheta::case_study(0.0);
        theta.phases[0].v_rho = 0.1;
        theta.phases[0].v_i = 0.1;
        let rates = theta.mean_rates();
        let s = ProcessState::initial(3.0);
        let mean = hybrid_step_mean(&s, &theta, &rates, 3.0);
        let n = 100_000;
        let mut rng = Stream::new(5).rng();
        let (mut sr, mut si) = (0.0, 0.0);
        for _ in 0..n {
            let x = hybrid_step_sample(&s, &theta, &rates, 3.0, &mut rng);
            sr += x.rho;
            si += x.inhibitor;
        }
        let (mr, mi) = (sr / n as f64, si / n as f64);
        // inhibitor carries both residuals: var = 0.1² + 0.1²
        let se_rho = 0.1 / (n as f64).sqrt();
        let se_i = (0.02f64).sqrt() / (n as f64).sqrt();
        assert!((mr - mean.rho).abs() < 3.0 * se_rho, "{mr} vs {}", mean.rho);
        assert!((mi - mean.inhibitor).abs() < 3.0 * se_i, "{mi} vs {}", mean.inhibitor);
    }

    #[test]
    fn interventions() {
        let s = ProcessState::initial(5.0).with_values(5.0, 2.0);
        let e = Intervention::Exchange.apply(s);
        assert_eq!((e.rho, e.inhibitor), (5.0, 0.0));
        let s = s.with_values(8.0, 2.0);
        let x = Intervention::Expand { factor: 4.0 }.apply(s);
        assert_eq!((x.rho, x.inhibitor), (2.0, 0.5));
        assert_eq!(Intervention::parse("expand:4"), Some(Some(Intervention::Expand { factor: 4.0 })));
        assert_eq!(Intervention::parse("none"), Some(None));
        assert_eq!(Intervention::parse("bogus"), None);
    }

    #[test]
    fn flat_roundtrip_and_names() {
        let theta = ModelTheta::case_study(0.008);
        let flat = theta.to_flat();
        assert_eq!(flat.len(), ModelTheta::DIM);
        assert_eq!(ModelTheta::from_flat(&flat, 18.0), theta);
        let names = ModelTheta::param_names();
        assert_eq!(names[0], "mu_g_1");
        assert_eq!(names[13], "v_i_2");
    }
}
