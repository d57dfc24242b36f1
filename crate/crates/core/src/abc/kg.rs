//! Adaptor between the sampler and the two-phase culture model.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::smc::{trajectory_distance, PosteriorEnsemble, Simulator};
use crate::error::{Error, Result};
use crate::model::{
    hybrid_step_mean, simulate_hybrid_densities, simulate_hybrid_trajectory, Intervention,
    ModelTheta, ProcessState, Trajectory,
};
use crate::rng::SimRng;

/// Scores hybrid-model parameters against a set of observed batches.
///
/// Each simulated batch starts from the first measured density of the batch
/// it is compared with and follows the same interventions. Only densities
/// enter the distance.
#[derive(Clone, Debug)]
pub struct KgSimulator {
    observed: Vec<Vec<f64>>,
    interventions: Vec<Vec<Option<Intervention>>>,
    t_star: f64,
    dt: f64,
}

impl KgSimulator {
    pub fn new(dataset: &[Trajectory], t_star: f64) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for t in dataset {
            t.validate()?;
            if t.len() < 2 {
                return Err(Error::InvalidConfig("trajectories need at least two points".into()));
            }
        }
        let dt = dataset[0].hours[1] - dataset[0].hours[0];
        Ok(KgSimulator {
            observed: dataset.iter().map(|t| t.rho_obs.clone()).collect(),
            interventions: dataset.iter().map(|t| t.interventions.clone()).collect(),
            t_star,
            dt,
        })
    }

    pub fn theta(&self, params: &[f64]) -> ModelTheta {
        ModelTheta::from_flat(params, self.t_star)
    }

    fn distances_theta(&self, theta: &ModelTheta, replications: usize, rng: &mut SimRng) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.observed.len() * replications);
        for (obs, plan) in self.observed.iter().zip(&self.interventions) {
            let mut buf = vec![0.0; obs.len()];
            for _ in 0..replications {
                simulate_hybrid_densities(theta, obs[0], self.dt, plan, &mut buf, rng);
                out.push(trajectory_distance(obs, &buf)?);
            }
        }
        Ok(out)
    }
}

impl Simulator for KgSimulator {
    fn distances(&self, params: &[f64], replications: usize, rng: &mut SimRng) -> Result<Vec<f64>> {
        self.distances_theta(&self.theta(params), replications, rng)
    }
}

/// Average distance between the dataset and `replications` simulated
/// copies of every batch under `theta`.
pub fn mean_distance(
    theta: &ModelTheta,
    dataset: &[Trajectory],
    replications: usize,
    rng: &mut SimRng,
) -> Result<f64> {
    let sim = KgSimulator::new(dataset, theta.t_star)?;
    let d = sim.distances_theta(theta, replications, rng)?;
    Ok(d.iter().sum::<f64>() / d.len() as f64)
}

/// Normalized weighted set of model parameters, ready for sampling.
#[derive(Clone, Debug)]
pub struct WeightedThetas {
    thetas: Vec<ModelTheta>,
    weights: Vec<f64>,
    picker: WeightedIndex<f64>,
}

impl WeightedThetas {
    pub fn new(thetas: Vec<ModelTheta>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if thetas.is_empty() || thetas.len() != weights.len() || !(total > 0.0 && total.is_finite()) {
            return Err(Error::ZeroWeights(0));
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let picker = WeightedIndex::new(&weights).map_err(|_| Error::ZeroWeights(0))?;
        Ok(WeightedThetas {
            thetas,
            weights,
            picker,
        })
    }

    pub fn single(theta: ModelTheta) -> Self {
        Self::new(vec![theta], vec![1.0]).expect("one unit weight")
    }

    pub fn from_ensemble(ensemble: &PosteriorEnsemble, t_star: f64) -> Result<Self> {
        if ensemble.param_names.len() != ModelTheta::DIM {
            return Err(Error::InvalidConfig(format!(
                "ensemble has {} parameters, the culture model needs {}",
                ensemble.param_names.len(),
                ModelTheta::DIM
            )));
        }
        let thetas = ensemble
            .particles
            .iter()
            .map(|p| ModelTheta::from_flat(&p.params, t_star))
            .collect();
        Self::new(thetas, ensemble.weights())
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn thetas(&self) -> &[ModelTheta] {
        &self.thetas
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &ModelTheta {
        &self.thetas[self.picker.sample(rng)]
    }

    /// Posterior-weighted noiseless transition at each particle's mean
    /// growth rates.
    pub fn expected_step(&self, state: &ProcessState, dt: f64) -> ProcessState {
        let mut rho = 0.0;
        let mut inhibitor = 0.0;
        let mut next = *state;
        for (theta, w) in self.thetas.iter().zip(&self.weights) {
            next = hybrid_step_mean(state, theta, &theta.mean_rates(), dt);
            rho += w * next.rho;
            inhibitor += w * next.inhibitor;
        }
        next.with_values(rho.max(0.0), inhibitor.max(0.0))
    }
}

/// Per-horizon summary of a predictive distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictiveSummary {
    pub hours: Vec<f64>,
    pub rho_mean: Vec<f64>,
    pub rho_var: Vec<f64>,
    pub rho_lo: Vec<f64>,
    pub rho_hi: Vec<f64>,
    pub inhibitor_mean: Vec<f64>,
    pub inhibitor_var: Vec<f64>,
    pub inhibitor_lo: Vec<f64>,
    pub inhibitor_hi: Vec<f64>,
}

/// Lower empirical quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let k = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[k - 1]
}

fn summarize(samples: &mut [f64]) -> (f64, f64, f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    samples.sort_by(f64::total_cmp);
    (mean, var, quantile(samples, 0.025), quantile(samples, 0.975))
}

/// Posterior predictive of `h_steps` intervals ahead from density `rho0`
/// with no inhibitor: each of `n_mc` runs draws θ by weight and simulates
/// one hybrid batch. Bands are 2.5% and 97.5% quantiles.
pub fn posterior_predict(
    thetas: &WeightedThetas,
    rho0: f64,
    h_steps: usize,
    n_mc: usize,
    dt: f64,
    interventions: &[Option<Intervention>],
    rng: &mut SimRng,
) -> PredictiveSummary {
    let n_mc = n_mc.max(1);
    let mut rho = vec![Vec::with_capacity(n_mc); h_steps + 1];
    let mut inh = vec![Vec::with_capacity(n_mc); h_steps + 1];
    for _ in 0..n_mc {
        let theta = thetas.sample(rng);
        let t = simulate_hybrid_trajectory(theta, rho0, h_steps, dt, interventions, rng);
        let latent = t.inhibitor_true.as_ref().expect("hybrid records the inhibitor");
        for k in 0..=h_steps {
            rho[k].push(t.rho_obs[k]);
            inh[k].push(latent[k]);
        }
    }
    let mut s = PredictiveSummary {
        hours: (0..=h_steps).map(|k| k as f64 * dt).collect(),
        rho_mean: vec![],
        rho_var: vec![],
        rho_lo: vec![],
        rho_hi: vec![],
        inhibitor_mean: vec![],
        inhibitor_var: vec![],
        inhibitor_lo: vec![],
        inhibitor_hi: vec![],
    };
    for k in 0..=h_steps {
        let (m, v, lo, hi) = summarize(&mut rho[k]);
        s.rho_mean.push(m);
        s.rho_var.push(v);
        s.rho_lo.push(lo);
        s.rho_hi.push(hi);
        let (m, v, lo, hi) = summarize(&mut inh[k]);
        s.inhibitor_mean.push(m);
        s.inhibitor_var.push(v);
        s.inhibitor_lo.push(lo);
        s.inhibitor_hi.push(hi);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{simulate_ground_truth, GroundTruthConfig};
    use crate::rng::Stream;

    fn dataset(m: usize, seed: u64) -> Vec<Trajectory> {
        let cfg = GroundTruthConfig::case_study(0.008, 0.01);
        let mut rng = Stream::new(seed).rng();
        (0..m)
            .map(|_| simulate_ground_truth(&cfg, 30.0, &[], &mut rng).observed_only())
            .collect()
    }

    #[test]
    fn exact_noiseless_fit_has_zero_distance() {
        let theta = ModelTheta::case_study(0.0);
        let mut rng = Stream::new(1).rng();
        let data = vec![simulate_hybrid_trajectory(&theta, 3.0, 10, 3.0, &[], &mut rng).observed_only()];
        assert_eq!(mean_distance(&theta, &data, 4, &mut rng).unwrap(), 0.0);
    }

    #[test]
    fn single_pair_reduces_to_distance() {
        let theta = ModelTheta::case_study(0.01);
        let data = dataset(1, 3);
        let q = mean_distance(&theta, &data, 1, &mut Stream::new(8).rng()).unwrap();
        let mut buf = vec![0.0; 11];
        simulate_hybrid_densities(&theta, data[0].rho_obs[0], 3.0, &[], &mut buf, &mut Stream::new(8).rng());
        assert_eq!(q, trajectory_distance(&data[0].rho_obs, &buf).unwrap());
    }

    #[test]
    fn truth_is_closer_than_prior_corner() {
        let truth = ModelTheta::case_study(0.008);
        let corner = ModelTheta::from_flat(
            &[0.2, 0.05, 5.0, 5.0, 0.05, 0.2, 0.2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            18.0,
        );
        let mut wins = 0;
        for seed in 0..20 {
            let data = dataset(20, 100 + seed);
            let mut rng = Stream::new(seed).rng();
            let a = mean_distance(&truth, &data, 20, &mut rng).unwrap();
            let b = mean_distance(&corner, &data, 20, &mut rng).unwrap();
            wins += usize::from(a < b);
        }
        assert!(wins >= 19, "{wins}");
    }

    #[test]
    fn empty_dataset_is_error() {
        assert!(matches!(KgSimulator::new(&[], 18.0), Err(Error::EmptyDataset)));
    }

    #[test]
    fn predictive_examples() {
        let single = WeightedThetas::single(ModelTheta::case_study(0.0));
        let mut rng = Stream::new(2).rng();
        let s = posterior_predict(&single, 3.0, 10, 50, 3.0, &[], &mut rng);
        let mut state = ProcessState::initial(3.0);
        for k in 0..=10 {
            assert!((s.rho_mean[k] - state.rho).abs() < 1e-12);
            assert!(s.rho_var[k] < 1e-24);
            state = hybrid_step_mean(&state, &ModelTheta::case_study(0.0), &ModelTheta::case_study(0.0).mean_rates(), 3.0);
        }
        let s0 = posterior_predict(&single, 2.5, 0, 10, 3.0, &[], &mut rng);
        assert_eq!(s0.rho_mean, vec![2.5]);
        assert_eq!(s0.inhibitor_mean, vec![0.0]);

        let mut noisy = ModelTheta::case_study(0.008);
        for p in &mut noisy.phases {
            p.v_rho = 0.05;
            p.v_i = 0.05;
        }
        let s = posterior_predict(&WeightedThetas::single(noisy), 3.0, 10, 2000, 3.0, &[], &mut rng);
        assert!(s.rho_var[10] >= s.rho_var[1]);
        assert!(s.rho_lo[10] <= s.rho_mean[10] && s.rho_mean[10] <= s.rho_hi[10]);
    }

    #[test]
    fn expected_step_of_single_particle_is_mean_step() {
        let theta = ModelTheta::case_study(0.008);
        let w = WeightedThetas::single(theta);
        let s = ProcessState::initial(3.0);
        assert_eq!(w.expected_step(&s, 3.0), hybrid_step_mean(&s, &theta, &theta.mean_rates(), 3.0));
    }
}
