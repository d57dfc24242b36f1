use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::{GaussianKernel, KernelCovariance};
use super::prior::PriorSpec;
use crate::error::{Error, Result};
use crate::rng::{SimRng, Stream};

/// Anything that can simulate data sets for a parameter vector and score
/// them against the observations it holds.
pub trait Simulator: Sync {
    /// Distances `d(τ_i, τ*_ij)` for every observation `i` and each of
    /// `replications` simulated data sets `j`.
    fn distances(&self, params: &[f64], replications: usize, rng: &mut SimRng) -> Result<Vec<f64>>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AbcConfig {
    pub n_particles: usize,
    pub keep_ratio: f64,
    pub replications: usize,
    pub min_accept_rate: f64,
    pub max_generations: usize,
    /// Kernel covariance as a multiple of the weighted particle covariance.
    pub kernel_scale: f64,
    pub kernel_covariance: KernelCovariance,
}

impl Default for AbcConfig {
    fn default() -> Self {
        AbcConfig {
            n_particles: 200,
            keep_ratio: 0.5,
            replications: 20,
            min_accept_rate: 0.05,
            max_generations: 50,
            kernel_scale: 2.0,
            kernel_covariance: KernelCovariance::default(),
        }
    }
}

impl AbcConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.n_particles < 2 {
            return bad("abc.n_particles must be at least 2");
        }
        if !(self.keep_ratio > 0.0 && self.keep_ratio < 1.0) {
            return bad("abc.keep_ratio must lie in (0, 1)");
        }
        if self.kept() == 0 || self.kept() == self.n_particles {
            return bad("abc.keep_ratio keeps no particle or all of them");
        }
        if self.replications == 0 {
            return bad("abc.replications must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.min_accept_rate) {
            return bad("abc.min_accept_rate must lie in [0, 1]");
        }
        if self.max_generations == 0 {
            return bad("abc.max_generations must be at least 1");
        }
        if !(self.kernel_scale > 0.0) {
            return bad("abc.kernel_scale must be positive");
        }
        Ok(())
    }

    /// Particles carried between generations, `⌊αN⌋`.
    pub fn kept(&self) -> usize {
        (self.keep_ratio * self.n_particles as f64 + 1e-9).floor() as usize
    }

    /// 1-based rank of the order statistic used as tolerance, `⌈αN⌉`.
    fn quantile_rank(&self) -> usize {
        ((self.keep_ratio * self.n_particles as f64 - 1e-9).ceil() as usize).max(1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub params: Vec<f64>,
    pub weight: f64,
    pub distance: f64,
}

/// Summary of one sampler generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub tolerance: f64,
    /// Share of fresh proposals within the previous tolerance (1 for the
    /// prior generation).
    pub acceptance_rate: f64,
    pub posterior_mean: Vec<f64>,
}

/// Weighted particle approximation of a posterior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorEnsemble {
    pub param_names: Vec<String>,
    pub particles: Vec<Particle>,
    pub generation: usize,
    pub tolerance_history: Vec<f64>,
    pub generations: Vec<GenerationStats>,
}

impl PosteriorEnsemble {
    /// Builds an ensemble from given parameter vectors and raw weights.
    pub fn from_weighted(param_names: Vec<String>, points: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let total: f64 = points.iter().map(|p| p.1).sum();
        if points.is_empty() || !(total > 0.0 && total.is_finite()) {
            return Err(Error::ZeroWeights(0));
        }
        let particles = points
            .into_iter()
            .map(|(params, w)| Particle {
                params,
                weight: w / total,
                distance: 0.0,
            })
            .collect();
        Ok(PosteriorEnsemble {
            param_names,
            particles,
            generation: 0,
            tolerance_history: Vec::new(),
            generations: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.weight).collect()
    }

    pub fn weighted_mean(&self) -> Vec<f64> {
        weighted_mean(&self.particles)
    }

    pub fn weighted_variance(&self) -> Vec<f64> {
        let mean = self.weighted_mean();
        let total: f64 = self.particles.iter().map(|p| p.weight).sum();
        (0..mean.len())
            .map(|d| {
                self.particles
                    .iter()
                    .map(|p| p.weight * (p.params[d] - mean[d]).powi(2))
                    .sum::<f64>()
                    / total
            })
            .collect()
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.param_names.iter().position(|n| n == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let e: PosteriorEnsemble = serde_json::from_str(s)?;
        let total: f64 = e.particles.iter().map(|p| p.weight).sum();
        if e.particles.is_empty() || !(total > 0.0 && total.is_finite()) {
            return Err(Error::ZeroWeights(e.generation));
        }
        Ok(e)
    }
}

fn weighted_mean(particles: &[Particle]) -> Vec<f64> {
    let dim = particles.first().map_or(0, |p| p.params.len());
    let total: f64 = particles.iter().map(|p| p.weight).sum();
    (0..dim)
        .map(|d| particles.iter().map(|p| p.weight * p.params[d]).sum::<f64>() / total)
        .collect()
}

/// Euclidean distance between two series.
pub fn trajectory_distance(observed: &[f64], simulated: &[f64]) -> Result<f64> {
    if observed.len() != simulated.len() {
        return Err(Error::LengthMismatch {
            observed: observed.len(),
            simulated: simulated.len(),
        });
    }
    Ok(observed
        .iter()
        .zip(simulated)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt())
}

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `ln` of the importance weight of a new particle:
/// prior density times hit count, over the kernel mixture of the previous
/// generation. `previous` holds `(params, normalized weight)`.
pub fn log_importance_weight(
    params: &[f64],
    accepted_count: usize,
    previous: &[(&[f64], f64)],
    kernel: &GaussianKernel,
    prior: &PriorSpec,
) -> Result<f64> {
    let log_mix = log_sum_exp(
        previous
            .iter()
            .filter(|(_, w)| *w > 0.0)
            .map(|(center, w)| w.ln() + kernel.log_density(params, center)),
    );
    if log_mix == f64::NEG_INFINITY {
        return Err(Error::ZeroKernelDensity);
    }
    if accepted_count == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(prior.log_density(params) + (accepted_count as f64).ln() - log_mix)
}

pub fn importance_weight(
    params: &[f64],
    accepted_count: usize,
    previous: &[(&[f64], f64)],
    kernel: &GaussianKernel,
    prior: &PriorSpec,
) -> Result<f64> {
    log_importance_weight(params, accepted_count, previous, kernel, prior).map(f64::exp)
}

struct Candidate {
    params: Vec<f64>,
    log_weight: f64,
    distance: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Keeps the `kept` smallest distances (ties by position) and returns the
/// tolerance, the order statistic of rank `rank`.
fn select(mut pool: Vec<Candidate>, kept: usize, rank: usize) -> (Vec<Candidate>, f64) {
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| pool[a].distance.total_cmp(&pool[b].distance).then(a.cmp(&b)));
    let tolerance = pool[order[rank - 1]].distance;
    let mut keep = vec![false; pool.len()];
    for &i in &order[..kept] {
        keep[i] = true;
    }
    let mut i = 0;
    pool.retain(|_| {
        i += 1;
        keep[i - 1]
    });
    (pool, tolerance)
}

fn normalized(pool: &[Candidate], generation: usize) -> Result<Vec<f64>> {
    let max = pool.iter().map(|c| c.log_weight).fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::ZeroWeights(generation));
    }
    let raw: Vec<f64> = pool.iter().map(|c| (c.log_weight - max).exp()).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}

fn to_particles(pool: &[Candidate], weights: &[f64]) -> Vec<Particle> {
    pool.iter()
        .zip(weights)
        .map(|(c, w)| Particle {
            params: c.params.clone(),
            weight: *w,
            distance: c.distance,
        })
        .collect()
}

/// Population ABC-SMC with adaptive tolerance.
///
/// Generation 0 samples the prior with unit weights. Each later generation
/// keeps the `⌊αN⌋` closest particles, refills the population by weighted
/// resampling and Gaussian perturbation, and stops once the share of fresh
/// proposals within the previous tolerance falls to `min_accept_rate`.
/// Particle `n` of generation `g` uses the substream `stream.child(g).child(n)`.
pub fn abc_smc<S: Simulator>(
    simulator: &S,
    prior: &PriorSpec,
    config: &AbcConfig,
    stream: Stream,
) -> Result<PosteriorEnsemble> {
    config.validate()?;
    prior.validate()?;
    let n = config.n_particles;
    let kept = config.kept();
    let rank = config.quantile_rank();
    let reps = config.replications;

    let gen_stream = stream.child(0);
    let initial: Vec<Candidate> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = gen_stream.child(i as u64).rng();
            let params = prior.sample(&mut rng);
            let distance = mean(&simulator.distances(&params, reps, &mut rng)?);
            Ok(Candidate {
                params,
                log_weight: 0.0,
                distance,
            })
        })
        .collect::<Result<_>>()?;
    let (mut survivors, mut tolerance) = select(initial, kept, rank);
    let mut tolerance_history = vec![tolerance];
    let mut weights = normalized(&survivors, 1)?;
    let mut generations = vec![GenerationStats {
        tolerance,
        acceptance_rate: 1.0,
        posterior_mean: weighted_mean(&to_particles(&survivors, &weights)),
    }];
    let mut accept_rate = 1.0;
    let mut generation = 1;

    while accept_rate > config.min_accept_rate && generation < config.max_generations {
        generation += 1;
        let points: Vec<Vec<f64>> = survivors.iter().map(|c| c.params.clone()).collect();
        let kernel = GaussianKernel::from_weighted(
            &points,
            &weights,
            config.kernel_scale,
            config.kernel_covariance,
            prior,
        );
        let previous: Vec<(&[f64], f64)> =
            points.iter().map(|p| p.as_slice()).zip(weights.iter().copied()).collect();
        let picker = WeightedIndex::new(&weights).map_err(|_| Error::ZeroWeights(generation))?;
        let gen_stream = stream.child(generation as u64);
        let fresh: Vec<Candidate> = (0..n - kept)
            .into_par_iter()
            .map(|i| {
                let mut rng = gen_stream.child(i as u64).rng();
                let parent = &points[picker.sample(&mut rng)];
                let params = kernel.perturb(parent, prior, &mut rng)?;
                let d = simulator.distances(&params, reps, &mut rng)?;
                let hits = d.iter().filter(|&&x| x <= tolerance).count();
                let log_weight = log_importance_weight(&params, hits, &previous, &kernel, prior)?;
                Ok(Candidate {
                    params,
                    log_weight,
                    distance: mean(&d),
                })
            })
            .collect::<Result<_>>()?;
        accept_rate =
            fresh.iter().filter(|c| c.distance <= tolerance).count() as f64 / (n - kept) as f64;

        let mut pool = survivors;
        pool.extend(fresh);
        let (next, quantile) = select(pool, kept, rank);
        // Only differs from the quantile when ⌈αN⌉ > ⌊αN⌋ and no proposal hit.
        tolerance = quantile.min(tolerance);
        survivors = next;
        weights = normalized(&survivors, generation)?;
        tolerance_history.push(tolerance);
        generations.push(GenerationStats {
            tolerance,
            acceptance_rate: accept_rate,
            posterior_mean: weighted_mean(&to_particles(&survivors, &weights)),
        });
    }

    Ok(PosteriorEnsemble {
        param_names: prior.names.clone(),
        particles: to_particles(&survivors, &weights),
        generation,
        tolerance_history,
        generations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abc::prior::Bounds;
    use rand_distr::StandardNormal;
    use rand::Rng;

    /// Observations are one series of iid `N(θ, 1)` draws.
    struct GaussianToy {
        observed: Vec<f64>,
    }

    impl Simulator for GaussianToy {
        fn distances(&self, params: &[f64], replications: usize, rng: &mut SimRng) -> Result<Vec<f64>> {
            (0..replications)
                .map(|_| {
                    let sim: Vec<f64> = (0..self.observed.len())
                        .map(|_| params[0] + rng.sample::<f64, _>(StandardNormal))
                        .collect();
                    trajectory_distance(&self.observed, &sim)
                })
                .collect()
        }
    }

    fn toy_prior() -> PriorSpec {
        PriorSpec::new(vec!["theta".into()], vec![Bounds::new(-5.0, 5.0)]).unwrap()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(trajectory_distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(trajectory_distance(&[1.5, 2.0], &[1.5, 2.0]).unwrap(), 0.0);
        assert!(trajectory_distance(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn weight_collapses_for_single_parent() {
        let prior = toy_prior();
        let kernel = GaussianKernel::diagonal(vec![0.25]);
        let parent = [1.0];
        let w = importance_weight(&[1.3], 7, &[(&parent, 1.0)], &kernel, &prior).unwrap();
        let k = kernel.log_density(&[1.3], &parent).exp();
        assert!((w - 0.1 * 7.0 / k).abs() < 1e-12 * w);
        let zero = importance_weight(&[1.3], 0, &[(&parent, 1.0)], &kernel, &prior).unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn weight_two_parent_hand_case() {
        let prior = toy_prior();
        let kernel = GaussianKernel::diagonal(vec![1.0]);
        let (a, b) = ([0.0], [2.0]);
        let w = importance_weight(&[0.5], 3, &[(&a, 0.25), (&b, 0.75)], &kernel, &prior).unwrap();
        let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let hand = 0.1 * 3.0 / (0.25 * phi(0.5) + 0.75 * phi(1.5));
        assert!((w - hand).abs() < 1e-12 * hand);
    }

    #[test]
    fn zero_kernel_density_is_error() {
        let prior = toy_prior();
        let kernel = GaussianKernel::diagonal(vec![0.0]);
        let a = [0.0];
        assert!(matches!(
            importance_weight(&[0.5], 1, &[(&a, 1.0)], &kernel, &prior),
            Err(Error::ZeroKernelDensity)
        ));
    }

    fn toy_run(seed: u64) -> (PosteriorEnsemble, f64) {
        let mut rng = Stream::new(seed).named("data").rng();
        let observed: Vec<f64> = (0..10).map(|_| 1.0 + rng.sample::<f64, _>(StandardNormal)).collect();
        let ybar = mean(&observed);
        let config = AbcConfig {
            replications: 5,
            ..AbcConfig::default()
        };
        let e = abc_smc(&GaussianToy { observed }, &toy_prior(), &config, Stream::new(seed)).unwrap();
        (e, ybar)
    }

    #[test]
    fn ensemble_invariants() {
        let (e, _) = toy_run(1);
        assert_eq!(e.len(), 100);
        let total: f64 = e.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(e.tolerance_history.windows(2).all(|w| w[1] <= w[0]));
        let last = *e.tolerance_history.last().unwrap();
        assert!(e.particles.iter().all(|p| p.distance <= last && p.weight >= 0.0));
        assert!(e.particles.iter().all(|p| toy_prior().contains(&p.params)));
        assert_eq!(e.generations[0].acceptance_rate, 1.0);
    }

    #[test]
    fn seed_determinism() {
        assert_eq!(toy_run(4).0, toy_run(4).0);
    }

    #[test]
    fn first_generation_has_unit_weights() {
        let config = AbcConfig {
            max_generations: 1,
            replications: 2,
            ..AbcConfig::default()
        };
        let toy = GaussianToy { observed: vec![0.3, -0.1] };
        let e = abc_smc(&toy, &toy_prior(), &config, Stream::new(2)).unwrap();
        assert_eq!(e.generation, 1);
        assert!(e.particles.iter().all(|p| p.weight == 0.01));
    }

    #[test]
    fn json_round_trip() {
        let (e, _) = toy_run(5);
        let back = PosteriorEnsemble::from_json(&e.to_json().unwrap()).unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn rejects_bad_config() {
        for c in [
            AbcConfig { n_particles: 1, ..AbcConfig::default() },
            AbcConfig { keep_ratio: 1.0, ..AbcConfig::default() },
            AbcConfig { replications: 0, ..AbcConfig::default() },
        ] {
            assert!(c.validate().is_err());
        }
    }
}
