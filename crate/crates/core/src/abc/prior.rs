use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelTheta, PhaseParams};

/// Closed interval `[lower, upper]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub fn new(lower: f64, upper: f64) -> Self {
        Bounds { lower, upper }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lower, self.upper)
    }
}

/// Independent uniform prior over a box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    pub names: Vec<String>,
    pub bounds: Vec<Bounds>,
}

impl PriorSpec {
    pub fn new(names: Vec<String>, bounds: Vec<Bounds>) -> Result<Self> {
        let prior = PriorSpec { names, bounds };
        prior.validate()?;
        Ok(prior)
    }

    /// Default box for the two-phase kinetic model, in flat
    /// [`ModelTheta::to_flat`] order.
    pub fn kinetic_default() -> Self {
        let phase = [
            Bounds::new(0.0, 0.2),
            Bounds::new(0.0, 0.05),
            Bounds::new(0.0, 5.0),
            Bounds::new(0.0, 5.0),
            Bounds::new(0.0, 0.05),
            Bounds::new(0.0, 0.2),
            Bounds::new(0.0, 0.2),
        ];
        debug_assert_eq!(phase.len(), PhaseParams::FIELDS.len());
        PriorSpec {
            names: ModelTheta::param_names(),
            bounds: phase.iter().chain(phase.iter()).copied().collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.names.len() != self.bounds.len() || self.bounds.is_empty() {
            return Err(Error::InvalidConfig(
                "prior needs one name per range and at least one range".into(),
            ));
        }
        for (name, b) in self.names.iter().zip(&self.bounds) {
            if !(b.lower.is_finite() && b.upper.is_finite() && b.lower < b.upper) {
                return Err(Error::InvalidConfig(format!(
                    "prior range for {name} must satisfy lower < upper"
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, params: &[f64]) -> bool {
        params.len() == self.dim() && self.bounds.iter().zip(params).all(|(b, x)| b.contains(*x))
    }

    /// Log density; `-inf` outside the box.
    pub fn log_density(&self, params: &[f64]) -> f64 {
        if !self.contains(params) {
            return f64::NEG_INFINITY;
        }
        -self.bounds.iter().map(|b| b.width().ln()).sum::<f64>()
    }

    pub fn density(&self, params: &[f64]) -> f64 {
        self.log_density(params).exp()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.bounds
            .iter()
            .map(|b| b.lower + b.width() * rng.random::<f64>())
            .collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.bounds.iter().map(|b| 0.5 * (b.lower + b.upper)).collect()
    }
}
