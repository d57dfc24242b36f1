use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::prior::PriorSpec;
use crate::error::{Error, Result};

/// Proposals outside the prior box are redrawn at most this many times.
pub const MAX_PERTURB_ATTEMPTS: usize = 1000;

/// Covariance structure of the perturbation kernel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelCovariance {
    /// Per-coordinate weighted variances only.
    Diagonal,
    /// Full weighted covariance matrix.
    #[default]
    Full,
}

/// Gaussian perturbation kernel `N(center, Σ)`, stored as the lower
/// Cholesky factor of `Σ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianKernel {
    dim: usize,
    /// Row-major lower triangle, `dim × dim`.
    chol: Vec<f64>,
    diagonal: bool,
}

impl GaussianKernel {
    /// Diagonal kernel with the given variances.
    pub fn diagonal(variances: Vec<f64>) -> Self {
        let dim = variances.len();
        let mut chol = vec![0.0; dim * dim];
        for (i, v) in variances.iter().enumerate() {
            chol[i * dim + i] = v.sqrt();
        }
        GaussianKernel {
            dim,
            chol,
            diagonal: true,
        }
    }

    /// Kernel with covariance `cov` (row-major). Falls back to the diagonal
    /// when the matrix is not numerically positive definite.
    pub fn from_covariance(cov: &[f64], dim: usize) -> Self {
        match cholesky(cov, dim) {
            Some(chol) => GaussianKernel {
                dim,
                chol,
                diagonal: false,
            },
            None => Self::diagonal((0..dim).map(|i| cov[i * dim + i]).collect()),
        }
    }

    /// `scale` times the weighted covariance of `points`. Every variance is
    /// floored at `(1e-6 · prior width)²` so no coordinate collapses.
    pub fn from_weighted(
        points: &[Vec<f64>],
        weights: &[f64],
        scale: f64,
        structure: KernelCovariance,
        prior: &PriorSpec,
    ) -> Self {
        let dim = prior.dim();
        let total: f64 = weights.iter().sum();
        let mean: Vec<f64> = (0..dim)
            .map(|d| points.iter().zip(weights).map(|(p, w)| w * p[d]).sum::<f64>() / total)
            .collect();
        let mut cov = vec![0.0; dim * dim];
        for (p, w) in points.iter().zip(weights) {
            for i in 0..dim {
                for j in 0..=i {
                    cov[i * dim + j] += w * (p[i] - mean[i]) * (p[j] - mean[j]);
                }
            }
        }
        for i in 0..dim {
            for j in 0..=i {
                let c = scale * cov[i * dim + j] / total;
                cov[i * dim + j] = c;
                cov[j * dim + i] = c;
            }
            let floor = (1e-6 * prior.bounds[i].width()).powi(2);
            cov[i * dim + i] = cov[i * dim + i].max(floor);
        }
        match structure {
            KernelCovariance::Diagonal => Self::diagonal((0..dim).map(|i| cov[i * dim + i]).collect()),
            KernelCovariance::Full => Self::from_covariance(&cov, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    pub fn variances(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|i| (0..=i).map(|j| self.chol[i * self.dim + j].powi(2)).sum())
            .collect()
    }

    /// `ln K(x | center)`.
    pub fn log_density(&self, x: &[f64], center: &[f64]) -> f64 {
        let n = self.dim;
        let mut z = vec![0.0; n];
        let mut acc = 0.0;
        for i in 0..n {
            let mut r = x[i] - center[i];
            for j in 0..i {
                r -= self.chol[i * n + j] * z[j];
            }
            let l = self.chol[i * n + i];
            if l == 0.0 {
                if r != 0.0 {
                    return f64::NEG_INFINITY;
                }
                continue;
            }
            z[i] = r / l;
            acc += -0.5 * z[i] * z[i] - l.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
        }
        acc
    }

    /// Draws from the kernel around `center`, restricted to the prior box.
    ///
    /// Coordinates are generated in order through the Cholesky factor; each
    /// standard normal innovation is redrawn until its coordinate falls in
    /// range, at most [`MAX_PERTURB_ATTEMPTS`] times. With a diagonal kernel
    /// this is exactly the kernel truncated to the box.
    pub fn perturb<R: Rng + ?Sized>(
        &self,
        center: &[f64],
        prior: &PriorSpec,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        for _ in 0..MAX_PERTURB_ATTEMPTS {
            if let Some(x) = self.sequential_draw(center, prior, rng) {
                return Ok(x);
            }
        }
        Err(Error::DegenerateKernel(MAX_PERTURB_ATTEMPTS))
    }

    fn sequential_draw<R: Rng + ?Sized>(
        &self,
        center: &[f64],
        prior: &PriorSpec,
        rng: &mut R,
    ) -> Option<Vec<f64>> {
        let n = self.dim;
        let mut z = vec![0.0; n];
        let mut out = vec![0.0; n];
        for i in 0..n {
            let shift = center[i] + (0..i).map(|j| self.chol[i * n + j] * z[j]).sum::<f64>();
            let l = self.chol[i * n + i];
            let bounds = prior.bounds[i];
            let mut accepted = false;
            for _ in 0..MAX_PERTURB_ATTEMPTS {
                let zi: f64 = rng.sample(StandardNormal);
                let x = shift + l * zi;
                if bounds.contains(x) {
                    z[i] = zi;
                    out[i] = x;
                    accepted = true;
                    break;
                }
            }
            if !accepted {
                return None;
            }
        }
        Some(out)
    }
}

fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum();
            if i == j {
                let d = a[i * n + i] - s;
                if !(d > 0.0) {
                    return None;
                }
                l[i * n + i] = d.sqrt();
            } else {
                l[i * n + j] = (a[i * n + j] - s) / l[j * n + j];
            }
        }
    }
    Some(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abc::prior::Bounds;
    use crate::rng::Stream;

    fn square() -> PriorSpec {
        PriorSpec::new(
            vec!["a".into(), "b".into()],
            vec![Bounds::new(0.0, 10.0), Bounds::new(0.0, 10.0)],
        )
        .unwrap()
    }

    #[test]
    fn zero_covariance_is_identity() {
        let k = GaussianKernel::diagonal(vec![0.0, 0.0]);
        let mut rng = Stream::new(1).rng();
        assert_eq!(k.perturb(&[2.0, 3.0], &square(), &mut rng).unwrap(), vec![2.0, 3.0]);
    }

    #[test]
    fn empirical_covariance_matches() {
        let k = GaussianKernel::diagonal(vec![0.04, 0.25]);
        let prior = square();
        let mut rng = Stream::new(9).rng();
        let n = 10_000;
        let draws: Vec<Vec<f64>> = (0..n)
            .map(|_| k.perturb(&[5.0, 5.0], &prior, &mut rng).unwrap())
            .collect();
        for d in 0..2 {
            let mean = draws.iter().map(|p| p[d]).sum::<f64>() / n as f64;
            let var = draws.iter().map(|p| (p[d] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!((var / k.variances()[d] - 1.0).abs() < 0.1, "d={d} var={var}");
        }
    }

    #[test]
    fn center_of_box_accepts_first_try() {
        let k = GaussianKernel::diagonal(vec![1e-4, 1e-4]);
        let prior = square();
        let mut rng = Stream::new(3).rng();
        let before = rng.clone();
        let x = k.perturb(&[5.0, 5.0], &prior, &mut rng).unwrap();
        let mut replay = before;
        let first: Vec<f64> = (0..2)
            .map(|_| 5.0 + 0.01 * replay.sample::<f64, _>(StandardNormal))
            .collect();
        assert_eq!(x, first);
    }

    #[test]
    fn gives_up_outside_support() {
        let k = GaussianKernel::diagonal(vec![1e-6, 1e-6]);
        let mut rng = Stream::new(3).rng();
        let far = k.perturb(&[50.0, 50.0], &square(), &mut rng);
        assert!(matches!(far, Err(Error::DegenerateKernel(MAX_PERTURB_ATTEMPTS))));
    }

    #[test]
    fn log_density_is_gaussian() {
        let k = GaussianKernel::diagonal(vec![4.0]);
        let expected = (-(2.0f64).powi(2) / 8.0).exp() / (2.0 * std::f64::consts::PI * 4.0).sqrt();
        assert!((k.log_density(&[3.0], &[1.0]).exp() - expected).abs() < 1e-15);
    }

    #[test]
    fn full_kernel_reproduces_covariance() {
        let prior = PriorSpec::new(
            vec!["a".into(), "b".into()],
            vec![Bounds::new(-50.0, 50.0), Bounds::new(-50.0, 50.0)],
        )
        .unwrap();
        let cov = [1.0, 0.8, 0.8, 2.0];
        let k = GaussianKernel::from_covariance(&cov, 2);
        assert!(!k.is_diagonal());
        let mut rng = Stream::new(4).rng();
        let n = 10_000;
        let draws: Vec<Vec<f64>> = (0..n)
            .map(|_| k.perturb(&[0.0, 0.0], &prior, &mut rng).unwrap())
            .collect();
        let c01 = draws.iter().map(|p| p[0] * p[1]).sum::<f64>() / n as f64;
        let c11 = draws.iter().map(|p| p[1] * p[1]).sum::<f64>() / n as f64;
        assert!((c01 / 0.8 - 1.0).abs() < 0.1, "{c01}");
        assert!((c11 / 2.0 - 1.0).abs() < 0.1, "{c11}");
    }

    #[test]
    fn full_log_density_matches_bivariate_formula() {
        let k = GaussianKernel::from_covariance(&[1.0, 0.5, 0.5, 2.0], 2);
        let (x, y) = (0.7, -0.4);
        let det: f64 = 1.0 * 2.0 - 0.25;
        let quad = (2.0 * x * x - 2.0 * 0.5 * x * y + 1.0 * y * y) / det;
        let expected = -0.5 * quad - 0.5 * det.ln() - (2.0 * std::f64::consts::PI).ln();
        assert!((k.log_density(&[x, y], &[0.0, 0.0]) - expected).abs() < 1e-12);
    }

    #[test]
    fn weighted_covariance_and_floor() {
        let prior = square();
        let pts = vec![vec![1.0, 2.0], vec![3.0, 2.0]];
        let k = GaussianKernel::from_weighted(&pts, &[0.5, 0.5], 2.0, KernelCovariance::Diagonal, &prior);
        let v = k.variances();
        assert!((v[0] - 2.0).abs() < 1e-12);
        assert!((v[1] - 1e-10).abs() < 1e-20);
    }
}
