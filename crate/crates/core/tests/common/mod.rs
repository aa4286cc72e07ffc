#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use sparsebench::bayes::RegressionPosterior;
use sparsebench::rng;
use sparsebench::sampler::LogDensity;

pub fn gaussian_matrix(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng::seeded(seed);
    DMatrix::from_fn(n, p, |_, _| r.sample(StandardNormal))
}

pub fn gaussian_vector(n: usize, seed: u64) -> DVector<f64> {
    gaussian_matrix(n, 1, seed).column(0).into_owned()
}

fn central_difference<T: LogDensity>(target: &T, theta: &[f64], k: usize, h: f64) -> f64 {
    let mut scratch = vec![0.0; theta.len()];
    let mut up = theta.to_vec();
    let mut down = theta.to_vec();
    up[k] += h;
    down[k] -= h;
    (target.logp_grad(&up, &mut scratch) - target.logp_grad(&down, &mut scratch)) / (2.0 * h)
}

/// Largest relative error between the analytic gradient and central
/// differences over `points` random points with N(0, scale^2) coordinates.
///
/// The differences at h = 1e-5 and h / 2 are combined by one Richardson
/// step. Plain h = 1e-5 differences carry truncation error near 1e-5 where
/// a spike-and-slab coefficient sits inside the 0.01-wide spike.
pub fn max_gradient_error<T: LogDensity>(target: &T, points: usize, scale: f64, seed: u64) -> f64 {
    let dim = target.dim();
    let mut r = rng::seeded(seed);
    let mut grad = vec![0.0; dim];
    let mut worst = 0.0f64;
    for _ in 0..points {
        let theta: Vec<f64> = (0..dim).map(|_| scale * r.sample::<f64, _>(StandardNormal)).collect();
        target.logp_grad(&theta, &mut grad);
        for k in 0..dim {
            let h = 1e-5;
            let fd = (4.0 * central_difference(target, &theta, k, h / 2.0) - central_difference(target, &theta, k, h)) / 3.0;
            let rel = (fd - grad[k]).abs() / grad[k].abs().max(fd.abs()).max(1.0);
            worst = worst.max(rel);
        }
    }
    worst
}

/// Elastic-Net KKT residual computed from the raw data:
/// active j: |x_j' r / n - 2 l2 b_j - l1 sign(b_j)|, inactive j: max(0, |x_j' r / n| - l1).
pub fn kkt_residual(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>, lambda: f64, alpha: f64) -> f64 {
    let n = x.nrows() as f64;
    let r = y - x * beta;
    let (l1, l2) = (lambda * alpha, lambda * (1.0 - alpha));
    (0..x.ncols())
        .map(|j| {
            let g = x.column(j).dot(&r) / n;
            if beta[j] != 0.0 {
                (g - 2.0 * l2 * beta[j] - l1 * beta[j].signum()).abs()
            } else {
                (g.abs() - l1).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn sample_var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

/// Monte-Carlo standard error of the mean by non-overlapping batch means.
pub fn batch_means_mcse(chains: &[Vec<f64>], batches_per_chain: usize) -> f64 {
    let mut means = Vec::new();
    for c in chains {
        let size = c.len() / batches_per_chain;
        for b in 0..batches_per_chain {
            means.push(mean(&c[b * size..(b + 1) * size]));
        }
    }
    (sample_var(&means) / means.len() as f64).sqrt()
}

/// Gaussian linear model with known noise and a fixed N(0, s^2 I) prior.
pub struct Conjugate<'a> {
    pub x: &'a DMatrix<f64>,
    pub y: &'a DVector<f64>,
    pub prior_sd: f64,
    pub noise_sd: f64,
}

impl Conjugate<'_> {
    /// Analytic posterior mean and covariance.
    pub fn posterior(&self) -> (DVector<f64>, DMatrix<f64>) {
        let p = self.x.ncols();
        let v = self.noise_sd.powi(2);
        let precision = self.x.transpose() * self.x / v + DMatrix::identity(p, p) / self.prior_sd.powi(2);
        let cov = precision.cholesky().expect("posterior precision is positive definite").inverse();
        let mean = &cov * self.x.transpose() * self.y / v;
        (mean, cov)
    }
}

impl LogDensity for Conjugate<'_> {
    fn dim(&self) -> usize {
        self.x.ncols()
    }

    fn logp_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let beta = DVector::from_column_slice(theta);
        let r = self.y - self.x * &beta;
        let (v, s) = (self.noise_sd.powi(2), self.prior_sd.powi(2));
        let g = self.x.transpose() * &r / v - &beta / s;
        grad.copy_from_slice(g.as_slice());
        -0.5 * r.norm_squared() / v - 0.5 * beta.norm_squared() / s
    }
}

impl RegressionPosterior for Conjugate<'_> {
    fn n_coefficients(&self) -> usize {
        self.x.ncols()
    }

    fn coefficients(&self, theta: &[f64], out: &mut [f64]) {
        out.copy_from_slice(theta);
    }
}
