//! Quick self-checks behind the `validate` command: solver oracles, sampler
//! moments, gradient checks, a conjugate posterior and HDI bounds. Sized to
//! finish in well under a minute.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::bayes::{hdi, sample_posterior, HorseshoeTarget, RegressionPosterior, SpikeSlabTarget};
use crate::datagen::{generate_with_sizes, CovarianceSpec, Design};
use crate::rng;
use crate::sampler::{run_chains, FnDensity, LogDensity, SamplerConfig};
use crate::solvers::{coordinate_descent, fit_ols, ridge_path, soft_threshold, CdOptions, PenaltyConfig};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn gaussian_matrix(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng::seeded(seed);
    DMatrix::from_fn(n, p, |_, _| r.sample(StandardNormal))
}

fn lasso_zero_is_ols() -> Check {
    let x = gaussian_matrix(60, 8, 1);
    let y = &x * DVector::from_fn(8, |j, _| j as f64 - 3.0) + gaussian_matrix(60, 1, 2).column(0);
    let ols = fit_ols(&x, &y).map(|f| f.beta_hat);
    let opts = CdOptions {
        tol: 1e-12,
        ..CdOptions::default()
    };
    let cd = PenaltyConfig::lasso(0.0).and_then(|pen| coordinate_descent(&x, &y, &pen, &opts, None));
    match (ols, cd) {
        (Ok(a), Ok(b)) => {
            let err = (a - b.beta).amax();
            check("lasso(0) = ols", err < 1e-6, format!("max abs diff {err:.2e}"))
        }
        (a, b) => check("lasso(0) = ols", false, format!("{:?} / {:?}", a.err(), b.err())),
    }
}

fn orthonormal_soft_threshold() -> Check {
    // Columns scaled so that X^T X / n = I.
    let n = 40;
    let q = gaussian_matrix(n, 6, 3).qr().q() * (n as f64).sqrt();
    let y = gaussian_matrix(n, 1, 4).column(0) * 2.0;
    let lambda = 0.3;
    let z = q.transpose() * &y / n as f64;
    let expected = z.map(|v| soft_threshold(v, lambda));
    let got = PenaltyConfig::lasso(lambda).and_then(|pen| coordinate_descent(&q, &y, &pen, &CdOptions::default(), None));
    match got {
        Ok(out) => {
            let err = (out.beta - expected).amax();
            check("orthonormal soft-threshold", err < 1e-8, format!("max abs diff {err:.2e}"))
        }
        Err(e) => check("orthonormal soft-threshold", false, e.to_string()),
    }
}

fn ridge_loocv_brute_force() -> Check {
    let (n, p) = (25, 6);
    let x = gaussian_matrix(n, p, 5);
    let y = gaussian_matrix(n, 1, 6).column(0).into_owned();
    let lambdas = [1e-3, 0.1, 1.0, 10.0];
    let path = match ridge_path(&x, &y, &lambdas) {
        Ok(p) => p,
        Err(e) => return check("ridge LOOCV", false, e.to_string()),
    };
    let mut worst = 0.0f64;
    for (k, &lambda) in lambdas.iter().enumerate() {
        let mut sse = 0.0;
        for i in 0..n {
            let keep: Vec<usize> = (0..n).filter(|&r| r != i).collect();
            let xi = x.select_rows(&keep);
            let yi = y.select_rows(&keep);
            // The held-out refit keeps the full-data penalty 2 n lambda I.
            let a = xi.transpose() * &xi + DMatrix::identity(p, p) * (2.0 * n as f64 * lambda);
            let b = a.lu().solve(&(xi.transpose() * yi)).expect("ridge system is nonsingular");
            sse += (y[i] - (x.row(i) * b)[0]).powi(2);
        }
        worst = worst.max((sse / n as f64 - path.loocv_mse[k]).abs());
    }
    check("ridge LOOCV", worst < 1e-8, format!("max abs diff {worst:.2e}"))
}

fn std_normal_moments() -> Check {
    let dim = 10;
    let target = FnDensity::new(dim, |q: &[f64], g: &mut [f64]| {
        for (gi, qi) in g.iter_mut().zip(q) {
            *gi = -qi;
        }
        -0.5 * q.iter().map(|v| v * v).sum::<f64>()
    });
    let config = SamplerConfig {
        seed: 2024,
        ..SamplerConfig::default()
    };
    let draws = match run_chains(&target, &config) {
        Ok(d) => d,
        Err(e) => return check("NUTS standard normal", false, e.to_string()),
    };
    let mut worst_mean = 0.0f64;
    let mut var_range = (f64::INFINITY, 0.0f64);
    for j in 0..dim {
        let all: Vec<f64> = draws.parameter(j).concat();
        let m = all.iter().sum::<f64>() / all.len() as f64;
        let v = all.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (all.len() - 1) as f64;
        worst_mean = worst_mean.max(m.abs());
        var_range = (var_range.0.min(v), var_range.1.max(v));
    }
    let accept = draws.accept_stat_mean();
    let div = draws.divergences();
    let ok = worst_mean < 0.1 && var_range.0 >= 0.85 && var_range.1 <= 1.15 && (accept - 0.95).abs() <= 0.05 && div == 0;
    check(
        "NUTS standard normal",
        ok,
        format!(
            "max |mean| {worst_mean:.3}, var [{:.3}, {:.3}], accept {accept:.3}, divergences {div}",
            var_range.0, var_range.1
        ),
    )
}

fn central_difference<T: LogDensity>(target: &T, theta: &[f64], k: usize, h: f64) -> f64 {
    let mut scratch = vec![0.0; theta.len()];
    let mut up = theta.to_vec();
    let mut down = theta.to_vec();
    up[k] += h;
    down[k] -= h;
    (target.logp_grad(&up, &mut scratch) - target.logp_grad(&down, &mut scratch)) / (2.0 * h)
}

// One Richardson step over h and h/2; the narrow spike makes plain
// h = 1e-5 differences too coarse for a 1e-5 tolerance.
fn max_gradient_error<T: LogDensity>(target: &T, seed: u64) -> f64 {
    let dim = target.dim();
    let mut r = rng::seeded(seed);
    let mut worst = 0.0f64;
    let mut grad = vec![0.0; dim];
    for _ in 0..20 {
        let theta: Vec<f64> = (0..dim).map(|_| 0.5 * r.sample::<f64, _>(StandardNormal)).collect();
        target.logp_grad(&theta, &mut grad);
        for k in 0..dim {
            let h = 1e-5;
            let fd = (4.0 * central_difference(target, &theta, k, h / 2.0) - central_difference(target, &theta, k, h)) / 3.0;
            worst = worst.max((fd - grad[k]).abs() / grad[k].abs().max(fd.abs()).max(1.0));
        }
    }
    worst
}

fn gradient_checks() -> Check {
    let mut worst = 0.0f64;
    for (i, p) in [2usize, 5, 20].into_iter().enumerate() {
        let x = gaussian_matrix(30, p, 10 + i as u64);
        let y = gaussian_matrix(30, 1, 20 + i as u64).column(0).into_owned();
        if let (Ok(hs), Ok(ss)) = (HorseshoeTarget::new(&x, &y), SpikeSlabTarget::new(&x, &y)) {
            worst = worst.max(max_gradient_error(&hs, 30 + i as u64));
            worst = worst.max(max_gradient_error(&ss, 40 + i as u64));
        } else {
            return check("posterior gradients", false, "target construction failed".into());
        }
    }
    check("posterior gradients", worst < 1e-5, format!("max relative error {worst:.2e}"))
}

/// Linear model with a fixed N(0, s^2 I) prior and known noise.
struct ConjugateTarget<'a> {
    x: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    prior_sd: f64,
    noise_sd: f64,
}

impl LogDensity for ConjugateTarget<'_> {
    fn dim(&self) -> usize {
        self.x.ncols()
    }

    fn logp_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let beta = DVector::from_column_slice(theta);
        let r = self.y - self.x * &beta;
        let g = self.x.transpose() * &r / self.noise_sd.powi(2) - &beta / self.prior_sd.powi(2);
        grad.copy_from_slice(g.as_slice());
        -0.5 * r.norm_squared() / self.noise_sd.powi(2) - 0.5 * beta.norm_squared() / self.prior_sd.powi(2)
    }
}

impl RegressionPosterior for ConjugateTarget<'_> {
    fn n_coefficients(&self) -> usize {
        self.x.ncols()
    }

    fn coefficients(&self, theta: &[f64], out: &mut [f64]) {
        out.copy_from_slice(theta);
    }
}

fn conjugate_posterior() -> Check {
    let spec = match CovarianceSpec::new(Design::Independent, 5, 0.0) {
        Ok(s) => s,
        Err(e) => return check("conjugate posterior", false, e.to_string()),
    };
    let data = match generate_with_sizes(&spec, 2.0, 77, 50, 10) {
        Ok(d) => d,
        Err(e) => return check("conjugate posterior", false, e.to_string()),
    };
    let (prior_sd, noise_sd) = (2.0, 1.5);
    let target = ConjugateTarget {
        x: &data.x_train,
        y: &data.y_train,
        prior_sd,
        noise_sd,
    };
    let precision = data.x_train.transpose() * &data.x_train / noise_sd.powi(2)
        + DMatrix::identity(5, 5) / prior_sd.powi(2);
    let cov = match precision.cholesky() {
        Some(c) => c.inverse(),
        None => return check("conjugate posterior", false, "singular precision".into()),
    };
    let mean = &cov * data.x_train.transpose() * &data.y_train / noise_sd.powi(2);
    let config = SamplerConfig {
        seed: 99,
        ..SamplerConfig::default()
    };
    let fit = match sample_posterior(&target, &config) {
        Ok(f) => f,
        Err(e) => return check("conjugate posterior", false, e.to_string()),
    };
    let draws = config.chains * config.draws;
    let mut worst = 0.0f64;
    for j in 0..5 {
        // Naive MCSE; NUTS draws on a Gaussian are close to independent.
        let mcse = (cov[(j, j)] / draws as f64).sqrt();
        worst = worst.max((fit.beta_hat[j] - mean[j]).abs() / mcse);
    }
    check("conjugate posterior", worst < 3.0, format!("max |error| / MCSE {worst:.2}"))
}

fn hdi_normal() -> Check {
    let mut r = rng::seeded(5);
    let draws: Vec<f64> = (0..100_000).map(|_| r.sample(StandardNormal)).collect();
    match hdi(&draws, 0.95) {
        Ok((lo, hi)) => {
            let inside = draws.iter().filter(|v| lo <= **v && **v <= hi).count();
            let ok = (lo + 1.96).abs() < 0.05 && (hi - 1.96).abs() < 0.05 && inside >= 95_000;
            check("HDI of N(0,1)", ok, format!("[{lo:.3}, {hi:.3}] holding {inside} draws"))
        }
        Err(e) => check("HDI of N(0,1)", false, e.to_string()),
    }
}

pub fn run_all() -> Vec<Check> {
    vec![
        lasso_zero_is_ols(),
        orthonormal_soft_threshold(),
        ridge_loocv_brute_force(),
        std_normal_moments(),
        gradient_checks(),
        conjugate_posterior(),
        hdi_normal(),
    ]
}
