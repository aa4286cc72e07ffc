//! Horseshoe and continuous Spike-and-Slab regression posteriors as
//! unconstrained targets for the NUTS sampler, and posterior summaries.
//!
//! Horseshoe (non-centered):
//!
//! ```text
//! beta_j = eta_j * lambda_j * tau,  eta_j ~ N(0, 1)
//! lambda_j ~ C+(0, 1),  tau ~ C+(0, 1),  sigma ~ C+(0, 2)
//! ```
//!
//! Spike-and-Slab, with the indicators summed out:
//!
//! ```text
//! beta_j ~ pi N(0, 5^2) + (1 - pi) N(0, 0.01^2)
//! pi ~ Beta(1, 5),  sigma ~ C+(0, 2)
//! ```
//!
//! Positive parameters live on the log scale and `pi` on the logit scale;
//! log-densities include the Jacobian of each transform and every
//! normalizing constant.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fit::{FitResult, SamplerDiagnostics};
use crate::sampler::{run_chains, split_rhat, LogDensity, SamplerConfig};

pub const GLOBAL_SCALE: f64 = 1.0;
pub const LOCAL_SCALE: f64 = 1.0;
pub const NOISE_SCALE: f64 = 2.0;
pub const SLAB_SCALE: f64 = 5.0;
pub const SPIKE_SCALE: f64 = 0.01;
pub const PRIOR_INCLUSION: f64 = 0.2;
pub const HDI_PROB: f64 = 0.95;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BayesModel {
    Horseshoe,
    SpikeSlab,
}

impl fmt::Display for BayesModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BayesModel::Horseshoe => "horseshoe",
            BayesModel::SpikeSlab => "spike_slab",
        })
    }
}

impl FromStr for BayesModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "horseshoe" => Ok(BayesModel::Horseshoe),
            "spike_slab" => Ok(BayesModel::SpikeSlab),
            other => Err(Error::invalid(format!("unknown Bayesian model '{other}'"))),
        }
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Half-Cauchy(0, scale) log-density of `exp(u)` plus the log-Jacobian `u`,
/// and its derivative in `u`.
fn log_half_cauchy_on_log_scale(u: f64, scale: f64) -> (f64, f64) {
    let v = 2.0 * (u - scale.ln());
    let value = (2.0 / (PI * scale)).ln() - softplus(v) + u;
    let deriv = 1.0 - 2.0 * logistic(v);
    (value, deriv)
}

fn log_normal(x: f64, scale: f64) -> f64 {
    -HALF_LN_2PI - scale.ln() - 0.5 * (x / scale).powi(2)
}

/// Gaussian log-likelihood `N(y | X beta, sigma^2 I)`, its gradient in `beta`
/// and its derivative in `log(sigma)`.
fn gaussian_loglik(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    beta: &DVector<f64>,
    log_sigma: f64,
) -> (f64, DVector<f64>, f64) {
    let n = y.len() as f64;
    if y.is_empty() {
        return (0.0, DVector::zeros(beta.len()), 0.0);
    }
    let sigma2 = (2.0 * log_sigma).exp();
    let resid = y - x * beta;
    let rss = resid.norm_squared();
    let value = -n * (HALF_LN_2PI + log_sigma) - 0.5 * rss / sigma2;
    let grad_beta = x.tr_mul(&resid) / sigma2;
    let d_log_sigma = -n + rss / sigma2;
    (value, grad_beta, d_log_sigma)
}

fn check_data(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if x.ncols() == 0 {
        return Err(Error::invalid("design matrix has no columns"));
    }
    Ok(())
}

/// Unconstrained Horseshoe parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct HorseshoeParams {
    pub eta: Vec<f64>,
    pub log_lambda: Vec<f64>,
    pub log_tau: f64,
    pub log_sigma: f64,
}

impl HorseshoeParams {
    /// Layout: `[eta (p), log_lambda (p), log_tau, log_sigma]`.
    pub fn from_slice(theta: &[f64]) -> Result<Self> {
        if theta.len() < 4 || theta.len() % 2 != 0 {
            return Err(Error::invalid(format!(
                "horseshoe vector has length {}, expected 2p + 2",
                theta.len()
            )));
        }
        let p = (theta.len() - 2) / 2;
        Ok(Self {
            eta: theta[..p].to_vec(),
            log_lambda: theta[p..2 * p].to_vec(),
            log_tau: theta[2 * p],
            log_sigma: theta[2 * p + 1],
        })
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.eta.clone();
        v.extend_from_slice(&self.log_lambda);
        v.push(self.log_tau);
        v.push(self.log_sigma);
        v
    }

    pub fn from_constrained(beta: &[f64], lambda: &[f64], tau: f64, sigma: f64) -> Self {
        Self {
            eta: beta.iter().zip(lambda).map(|(b, l)| b / (l * tau)).collect(),
            log_lambda: lambda.iter().map(|l| l.ln()).collect(),
            log_tau: tau.ln(),
            log_sigma: sigma.ln(),
        }
    }

    pub fn lambda(&self) -> Vec<f64> {
        self.log_lambda.iter().map(|l| l.exp()).collect()
    }

    pub fn tau(&self) -> f64 {
        self.log_tau.exp()
    }

    pub fn sigma(&self) -> f64 {
        self.log_sigma.exp()
    }

    pub fn beta(&self) -> Vec<f64> {
        self.eta
            .iter()
            .zip(&self.log_lambda)
            .map(|(e, l)| e * (l + self.log_tau).exp())
            .collect()
    }
}

/// Unconstrained Spike-and-Slab parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeSlabParams {
    pub beta: Vec<f64>,
    pub logit_pi: f64,
    pub log_sigma: f64,
}

impl SpikeSlabParams {
    /// Layout: `[beta (p), logit_pi, log_sigma]`.
    pub fn from_slice(theta: &[f64]) -> Result<Self> {
        if theta.len() < 3 {
            return Err(Error::invalid(format!(
                "spike-and-slab vector has length {}, expected p + 2",
                theta.len()
            )));
        }
        let p = theta.len() - 2;
        Ok(Self {
            beta: theta[..p].to_vec(),
            logit_pi: theta[p],
            log_sigma: theta[p + 1],
        })
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.beta.clone();
        v.push(self.logit_pi);
        v.push(self.log_sigma);
        v
    }

    pub fn from_constrained(beta: &[f64], pi: f64, sigma: f64) -> Self {
        Self {
            beta: beta.to_vec(),
            logit_pi: (pi / (1.0 - pi)).ln(),
            log_sigma: sigma.ln(),
        }
    }

    pub fn pi(&self) -> f64 {
        logistic(self.logit_pi)
    }

    pub fn sigma(&self) -> f64 {
        self.log_sigma.exp()
    }
}

/// `log[pi N(b | 0, 5^2) + (1 - pi) N(b | 0, 0.01^2)]` with `pi =
/// logistic(logit_pi)`.
pub fn log_mixture_prior(b: f64, logit_pi: f64) -> f64 {
    let ln_pi = -softplus(-logit_pi);
    let ln_1m_pi = -softplus(logit_pi);
    log_add_exp(
        ln_pi + log_normal(b, SLAB_SCALE),
        ln_1m_pi + log_normal(b, SPIKE_SCALE),
    )
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// A regression posterior: a target whose draws map to coefficients.
pub trait RegressionPosterior: LogDensity {
    fn n_coefficients(&self) -> usize;

    /// Writes the regression coefficients implied by `theta` into `out`.
    fn coefficients(&self, theta: &[f64], out: &mut [f64]);
}

pub struct HorseshoeTarget<'a> {
    x: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
}

impl<'a> HorseshoeTarget<'a> {
    pub fn new(x: &'a DMatrix<f64>, y: &'a DVector<f64>) -> Result<Self> {
        check_data(x, y)?;
        Ok(Self { x, y })
    }

    fn p(&self) -> usize {
        self.x.ncols()
    }
}

impl LogDensity for HorseshoeTarget<'_> {
    fn dim(&self) -> usize {
        2 * self.p() + 2
    }

    fn logp_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let p = self.p();
        let (eta, rest) = theta.split_at(p);
        let (log_lambda, rest) = rest.split_at(p);
        let (log_tau, log_sigma) = (rest[0], rest[1]);

        let scales: Vec<f64> = log_lambda.iter().map(|l| (l + log_tau).exp()).collect();
        let beta = DVector::from_fn(p, |j, _| eta[j] * scales[j]);
        let (mut lp, grad_beta, d_log_sigma) = gaussian_loglik(self.x, self.y, &beta, log_sigma);

        let mut d_log_tau = 0.0;
        for j in 0..p {
            lp += -0.5 * eta[j] * eta[j] - HALF_LN_2PI;
            let (lp_local, d_local) = log_half_cauchy_on_log_scale(log_lambda[j], LOCAL_SCALE);
            lp += lp_local;
            let chain = grad_beta[j] * beta[j];
            grad[j] = grad_beta[j] * scales[j] - eta[j];
            grad[p + j] = chain + d_local;
            d_log_tau += chain;
        }
        let (lp_tau, d_tau) = log_half_cauchy_on_log_scale(log_tau, GLOBAL_SCALE);
        let (lp_sigma, d_sigma) = log_half_cauchy_on_log_scale(log_sigma, NOISE_SCALE);
        grad[2 * p] = d_log_tau + d_tau;
        grad[2 * p + 1] = d_log_sigma + d_sigma;
        lp + lp_tau + lp_sigma
    }
}

impl RegressionPosterior for HorseshoeTarget<'_> {
    fn n_coefficients(&self) -> usize {
        self.p()
    }

    fn coefficients(&self, theta: &[f64], out: &mut [f64]) {
        let p = self.p();
        let log_tau = theta[2 * p];
        for j in 0..p {
            out[j] = theta[j] * (theta[p + j] + log_tau).exp();
        }
    }
}

pub struct SpikeSlabTarget<'a> {
    x: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
}

impl<'a> SpikeSlabTarget<'a> {
    pub fn new(x: &'a DMatrix<f64>, y: &'a DVector<f64>) -> Result<Self> {
        check_data(x, y)?;
        Ok(Self { x, y })
    }

    fn p(&self) -> usize {
        self.x.ncols()
    }
}

impl LogDensity for SpikeSlabTarget<'_> {
    fn dim(&self) -> usize {
        self.p() + 2
    }

    fn logp_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let p = self.p();
        let (logit_pi, log_sigma) = (theta[p], theta[p + 1]);
        let beta = DVector::from_column_slice(&theta[..p]);
        let (mut lp, grad_beta, d_log_sigma) = gaussian_loglik(self.x, self.y, &beta, log_sigma);

        let pi = logistic(logit_pi);
        let ln_pi = -softplus(-logit_pi);
        let ln_1m_pi = -softplus(logit_pi);
        let slab_prec = SLAB_SCALE.powi(-2);
        let spike_prec = SPIKE_SCALE.powi(-2);

        let mut d_logit = 0.0;
        for j in 0..p {
            let b = beta[j];
            let slab = ln_pi + log_normal(b, SLAB_SCALE);
            let spike = ln_1m_pi + log_normal(b, SPIKE_SCALE);
            let mix = log_add_exp(slab, spike);
            lp += mix;
            let w_slab = (slab - mix).exp();
            let w_spike = (spike - mix).exp();
            grad[j] = grad_beta[j] - b * (w_slab * slab_prec + w_spike * spike_prec);
            d_logit += w_slab - pi;
        }

        // Beta(1, 1/pi0) prior and logit Jacobian
        let b_shape = 1.0 / PRIOR_INCLUSION;
        lp += b_shape.ln() + (b_shape - 1.0) * ln_1m_pi + ln_pi + ln_1m_pi;
        grad[p] = d_logit - (b_shape - 1.0) * pi + 1.0 - 2.0 * pi;

        let (lp_sigma, d_sigma) = log_half_cauchy_on_log_scale(log_sigma, NOISE_SCALE);
        grad[p + 1] = d_log_sigma + d_sigma;
        lp + lp_sigma
    }
}

impl RegressionPosterior for SpikeSlabTarget<'_> {
    fn n_coefficients(&self) -> usize {
        self.p()
    }

    fn coefficients(&self, theta: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&theta[..self.p()]);
    }
}

/// Posterior mean and 95% HDI of one coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientSummary {
    pub mean: f64,
    pub hdi_low: f64,
    pub hdi_high: f64,
}

impl CoefficientSummary {
    pub fn from_draws(draws: &[f64]) -> Result<Self> {
        let (hdi_low, hdi_high) = hdi(draws, HDI_PROB)?;
        Ok(Self {
            mean: draws.iter().sum::<f64>() / draws.len() as f64,
            hdi_low,
            hdi_high,
        })
    }

    pub fn width(&self) -> f64 {
        self.hdi_high - self.hdi_low
    }
}

/// Narrowest interval spanning `ceil(prob * N)` consecutive sorted draws.
/// Ties go to the earliest window.
pub fn hdi(samples: &[f64], prob: f64) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::invalid("HDI of an empty sample"));
    }
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::invalid(format!("HDI probability must lie in (0, 1), got {prob}")));
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("HDI input contains NaN"));
    }
    let n = samples.len();
    let min_draws = (1.0 / (1.0 - prob) - 1e-9).ceil() as usize;
    if n < min_draws {
        return Err(Error::invalid(format!(
            "HDI at {prob} needs at least {min_draws} draws, got {n}"
        )));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let window = ((prob * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    let mut best = 0;
    let mut best_width = f64::INFINITY;
    for start in 0..=n - window {
        let width = sorted[start + window - 1] - sorted[start];
        if width < best_width {
            best_width = width;
            best = start;
        }
    }
    Ok((sorted[best], sorted[best + window - 1]))
}

/// Samples `target` and summarizes its coefficients: posterior means as the
/// point estimate, per-coefficient 95% HDIs, divergences and split-R-hat.
pub fn sample_posterior<T: RegressionPosterior>(target: &T, config: &SamplerConfig) -> Result<FitResult> {
    let start = Instant::now();
    let draws = run_chains(target, config)?;
    let p = target.n_coefficients();

    // coef_draws[j][chain][draw]
    let mut coef_draws = vec![vec![Vec::with_capacity(draws.draws); draws.chains.len()]; p];
    let mut coefs = vec![0.0; p];
    for c in 0..draws.chains.len() {
        for d in 0..draws.draws {
            target.coefficients(draws.sample(c, d), &mut coefs);
            for j in 0..p {
                coef_draws[j][c].push(coefs[j]);
            }
        }
    }

    let mut summaries = Vec::with_capacity(p);
    let mut max_rhat = 0.0f64;
    for chains in &coef_draws {
        summaries.push(CoefficientSummary::from_draws(&chains.concat())?);
        match split_rhat(chains) {
            Ok(r) => max_rhat = max_rhat.max(r),
            Err(_) => max_rhat = f64::NAN,
        }
    }
    let divergences = draws.divergences();
    if max_rhat > 1.05 {
        log::warn!("max split R-hat {max_rhat:.3} exceeds 1.05");
    }
    if divergences > 0 {
        log::debug!("{divergences} divergent transitions after warmup");
    }

    Ok(FitResult {
        beta_hat: DVector::from_iterator(p, summaries.iter().map(|s| s.mean)),
        chosen_penalty: None,
        fit_time: start.elapsed().as_secs_f64(),
        posterior: Some(summaries),
        diagnostics: Some(SamplerDiagnostics {
            divergences,
            max_rhat,
            step_sizes: draws.chains.iter().map(|c| c.step_size).collect(),
            accept_stat_means: draws.chains.iter().map(|c| c.accept_stat_mean).collect(),
        }),
        converged: true,
    })
}

pub fn fit_bayes(
    model: BayesModel,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    config: &SamplerConfig,
) -> Result<FitResult> {
    match model {
        BayesModel::Horseshoe => sample_posterior(&HorseshoeTarget::new(x, y)?, config),
        BayesModel::SpikeSlab => sample_posterior(&SpikeSlabTarget::new(x, y)?, config),
    }
}
