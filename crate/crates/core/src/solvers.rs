//! Classical estimators: OLS, Ridge with closed-form LOOCV, and Lasso /
//! Elastic Net by cyclic coordinate descent with K-fold CV.
//!
//! Objectives are taken literally, with no intercept:
//!
//! ```text
//! ridge:       (1/2n)||y - X b||^2 + lambda ||b||_2^2
//! elastic net: (1/2n)||y - X b||^2 + lambda [alpha ||b||_1 + (1 - alpha) ||b||_2^2]
//! ```
//!
//! Note the l2 terms carry no factor 1/2.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fit::FitResult;
use crate::rng;

pub const DEFAULT_CD_TOL: f64 = 1e-7;
pub const DEFAULT_CD_MAX_ITER: usize = 10_000;
pub const ELASTIC_NET_ALPHAS: [f64; 7] = [0.1, 0.5, 0.7, 0.9, 0.95, 0.99, 1.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyConfig {
    pub lambda: f64,
    /// l1 mixing weight: 1 is the Lasso, 0 is Ridge.
    pub alpha: f64,
}

impl PenaltyConfig {
    pub fn new(lambda: f64, alpha: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        Ok(Self { lambda, alpha })
    }

    pub fn lasso(lambda: f64) -> Result<Self> {
        Self::new(lambda, 1.0)
    }

    fn l1(&self) -> f64 {
        self.lambda * self.alpha
    }

    fn l2(&self) -> f64 {
        self.lambda * (1.0 - self.alpha)
    }
}

pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

fn check_shapes(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("inputs contain non-finite values"));
    }
    Ok(())
}

/// Ordinary least squares through a thin SVD.
pub fn fit_ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<FitResult> {
    let start = Instant::now();
    check_shapes(x, y)?;
    let (n, p) = x.shape();
    if n < p {
        return Err(Error::invalid(format!("OLS needs n >= p, got n={n}, p={p}")));
    }
    let svd = x.clone().svd(true, true);
    let s = &svd.singular_values;
    let smax = s.max();
    let smin = s.min();
    let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
    if ratio < 1e-10 {
        return Err(Error::RankDeficient { ratio });
    }
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let uty = u.tr_mul(y).component_div(s);
    let beta = v_t.tr_mul(&uty);

    let mut fit = FitResult::point(beta);
    fit.fit_time = start.elapsed().as_secs_f64();
    Ok(fit)
}

/// `count` log-spaced values from `lo` to `hi`, ascending.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    let mut grid: Vec<f64> = (0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect();
    // exact endpoints; lambda_max must survive the round trip through log10
    grid[0] = lo;
    grid[count - 1] = hi;
    grid
}

/// The 50-point grid on `[1e-4, 1e4]` used for Ridge.
pub fn ridge_grid() -> Vec<f64> {
    log_grid(1e-4, 1e4, 50)
}

/// Ridge solutions and exact leave-one-out errors along a lambda grid,
/// all from one SVD of `x`.
#[derive(Debug, Clone)]
pub struct RidgePath {
    pub lambdas: Vec<f64>,
    pub betas: Vec<DVector<f64>>,
    /// Mean squared leave-one-out error per lambda.
    pub loocv_mse: Vec<f64>,
    /// Leave-one-out residuals `e_i / (1 - h_ii)` per lambda.
    pub loo_residuals: Vec<DVector<f64>>,
}

pub fn ridge_path(x: &DMatrix<f64>, y: &DVector<f64>, lambdas: &[f64]) -> Result<RidgePath> {
    check_shapes(x, y)?;
    let n = x.nrows();
    if n < 2 {
        return Err(Error::invalid("ridge LOOCV needs at least two rows"));
    }
    if lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
        return Err(Error::invalid("ridge lambdas must be positive"));
    }
    let svd = x.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let s = &svd.singular_values;
    let uty = u.tr_mul(y);
    let u_sq = u.map(|v| v * v);
    let nf = n as f64;

    let mut out = RidgePath {
        lambdas: lambdas.to_vec(),
        betas: Vec::with_capacity(lambdas.len()),
        loocv_mse: Vec::with_capacity(lambdas.len()),
        loo_residuals: Vec::with_capacity(lambdas.len()),
    };
    for &lambda in lambdas {
        let shrink = 2.0 * nf * lambda;
        let hat_diag_weights = s.map(|sk| sk * sk / (sk * sk + shrink));
        let coef_weights = s.map(|sk| sk / (sk * sk + shrink));

        let fitted = u * uty.component_mul(&hat_diag_weights);
        let leverage = &u_sq * &hat_diag_weights;
        let loo = DVector::from_fn(n, |i, _| (y[i] - fitted[i]) / (1.0 - leverage[i]));

        out.loocv_mse.push(loo.norm_squared() / nf);
        out.loo_residuals.push(loo);
        out.betas.push(v_t.tr_mul(&uty.component_mul(&coef_weights)));
    }
    Ok(out)
}

/// Ridge with lambda chosen by closed-form LOOCV. Ties go to the larger
/// lambda.
pub fn fit_ridge_loocv(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda_grid: &[f64],
) -> Result<FitResult> {
    let start = Instant::now();
    if lambda_grid.is_empty() {
        return Err(Error::invalid("empty ridge grid"));
    }
    let path = ridge_path(x, y, lambda_grid)?;
    let mut best = 0;
    for k in 1..path.lambdas.len() {
        let (cur, inc) = (path.loocv_mse[k], path.loocv_mse[best]);
        if cur < inc || (cur == inc && path.lambdas[k] > path.lambdas[best]) {
            best = k;
        }
    }
    let mut fit = FitResult::point(path.betas[best].clone());
    fit.chosen_penalty = Some(PenaltyConfig::new(path.lambdas[best], 0.0)?);
    fit.fit_time = start.elapsed().as_secs_f64();
    Ok(fit)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdOptions {
    /// Base tolerance; scaled by `max(1, ||beta||_inf)`.
    pub tol: f64,
    /// Cap on full sweeps.
    pub max_iter: usize,
}

impl Default for CdOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_CD_TOL,
            max_iter: DEFAULT_CD_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdOutcome {
    pub beta: DVector<f64>,
    pub converged: bool,
    pub sweeps: usize,
}

fn signs(beta: &DVector<f64>) -> Vec<i8> {
    beta.iter()
        .map(|&b| if b > 0.0 { 1 } else if b < 0.0 { -1 } else { 0 })
        .collect()
}

/// Sufficient statistics `X^T X / n` and `X^T y / n` for covariance-update
/// coordinate descent.
struct Gram {
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
}

impl Gram {
    fn new(x: &DMatrix<f64>, y: &DVector<f64>) -> Self {
        let nf = x.nrows().max(1) as f64;
        Self {
            xtx: x.tr_mul(x) / nf,
            xty: x.tr_mul(y) / nf,
        }
    }

    fn p(&self) -> usize {
        self.xty.len()
    }

    /// Largest KKT violation at `beta`, using `corr = X^T (y - X beta) / n`.
    fn kkt_violation(&self, beta: &DVector<f64>, penalty: &PenaltyConfig) -> f64 {
        let corr = &self.xty - &self.xtx * beta;
        (0..self.p())
            .map(|j| {
                if beta[j] != 0.0 {
                    (corr[j] - 2.0 * penalty.l2() * beta[j] - penalty.l1() * beta[j].signum())
                        .abs()
                } else {
                    (corr[j].abs() - penalty.l1()).max(0.0)
                }
            })
            .fold(0.0, f64::max)
    }

    /// Elastic-Net objective up to the constant `||y||^2 / 2n`.
    fn objective(&self, beta: &DVector<f64>, penalty: &PenaltyConfig) -> f64 {
        0.5 * beta.dot(&(&self.xtx * beta)) - self.xty.dot(beta)
            + penalty.l1() * beta.lp_norm(1)
            + penalty.l2() * beta.norm_squared()
    }

    /// Solves `(G_AA + 2 l2 I) b_A = c_A - l1 s_A` on the active set `A` given
    /// by the nonzero signs; `None` if the block is singular.
    fn active_block_solution(&self, signs: &[i8], penalty: &PenaltyConfig) -> Option<DVector<f64>> {
        let active: Vec<usize> = (0..signs.len()).filter(|&j| signs[j] != 0).collect();
        let mut out = DVector::zeros(self.p());
        if active.is_empty() {
            return Some(out);
        }
        let k = active.len();
        let block = DMatrix::from_fn(k, k, |a, b| {
            self.xtx[(active[a], active[b])] + if a == b { 2.0 * penalty.l2() } else { 0.0 }
        });
        let rhs = DVector::from_fn(k, |a, _| self.xty[active[a]] - penalty.l1() * f64::from(signs[active[a]]));
        let solution = block.cholesky()?.solve(&rhs);
        for (a, &j) in active.iter().enumerate() {
            out[j] = solution[a];
        }
        Some(out)
    }

    fn solve(
        &self,
        penalty: &PenaltyConfig,
        opts: &CdOptions,
        warm_start: &DVector<f64>,
    ) -> CdOutcome {
        let p = self.p();
        let l1 = penalty.l1();
        let l2 = penalty.l2();
        let mut beta = warm_start.clone();
        // running X^T X beta / n
        let mut fitted_corr = &self.xtx * &beta;
        let mut last_signs = signs(&beta);
        let mut next_polish = 2;
        let mut backoff = 4;

        for sweep in 1..=opts.max_iter {
            let mut max_change = 0.0f64;
            for j in 0..p {
                let g = self.xtx[(j, j)];
                let denom = g + 2.0 * l2;
                let old = beta[j];
                let z = self.xty[j] - fitted_corr[j] + g * old;
                let new = if denom > 0.0 {
                    soft_threshold(z, l1) / denom
                } else {
                    0.0
                };
                let delta = new - old;
                if delta != 0.0 {
                    beta[j] = new;
                    fitted_corr.axpy(delta, &self.xtx.column(j), 1.0);
                    max_change = max_change.max(delta.abs());
                }
            }
            let scaled_tol = opts.tol * beta.amax().max(1.0);
            if max_change < scaled_tol {
                fitted_corr = &self.xtx * &beta;
                if self.kkt_violation(&beta, penalty) <= scaled_tol {
                    return CdOutcome {
                        beta,
                        converged: true,
                        sweeps: sweep,
                    };
                }
            }

            // Once the sign pattern settles, jump to the stationary point of
            // the active block. The jump is kept only if it satisfies the
            // KKT conditions; the next sweep then confirms convergence.
            let current = signs(&beta);
            if current == last_signs && sweep >= next_polish {
                match self.active_block_solution(&current, penalty) {
                    Some(candidate)
                        if self.kkt_violation(&candidate, penalty)
                            <= opts.tol * candidate.amax().max(1.0) =>
                    {
                        beta = candidate;
                        fitted_corr = &self.xtx * &beta;
                    }
                    // Not optimal, but still a better iterate to continue from.
                    Some(candidate) if self.objective(&candidate, penalty) < self.objective(&beta, penalty) => {
                        beta = candidate;
                        fitted_corr = &self.xtx * &beta;
                        next_polish = sweep + 2;
                    }
                    _ => {
                        next_polish = sweep + backoff;
                        backoff *= 2;
                    }
                }
            }
            last_signs = current;
        }
        CdOutcome {
            beta,
            converged: false,
            sweeps: opts.max_iter,
        }
    }
}

/// Cyclic coordinate descent on the Elastic-Net objective.
///
/// Converged when a full sweep moves no coordinate by more than
/// `tol * max(1, ||beta||_inf)` and the KKT conditions hold to the same
/// tolerance. Hitting `max_iter` returns the last iterate with
/// `converged = false`.
pub fn coordinate_descent(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    penalty: &PenaltyConfig,
    opts: &CdOptions,
    warm_start: Option<&DVector<f64>>,
) -> Result<CdOutcome> {
    check_shapes(x, y)?;
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let p = x.ncols();
    let start = match warm_start {
        Some(w) if w.len() != p => {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: w.len(),
            })
        }
        Some(w) => w.clone(),
        None => DVector::zeros(p),
    };
    Ok(Gram::new(x, y).solve(penalty, opts, &start))
}

pub fn elastic_net_objective(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    beta: &DVector<f64>,
    penalty: &PenaltyConfig,
) -> f64 {
    let n = x.nrows() as f64;
    let resid = y - x * beta;
    resid.norm_squared() / (2.0 * n) + penalty.l1() * beta.lp_norm(1) + penalty.l2() * beta.norm_squared()
}

/// Smallest lambda at which the all-zero vector is optimal.
pub fn lambda_max(x: &DMatrix<f64>, y: &DVector<f64>, alpha: f64) -> f64 {
    let n = x.nrows() as f64;
    x.tr_mul(y).amax() / n / alpha
}

/// Descending path of `count` log-spaced lambdas from `max` to `ratio * max`.
pub fn lambda_path(max: f64, count: usize, ratio: f64) -> Vec<f64> {
    let mut grid = log_grid(max * ratio, max, count);
    grid.reverse();
    grid
}

#[derive(Debug, Clone, PartialEq)]
pub enum LambdaGrid {
    /// Data-driven path from `lambda_max(alpha)` down to `ratio * lambda_max`.
    Auto { count: usize, ratio: f64 },
    /// Fixed strictly descending grid shared by every alpha.
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvPlan {
    pub n_folds: usize,
    pub lambda_grid: LambdaGrid,
    pub alpha_grid: Vec<f64>,
    pub fold_seed: u64,
    pub cd: CdOptions,
}

impl CvPlan {
    pub fn lasso(fold_seed: u64) -> Self {
        Self {
            n_folds: 5,
            lambda_grid: LambdaGrid::Auto {
                count: 100,
                ratio: 1e-3,
            },
            alpha_grid: vec![1.0],
            fold_seed,
            cd: CdOptions::default(),
        }
    }

    pub fn elastic_net(fold_seed: u64) -> Self {
        Self {
            alpha_grid: ELASTIC_NET_ALPHAS.to_vec(),
            ..Self::lasso(fold_seed)
        }
    }

    fn lambdas_for(&self, x: &DMatrix<f64>, y: &DVector<f64>, alpha: f64) -> Result<Vec<f64>> {
        match &self.lambda_grid {
            LambdaGrid::Auto { count, ratio } => {
                if *count == 0 || !(*ratio > 0.0 && *ratio < 1.0) {
                    return Err(Error::invalid("lambda path needs count >= 1 and 0 < ratio < 1"));
                }
                let max = lambda_max(x, y, alpha);
                if !(max > 0.0) {
                    return Err(Error::invalid("X^T y is zero; lambda path is degenerate"));
                }
                Ok(lambda_path(max, *count, *ratio))
            }
            LambdaGrid::Explicit(grid) => {
                if grid.is_empty() || grid.windows(2).any(|w| !(w[0] > w[1])) || grid[0] <= 0.0 {
                    return Err(Error::invalid("lambda grid must be positive and strictly descending"));
                }
                Ok(grid.clone())
            }
        }
    }
}

/// Shuffled indices `0..n` cut into `k` folds whose sizes differ by at most
/// one. The first `n % k` folds get the extra element. Each fold is sorted.
pub fn kfold_split(n: usize, k: usize, fold_seed: u64) -> Result<Vec<Vec<usize>>> {
    if k == 0 || k > n {
        return Err(Error::invalid(format!("cannot split {n} rows into {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::seeded(fold_seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut offset = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut fold = order[offset..offset + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        offset += size;
    }
    Ok(folds)
}

/// Mean validation MSE over folds for every `(alpha, lambda)` cell.
#[derive(Debug, Clone)]
pub struct CvSurface {
    pub alphas: Vec<f64>,
    /// `lambdas[a]` is the descending path used for `alphas[a]`.
    pub lambdas: Vec<Vec<f64>>,
    pub mean_mse: Vec<Vec<f64>>,
    pub converged: bool,
}

impl CvSurface {
    /// Minimum mean MSE; exact ties prefer larger alpha, then larger lambda.
    pub fn best(&self) -> (usize, usize) {
        let mut best = (0, 0);
        for a in 0..self.alphas.len() {
            for l in 0..self.lambdas[a].len() {
                let (ba, bl) = best;
                let cur = self.mean_mse[a][l];
                let inc = self.mean_mse[ba][bl];
                let better = cur < inc
                    || (cur == inc
                        && (self.alphas[a] > self.alphas[ba]
                            || (self.alphas[a] == self.alphas[ba]
                                && self.lambdas[a][l] > self.lambdas[ba][bl])));
                if better {
                    best = (a, l);
                }
            }
        }
        best
    }
}

pub fn cross_validate(x: &DMatrix<f64>, y: &DVector<f64>, plan: &CvPlan) -> Result<CvSurface> {
    check_shapes(x, y)?;
    let n = x.nrows();
    if plan.n_folds < 2 || n < plan.n_folds {
        return Err(Error::invalid(format!(
            "need 2 <= n_folds <= n, got n_folds={} and n={n}",
            plan.n_folds
        )));
    }
    if plan.alpha_grid.is_empty() || plan.alpha_grid.iter().any(|a| !(*a > 0.0 && *a <= 1.0)) {
        return Err(Error::invalid("alpha grid must be non-empty with values in (0, 1]"));
    }
    let lambdas = plan
        .alpha_grid
        .iter()
        .map(|&a| plan.lambdas_for(x, y, a))
        .collect::<Result<Vec<_>>>()?;
    let folds = kfold_split(n, plan.n_folds, plan.fold_seed)?;

    let per_fold: Vec<(Vec<Vec<f64>>, bool)> = folds
        .par_iter()
        .map(|valid| {
            let mut in_valid = vec![false; n];
            valid.iter().for_each(|&i| in_valid[i] = true);
            let train: Vec<usize> = (0..n).filter(|&i| !in_valid[i]).collect();
            let gram = Gram::new(&x.select_rows(&train), &y.select_rows(&train));
            let x_valid = x.select_rows(valid);
            let y_valid = y.select_rows(valid);

            let mut converged = true;
            let errors = plan
                .alpha_grid
                .iter()
                .zip(&lambdas)
                .map(|(&alpha, path)| {
                    let mut beta = DVector::zeros(x.ncols());
                    path.iter()
                        .map(|&lambda| {
                            let penalty = PenaltyConfig { lambda, alpha };
                            let out = gram.solve(&penalty, &plan.cd, &beta);
                            converged &= out.converged;
                            beta = out.beta;
                            (&y_valid - &x_valid * &beta).norm_squared() / valid.len() as f64
                        })
                        .collect::<Vec<_>>()
                })
                .collect::<Vec<_>>();
            (errors, converged)
        })
        .collect();

    let k = per_fold.len() as f64;
    let mean_mse = lambdas
        .iter()
        .enumerate()
        .map(|(a, path)| {
            (0..path.len())
                .map(|l| per_fold.iter().map(|(e, _)| e[a][l]).sum::<f64>() / k)
                .collect()
        })
        .collect();
    Ok(CvSurface {
        alphas: plan.alpha_grid.clone(),
        lambdas,
        mean_mse,
        converged: per_fold.iter().all(|(_, c)| *c),
    })
}

/// Elastic Net with `(alpha, lambda)` chosen by K-fold CV, refit on all rows
/// along the warm-started path of the chosen alpha.
pub fn fit_elastic_net_cv(x: &DMatrix<f64>, y: &DVector<f64>, plan: &CvPlan) -> Result<FitResult> {
    let start = Instant::now();
    let surface = cross_validate(x, y, plan)?;
    let (a, l) = surface.best();
    let alpha = surface.alphas[a];

    let gram = Gram::new(x, y);
    let mut beta = DVector::zeros(x.ncols());
    let mut converged = surface.converged;
    for &lambda in &surface.lambdas[a][..=l] {
        let out = gram.solve(&PenaltyConfig { lambda, alpha }, &plan.cd, &beta);
        converged &= out.converged;
        beta = out.beta;
    }
    if !converged {
        log::warn!("coordinate descent hit the sweep cap during CV (alpha={alpha})");
    }
    let mut fit = FitResult::point(beta);
    fit.chosen_penalty = Some(PenaltyConfig::new(surface.lambdas[a][l], alpha)?);
    fit.converged = converged;
    fit.fit_time = start.elapsed().as_secs_f64();
    Ok(fit)
}

/// Lasso: the Elastic Net search restricted to `alpha = 1`.
pub fn fit_lasso_cv(x: &DMatrix<f64>, y: &DVector<f64>, plan: &CvPlan) -> Result<FitResult> {
    let lasso_plan = CvPlan {
        alpha_grid: vec![1.0],
        ..plan.clone()
    };
    fit_elastic_net_cv(x, y, &lasso_plan)
}
