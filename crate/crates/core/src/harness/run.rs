use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{derive_fit_seed, derive_seed, DatasetKind, ExperimentSpec, GridConfig, ModelKind, ResultRow};
use crate::bayes::{fit_bayes, BayesModel};
use crate::datagen::{generate_dataset, read_diabetes_table, split_standardize, CovarianceSpec, Dataset, DiabetesTable};
use crate::error::{Error, Result};
use crate::fit::FitResult;
use crate::metrics::{calibration_metrics, coefficient_metrics, prediction_metrics, selection_metrics, SELECTION_THRESHOLD};
use crate::sampler::SamplerConfig;
use crate::solvers::{fit_lasso_cv, fit_elastic_net_cv, fit_ols, fit_ridge_loocv, ridge_grid, CvPlan};

/// Shared, read-only state for executing specs.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub base_seed: u64,
    /// Sampler settings; `seed` is replaced per fit.
    pub sampler: SamplerConfig,
    pub diabetes: Option<Arc<DiabetesTable>>,
}

impl RunContext {
    pub fn new(base_seed: u64, sampler: SamplerConfig) -> Self {
        Self {
            base_seed,
            sampler,
            diabetes: None,
        }
    }

    pub fn with_diabetes(mut self, table: DiabetesTable) -> Self {
        self.diabetes = Some(Arc::new(table));
        self
    }

    /// Builds the context for a config, reading the Diabetes table only when
    /// the config asks for that dataset.
    pub fn from_config(config: &GridConfig) -> Result<Self> {
        let mut ctx = Self::new(config.base_seed, config.sampler(0));
        if config.dataset_kinds()?.contains(&DatasetKind::Diabetes) {
            let path = config
                .diabetes_path
                .as_ref()
                .ok_or_else(|| Error::invalid("dataset 'diabetes' requires diabetes_path"))?;
            ctx = ctx.with_diabetes(read_diabetes_table(path)?);
        }
        Ok(ctx)
    }

    fn dataset(&self, spec: &ExperimentSpec) -> Result<Dataset> {
        let seed = derive_seed(spec, self.base_seed);
        match spec.dataset.design() {
            Some(design) => generate_dataset(&CovarianceSpec::new(design, spec.p, spec.rho)?, spec.snr, seed),
            None => {
                let table = self
                    .diabetes
                    .as_ref()
                    .ok_or_else(|| Error::invalid("Diabetes table not loaded"))?;
                split_standardize(table, seed)
            }
        }
    }
}

fn fit_model(spec: &ExperimentSpec, ctx: &RunContext, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<FitResult> {
    // CV folds depend on the data cell only, so Lasso and Elastic Net share them.
    let fold_seed = derive_seed(spec, ctx.base_seed);
    let sampler = SamplerConfig {
        seed: derive_fit_seed(spec, ctx.base_seed),
        ..ctx.sampler.clone()
    };
    match spec.model {
        ModelKind::Ols => fit_ols(x, y),
        ModelKind::Ridge => fit_ridge_loocv(x, y, &ridge_grid()),
        ModelKind::Lasso => fit_lasso_cv(x, y, &CvPlan::lasso(fold_seed)),
        ModelKind::ElasticNet => fit_elastic_net_cv(x, y, &CvPlan::elastic_net(fold_seed)),
        ModelKind::Horseshoe => fit_bayes(BayesModel::Horseshoe, x, y, &sampler),
        ModelKind::SpikeSlab => fit_bayes(BayesModel::SpikeSlab, x, y, &sampler),
    }
}

fn fill_row(row: &mut ResultRow, spec: &ExperimentSpec, ctx: &RunContext) -> Result<()> {
    let data = ctx.dataset(spec)?;

    let start = Instant::now();
    let fit = fit_model(spec, ctx, &data.x_train, &data.y_train)?;
    row.fit_time_s = Some(start.elapsed().as_secs_f64());

    if !fit.converged {
        log::warn!("{spec:?}: solver stopped at its iteration cap");
    }
    let pred = prediction_metrics(&data.y_test, &(&data.x_test * &fit.beta_hat))?;
    row.test_mse = Some(pred.mse);
    row.test_rmse = Some(pred.rmse);
    if let Some(penalty) = fit.chosen_penalty {
        row.chosen_lambda = Some(penalty.lambda);
        row.chosen_alpha = Some(penalty.alpha);
    }
    if let Some(diag) = &fit.diagnostics {
        row.divergences = Some(diag.divergences as u64);
    }

    // Coefficient, selection and calibration metrics need a known truth.
    if let Some(truth) = &data.truth {
        let coef = coefficient_metrics(&fit.beta_hat, &truth.beta_star)?;
        row.coef_l2 = Some(coef.l2_error);
        row.coef_mse = Some(coef.coef_mse);
        let sel = selection_metrics(&fit.beta_hat, &truth.support, SELECTION_THRESHOLD);
        row.precision = Some(sel.precision);
        row.recall = Some(sel.recall);
        row.f1 = Some(sel.f1);
        if let Some(summaries) = &fit.posterior {
            let cal = calibration_metrics(summaries, &truth.beta_star)?;
            row.coverage = Some(cal.coverage);
            row.interval_width = Some(cal.avg_width);
        }
    }
    Ok(())
}

/// Runs one spec. Failures (including sampler aborts) are recorded in the
/// row's `error` field with every metric left empty.
pub fn run_experiment(spec: &ExperimentSpec, ctx: &RunContext) -> ResultRow {
    let mut row = ResultRow::empty(spec);
    if let Err(e) = fill_row(&mut row, spec, ctx) {
        log::warn!("{} {} rho={} snr={} p={} seed={}: {e}", spec.dataset, spec.model, spec.rho, spec.snr, spec.p, spec.seed);
        row = ResultRow::empty(spec);
        row.error = Some(e.to_string());
    }
    row
}

/// Runs every spec on a pool of `jobs` worker threads and returns rows in
/// spec order.
pub fn run_grid(specs: &[ExperimentSpec], ctx: &RunContext, jobs: usize) -> Result<Vec<ResultRow>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let total = specs.len();
    let done = std::sync::atomic::AtomicUsize::new(0);
    Ok(pool.install(|| {
        specs
            .par_iter()
            .map(|spec| {
                let row = run_experiment(spec, ctx);
                let k = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
                log::info!(
                    "[{k}/{total}] {} {} rho={} snr={} p={} seed={} ({:.2}s)",
                    spec.dataset,
                    spec.model,
                    spec.rho,
                    spec.snr,
                    spec.p,
                    spec.seed,
                    row.fit_time_s.unwrap_or(0.0)
                );
                row
            })
            .collect()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(dataset: DatasetKind, model: ModelKind) -> ExperimentSpec {
        ExperimentSpec {
            dataset,
            model,
            rho: if dataset == DatasetKind::Independent { 0.0 } else { 0.3 },
            snr: 2.0,
            p: 20,
            seed: 42,
        }
    }

    fn quick_ctx() -> RunContext {
        RunContext::new(
            0,
            SamplerConfig {
                warmup: 100,
                draws: 100,
                ..SamplerConfig::default()
            },
        )
    }

    #[test]
    fn classical_rows_have_no_calibration() {
        let row = run_experiment(&spec(DatasetKind::Block, ModelKind::Lasso), &quick_ctx());
        assert!(row.error.is_none(), "{:?}", row.error);
        assert!(row.test_mse.is_some() && row.f1.is_some() && row.coef_l2.is_some());
        assert!(row.coverage.is_none() && row.interval_width.is_none() && row.divergences.is_none());
        assert_eq!(row.chosen_alpha, Some(1.0));
    }

    #[test]
    fn bayesian_rows_have_calibration() {
        let row = run_experiment(&spec(DatasetKind::Independent, ModelKind::Horseshoe), &quick_ctx());
        assert!(row.error.is_none(), "{:?}", row.error);
        assert!(row.coverage.is_some() && row.interval_width.is_some() && row.divergences.is_some());
        assert!(row.chosen_lambda.is_none());
    }

    #[test]
    fn missing_diabetes_table_is_a_failed_row() {
        let mut s = spec(DatasetKind::Diabetes, ModelKind::Ols);
        s.rho = 0.0;
        s.snr = 0.0;
        s.p = 10;
        let row = run_experiment(&s, &quick_ctx());
        assert!(row.error.is_some());
        assert!(row.test_mse.is_none() && row.fit_time_s.is_none());
    }

    #[test]
    fn repeat_is_identical() {
        let s = spec(DatasetKind::Toeplitz, ModelKind::SpikeSlab);
        let mut a = run_experiment(&s, &quick_ctx());
        let mut b = run_experiment(&s, &quick_ctx());
        a.fit_time_s = None;
        b.fit_time_s = None;
        assert_eq!(a, b);
    }
}
