use nalgebra::DVector;

use crate::bayes::CoefficientSummary;
use crate::solvers::PenaltyConfig;

/// Common result record for all six estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub beta_hat: DVector<f64>,
    pub chosen_penalty: Option<PenaltyConfig>,
    /// Wall-clock seconds spent inside the fit call.
    pub fit_time: f64,
    /// Per-coefficient posterior summaries; Bayesian fits only.
    pub posterior: Option<Vec<CoefficientSummary>>,
    pub diagnostics: Option<SamplerDiagnostics>,
    /// False when an iterative solver stopped at its iteration cap.
    pub converged: bool,
}

impl FitResult {
    pub(crate) fn point(beta_hat: DVector<f64>) -> Self {
        Self {
            beta_hat,
            chosen_penalty: None,
            fit_time: 0.0,
            posterior: None,
            diagnostics: None,
            converged: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerDiagnostics {
    pub divergences: usize,
    /// Largest split-R-hat over the regression coefficients.
    pub max_rhat: f64,
    pub step_sizes: Vec<f64>,
    pub accept_stat_means: Vec<f64>,
}
