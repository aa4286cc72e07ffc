use nalgebra::DVector;

use crate::bayes::CoefficientSummary;
use crate::error::{Error, Result};

pub const SELECTION_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionMetrics {
    pub mse: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientMetrics {
    pub l2_error: f64,
    pub coef_mse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support_size_hat: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationMetrics {
    pub coverage: f64,
    pub avg_width: f64,
}

fn same_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

pub fn prediction_metrics(y_true: &DVector<f64>, y_pred: &DVector<f64>) -> Result<PredictionMetrics> {
    same_len(y_true.len(), y_pred.len())?;
    if y_true.is_empty() {
        return Err(Error::invalid("prediction metrics need at least one observation"));
    }
    let mse = (y_true - y_pred).norm_squared() / y_true.len() as f64;
    Ok(PredictionMetrics {
        mse,
        rmse: mse.sqrt(),
    })
}

pub fn coefficient_metrics(beta_hat: &DVector<f64>, beta_star: &DVector<f64>) -> Result<CoefficientMetrics> {
    same_len(beta_star.len(), beta_hat.len())?;
    if beta_star.is_empty() {
        return Err(Error::invalid("empty coefficient vectors"));
    }
    let l2_error = (beta_hat - beta_star).norm();
    Ok(CoefficientMetrics {
        l2_error,
        coef_mse: l2_error * l2_error / beta_star.len() as f64,
    })
}

/// Support recovery with `S_hat = {j : |beta_hat_j| > threshold}` (strict).
/// F1 is 0 whenever `S_hat` or the intersection is empty.
pub fn selection_metrics(beta_hat: &DVector<f64>, support_true: &[usize], threshold: f64) -> SelectionMetrics {
    let selected: Vec<usize> = (0..beta_hat.len())
        .filter(|&j| beta_hat[j].abs() > threshold)
        .collect();
    let hits = selected.iter().filter(|j| support_true.contains(j)).count();
    let precision = if selected.is_empty() {
        0.0
    } else {
        hits as f64 / selected.len() as f64
    };
    let recall = if support_true.is_empty() {
        0.0
    } else {
        hits as f64 / support_true.len() as f64
    };
    let f1 = if hits == 0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    SelectionMetrics {
        precision,
        recall,
        f1,
        support_size_hat: selected.len(),
    }
}

/// Fraction of true coefficients inside their closed HDI and mean width.
pub fn calibration_metrics(summaries: &[CoefficientSummary], beta_star: &DVector<f64>) -> Result<CalibrationMetrics> {
    same_len(beta_star.len(), summaries.len())?;
    if summaries.is_empty() {
        return Err(Error::invalid("no coefficient summaries"));
    }
    let p = summaries.len() as f64;
    let covered = summaries
        .iter()
        .zip(beta_star.iter())
        .filter(|(s, b)| s.hdi_low <= **b && **b <= s.hdi_high)
        .count();
    Ok(CalibrationMetrics {
        coverage: covered as f64 / p,
        avg_width: summaries.iter().map(CoefficientSummary::width).sum::<f64>() / p,
    })
}
