//! Experiment grid, deterministic execution, CSV persistence and summary
//! tables.

mod config;
mod io;
mod report;
mod run;

pub use config::{apply_subset, parse_subset, GridConfig, SubsetFilter};
pub use io::{load, persist, CSV_HEADER};
pub use report::{aggregate, write_reports, Axis, Metric, Stat, SummaryRow, SummaryTable, REPORT_FILES};
pub use run::{run_experiment, run_grid, RunContext};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datagen::Design;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Independent,
    Block,
    Toeplitz,
    Diabetes,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 4] = [
        DatasetKind::Independent,
        DatasetKind::Block,
        DatasetKind::Toeplitz,
        DatasetKind::Diabetes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::Independent => "independent",
            DatasetKind::Block => "block",
            DatasetKind::Toeplitz => "toeplitz",
            DatasetKind::Diabetes => "diabetes",
        }
    }

    pub fn design(self) -> Option<Design> {
        match self {
            DatasetKind::Independent => Some(Design::Independent),
            DatasetKind::Block => Some(Design::Block),
            DatasetKind::Toeplitz => Some(Design::Toeplitz),
            DatasetKind::Diabetes => None,
        }
    }

    pub fn is_synthetic(self) -> bool {
        self != DatasetKind::Diabetes
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        DatasetKind::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown dataset '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ols,
    Ridge,
    Lasso,
    ElasticNet,
    Horseshoe,
    SpikeSlab,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Ols,
        ModelKind::Ridge,
        ModelKind::Lasso,
        ModelKind::ElasticNet,
        ModelKind::Horseshoe,
        ModelKind::SpikeSlab,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ols => "ols",
            ModelKind::Ridge => "ridge",
            ModelKind::Lasso => "lasso",
            ModelKind::ElasticNet => "elastic_net",
            ModelKind::Horseshoe => "horseshoe",
            ModelKind::SpikeSlab => "spike_slab",
        }
    }

    pub fn is_bayesian(self) -> bool {
        matches!(self, ModelKind::Horseshoe | ModelKind::SpikeSlab)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase().replace('-', "_");
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown model '{s}'")))
    }
}

/// One cell of the experiment grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentSpec {
    pub dataset: DatasetKind,
    pub model: ModelKind,
    pub rho: f64,
    pub snr: f64,
    pub p: usize,
    pub seed: u64,
}

/// Placeholder axes carried by Diabetes specs.
pub const DIABETES_P: usize = 10;

fn stream_seed(text: &str) -> u64 {
    let digest = Sha256::digest(text.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Seed for data generation (or the Diabetes split).
///
/// The first 8 bytes (little-endian) of SHA-256 over
/// `"{dataset}|rho={rho}|snr={snr}|p={p}|seed={seed}|base={base_seed}"`,
/// with floats in Rust's shortest round-trip form. The model is not part of
/// the key, so every model in a cell sees the same data.
pub fn derive_seed(spec: &ExperimentSpec, base_seed: u64) -> u64 {
    stream_seed(&data_key(spec, base_seed))
}

/// Seed for the fit itself (CV folds, sampler chains); the data key plus the
/// model name.
pub fn derive_fit_seed(spec: &ExperimentSpec, base_seed: u64) -> u64 {
    stream_seed(&format!("{}|model={}", data_key(spec, base_seed), spec.model))
}

fn data_key(spec: &ExperimentSpec, base_seed: u64) -> String {
    format!(
        "{}|rho={}|snr={}|p={}|seed={}|base={}",
        spec.dataset, spec.rho, spec.snr, spec.p, spec.seed, base_seed
    )
}

/// Cartesian product of the configured axes.
///
/// Axes are deduplicated and put in canonical order (enum order for
/// datasets and models, ascending for numbers), then expanded in
/// `(dataset, model, rho, snr, p, seed)` order. The independent design only
/// uses `rho = 0`; Diabetes emits one spec per model and seed with
/// placeholder `rho = 0`, `snr = 0`, `p = 10`. Bayesian models are dropped at
/// `p >= 100` unless `bayes_high_dim` is set.
pub fn expand_grid(config: &GridConfig) -> Result<Vec<ExperimentSpec>> {
    let datasets = config.dataset_kinds()?;
    let models = config.model_kinds()?;
    let rhos = sorted_dedup_f64(&config.rhos);
    let snrs = sorted_dedup_f64(&config.snrs);
    let mut ps = config.ps.clone();
    ps.sort_unstable();
    ps.dedup();
    let mut seeds = config.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();

    if datasets.is_empty() || models.is_empty() || seeds.is_empty() {
        return Err(Error::invalid("datasets, models and seeds must all be non-empty"));
    }
    if datasets.iter().any(|d| d.is_synthetic()) {
        if snrs.is_empty() || ps.is_empty() {
            return Err(Error::invalid("synthetic datasets need non-empty snrs and ps"));
        }
        let correlated = datasets.iter().any(|d| matches!(d, DatasetKind::Block | DatasetKind::Toeplitz));
        if correlated && rhos.is_empty() {
            return Err(Error::invalid("correlated designs need a non-empty rhos axis"));
        }
    }

    let mut specs = Vec::new();
    for &dataset in &datasets {
        for &model in &models {
            if dataset == DatasetKind::Diabetes {
                for &seed in &seeds {
                    specs.push(ExperimentSpec {
                        dataset,
                        model,
                        rho: 0.0,
                        snr: 0.0,
                        p: DIABETES_P,
                        seed,
                    });
                }
                continue;
            }
            let dataset_rhos = if dataset == DatasetKind::Independent {
                vec![0.0]
            } else {
                rhos.clone()
            };
            for &rho in &dataset_rhos {
                for &snr in &snrs {
                    for &p in &ps {
                        if model.is_bayesian() && p >= 100 && !config.bayes_high_dim {
                            continue;
                        }
                        for &seed in &seeds {
                            specs.push(ExperimentSpec {
                                dataset,
                                model,
                                rho,
                                snr,
                                p,
                                seed,
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(specs)
}

fn sorted_dedup_f64(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Flat per-experiment record persisted to CSV. Metrics that do not apply
/// to a spec are `None` and serialize as empty cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: DatasetKind,
    pub model: ModelKind,
    pub rho: f64,
    pub snr: f64,
    pub p: usize,
    pub seed: u64,
    pub test_mse: Option<f64>,
    pub test_rmse: Option<f64>,
    pub coef_l2: Option<f64>,
    pub coef_mse: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub coverage: Option<f64>,
    pub interval_width: Option<f64>,
    pub chosen_lambda: Option<f64>,
    pub chosen_alpha: Option<f64>,
    pub divergences: Option<u64>,
    pub fit_time_s: Option<f64>,
    pub error: Option<String>,
}

impl ResultRow {
    pub fn empty(spec: &ExperimentSpec) -> Self {
        Self {
            dataset: spec.dataset,
            model: spec.model,
            rho: spec.rho,
            snr: spec.snr,
            p: spec.p,
            seed: spec.seed,
            test_mse: None,
            test_rmse: None,
            coef_l2: None,
            coef_mse: None,
            precision: None,
            recall: None,
            f1: None,
            coverage: None,
            interval_width: None,
            chosen_lambda: None,
            chosen_alpha: None,
            divergences: None,
            fit_time_s: None,
            error: None,
        }
    }

    pub fn spec(&self) -> ExperimentSpec {
        ExperimentSpec {
            dataset: self.dataset,
            model: self.model,
            rho: self.rho,
            snr: self.snr,
            p: self.p,
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(model: ModelKind, seed: u64) -> ExperimentSpec {
        ExperimentSpec {
            dataset: DatasetKind::Block,
            model,
            rho: 0.3,
            snr: 2.0,
            p: 20,
            seed,
        }
    }

    #[test]
    fn small_grid_count() {
        let config = GridConfig {
            datasets: vec!["independent".into()],
            models: vec!["ols".into(), "lasso".into()],
            rhos: vec![0.0, 0.3, 0.6],
            snrs: vec![0.5, 2.0],
            ps: vec![20],
            seeds: vec![42, 123, 456],
            ..GridConfig::default()
        };
        let specs = expand_grid(&config).unwrap();
        assert_eq!(specs.len(), 12);
        assert!(specs.iter().all(|s| s.rho == 0.0));
    }

    #[test]
    fn full_grid_count() {
        let specs = expand_grid(&GridConfig::default()).unwrap();
        assert_eq!(specs.len(), 360 + 2 * 1440 - 360);
        assert!(!specs
            .iter()
            .any(|s| s.dataset == DatasetKind::Independent && s.rho != 0.0));
        assert!(!specs.iter().any(|s| s.model.is_bayesian() && s.p == 100));

        let with_bayes = GridConfig {
            bayes_high_dim: true,
            ..GridConfig::default()
        };
        assert_eq!(expand_grid(&with_bayes).unwrap().len(), 3240);
    }

    #[test]
    fn grid_order_is_canonical() {
        let config = GridConfig {
            datasets: vec!["toeplitz".into(), "block".into()],
            models: vec!["lasso".into(), "ols".into()],
            rhos: vec![0.9, 0.3],
            snrs: vec![2.0],
            ps: vec![20],
            seeds: vec![7, 3],
            ..GridConfig::default()
        };
        let specs = expand_grid(&config).unwrap();
        assert_eq!(specs[0].dataset, DatasetKind::Block);
        assert_eq!(specs[0].model, ModelKind::Ols);
        assert_eq!((specs[0].rho, specs[0].seed), (0.3, 3));
        assert_eq!(specs[1].seed, 7);
    }

    #[test]
    fn empty_axis_rejected() {
        let config = GridConfig {
            models: vec![],
            ..GridConfig::default()
        };
        assert!(expand_grid(&config).is_err());
        let config = GridConfig {
            snrs: vec![],
            ..GridConfig::default()
        };
        assert!(expand_grid(&config).is_err());
    }

    #[test]
    fn data_seed_ignores_model() {
        assert_eq!(
            derive_seed(&spec(ModelKind::Ols, 42), 0),
            derive_seed(&spec(ModelKind::Horseshoe, 42), 0)
        );
        assert_ne!(
            derive_seed(&spec(ModelKind::Ols, 42), 0),
            derive_seed(&spec(ModelKind::Ols, 123), 0)
        );
        assert_ne!(
            derive_fit_seed(&spec(ModelKind::Ols, 42), 0),
            derive_fit_seed(&spec(ModelKind::Lasso, 42), 0)
        );
    }

    #[test]
    fn data_seed_is_pinned() {
        // SHA-256("block|rho=0.3|snr=2|p=20|seed=42|base=0")[..8], little-endian,
        // computed with Python's hashlib
        assert_eq!(derive_seed(&spec(ModelKind::Ridge, 42), 0), 0x6d0b_47cc_bd33_0d89);
    }

    #[test]
    fn names_round_trip() {
        for m in ModelKind::ALL {
            assert_eq!(m.name().parse::<ModelKind>().unwrap(), m);
        }
        for d in DatasetKind::ALL {
            assert_eq!(d.name().parse::<DatasetKind>().unwrap(), d);
        }
        assert!("bogus".parse::<ModelKind>().is_err());
    }
}
