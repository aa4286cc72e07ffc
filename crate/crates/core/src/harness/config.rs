//! Grid configuration file and `--subset` filters.
//!
//! The configuration is a flat TOML file; every key is optional and falls
//! back to the full experiment grid:
//!
//! ```toml
//! datasets = ["independent", "block", "toeplitz"]   # and/or "diabetes"
//! models = ["ols", "ridge", "lasso", "elastic_net", "horseshoe", "spike_slab"]
//! rhos = [0.0, 0.3, 0.6, 0.9]
//! snrs = [0.5, 1.0, 2.0, 5.0]
//! ps = [20, 50, 100]
//! seeds = [42, 123, 456, 789, 1024]
//! base_seed = 0
//! bayes_high_dim = false          # run Bayesian models at p >= 100
//! diabetes_path = "data/diabetes.csv"
//! sampler_chains = 2
//! sampler_warmup = 1000
//! sampler_draws = 2000
//! sampler_target_accept = 0.95
//! sampler_max_tree_depth = 10
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{DatasetKind, ExperimentSpec, ModelKind};
use crate::error::{Error, Result};
use crate::sampler::SamplerConfig;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub datasets: Vec<String>,
    pub models: Vec<String>,
    pub rhos: Vec<f64>,
    pub snrs: Vec<f64>,
    pub ps: Vec<usize>,
    pub seeds: Vec<u64>,
    pub base_seed: u64,
    pub bayes_high_dim: bool,
    pub diabetes_path: Option<PathBuf>,
    pub sampler_chains: usize,
    pub sampler_warmup: usize,
    pub sampler_draws: usize,
    pub sampler_target_accept: f64,
    pub sampler_max_tree_depth: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        let sampler = SamplerConfig::default();
        Self {
            datasets: vec!["independent".into(), "block".into(), "toeplitz".into()],
            models: ModelKind::ALL.iter().map(|m| m.name().to_string()).collect(),
            rhos: vec![0.0, 0.3, 0.6, 0.9],
            snrs: vec![0.5, 1.0, 2.0, 5.0],
            ps: vec![20, 50, 100],
            seeds: vec![42, 123, 456, 789, 1024],
            base_seed: 0,
            bayes_high_dim: false,
            diabetes_path: None,
            sampler_chains: sampler.chains,
            sampler_warmup: sampler.warmup,
            sampler_draws: sampler.draws,
            sampler_target_accept: sampler.target_accept,
            sampler_max_tree_depth: sampler.max_tree_depth,
        }
    }
}

impl GridConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let config: GridConfig = toml::from_str(text).map_err(|e| Error::Config {
            path: origin.to_path_buf(),
            message: e.message().to_string(),
        })?;
        config.validate().map_err(|e| Error::Config {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(config)
    }

    /// Reads a config file; a relative `diabetes_path` is resolved against
    /// the file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::from_toml_str(&text, path)?;
        if let Some(rel) = config.diabetes_path.as_ref().filter(|p| p.is_relative()) {
            if let Some(dir) = path.parent() {
                let candidate = dir.join(rel);
                if candidate.exists() || !rel.exists() {
                    config.diabetes_path = Some(candidate);
                }
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset_kinds()?;
        self.model_kinds()?;
        if self.rhos.iter().any(|r| !(0.0..1.0).contains(r)) {
            return Err(Error::invalid("rhos must lie in [0, 1)"));
        }
        if self.snrs.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::invalid("snrs must be positive"));
        }
        if self.ps.iter().any(|&p| p < 5) {
            return Err(Error::invalid("ps must be >= 5"));
        }
        self.sampler(0).validate()
    }

    pub fn dataset_kinds(&self) -> Result<Vec<DatasetKind>> {
        let mut out = self
            .datasets
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<DatasetKind>>>()?;
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    pub fn model_kinds(&self) -> Result<Vec<ModelKind>> {
        let mut out = self
            .models
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<ModelKind>>>()?;
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// Sampler settings; the per-fit seed is filled in by the runner.
    pub fn sampler(&self, seed: u64) -> SamplerConfig {
        SamplerConfig {
            chains: self.sampler_chains,
            warmup: self.sampler_warmup,
            draws: self.sampler_draws,
            target_accept: self.sampler_target_accept,
            max_tree_depth: self.sampler_max_tree_depth,
            seed,
            ..SamplerConfig::default()
        }
    }
}

/// One `key=value[|value...]` clause of a `--subset` expression.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetFilter {
    pub key: String,
    pub values: Vec<String>,
}

impl SubsetFilter {
    fn matches(&self, spec: &ExperimentSpec) -> Result<bool> {
        let num_eq = |target: f64| -> Result<bool> {
            for v in &self.values {
                let parsed: f64 = v
                    .parse()
                    .map_err(|_| Error::invalid(format!("subset {}: '{v}' is not a number", self.key)))?;
                if parsed == target {
                    return Ok(true);
                }
            }
            Ok(false)
        };
        match self.key.as_str() {
            "dataset" => Ok(self
                .values
                .iter()
                .map(|v| v.parse::<DatasetKind>())
                .collect::<Result<Vec<_>>>()?
                .contains(&spec.dataset)),
            "model" => Ok(self
                .values
                .iter()
                .map(|v| v.parse::<ModelKind>())
                .collect::<Result<Vec<_>>>()?
                .contains(&spec.model)),
            "rho" => num_eq(spec.rho),
            "snr" => num_eq(spec.snr),
            "p" => num_eq(spec.p as f64),
            "seed" => num_eq(spec.seed as f64),
            other => Err(Error::invalid(format!("unknown subset key '{other}'"))),
        }
    }
}

/// Parses `p=20,model=lasso|ridge` into clauses. All clauses must match;
/// alternatives within a clause are separated by `|`.
pub fn parse_subset(expr: &str) -> Result<Vec<SubsetFilter>> {
    expr.split(',')
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .map(|clause| {
            let (key, values) = clause
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("subset clause '{clause}' lacks '='")))?;
            let values: Vec<String> = values
                .split('|')
                .map(|v| v.trim().to_string())
                .filter(|v| !v.is_empty())
                .collect();
            if values.is_empty() {
                return Err(Error::invalid(format!("subset clause '{clause}' has no values")));
            }
            Ok(SubsetFilter {
                key: key.trim().to_ascii_lowercase(),
                values,
            })
        })
        .collect()
}

pub fn apply_subset(specs: Vec<ExperimentSpec>, filters: &[SubsetFilter]) -> Result<Vec<ExperimentSpec>> {
    let mut kept = Vec::with_capacity(specs.len());
    for spec in specs {
        let mut keep = true;
        for f in filters {
            keep &= f.matches(&spec)?;
        }
        if keep {
            kept.push(spec);
        }
    }
    Ok(kept)
}
