//! Sparse linear regression benchmark: synthetic data generation, classical
//! and Bayesian estimators, a NUTS sampler, evaluation metrics and a
//! deterministic grid runner.

pub mod bayes;
pub mod datagen;
pub mod error;
pub mod fit;
pub mod harness;
pub mod metrics;
pub mod rng;
pub mod sampler;
pub mod solvers;
pub mod validate;

pub use error::{Error, Result};
pub use fit::{FitResult, SamplerDiagnostics};
