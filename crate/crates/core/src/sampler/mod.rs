//! Gradient-based No-U-Turn sampler with dual-averaging step-size
//! adaptation and an identity mass matrix.
//!
//! Targets are unconstrained log-densities supplied through [`LogDensity`].
//! Each chain is a pure function of `(target, config, chain index)`: its
//! generator is stream `chain` of the xoshiro family rooted at
//! `config.seed`.

mod adapt;
mod diagnostics;
mod hamiltonian;
mod nuts;

pub use adapt::{dual_averaging_adapt, find_reasonable_step_size, DualAverageOptions, DualAveraging};
pub use diagnostics::{effective_sample_size, split_rhat};
pub use hamiltonian::{leapfrog, PhasePoint};
pub use nuts::{nuts_transition, Transition, MAX_DELTA_H};

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;

/// An unconstrained target density.
///
/// Implementations must be deterministic and safe to evaluate from several
/// chains at once.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    /// Writes the gradient into `grad` and returns the log-density. A
    /// non-finite return marks the point as outside the support.
    fn logp_grad(&self, position: &[f64], grad: &mut [f64]) -> f64;
}

/// Adapter turning a closure into a [`LogDensity`].
pub struct FnDensity<F> {
    dim: usize,
    f: F,
}

impl<F> FnDensity<F>
where
    F: Fn(&[f64], &mut [f64]) -> f64 + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> LogDensity for FnDensity<F>
where
    F: Fn(&[f64], &mut [f64]) -> f64 + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn logp_grad(&self, position: &[f64], grad: &mut [f64]) -> f64 {
        (self.f)(position, grad)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub chains: usize,
    pub warmup: usize,
    /// Post-warmup draws per chain.
    pub draws: usize,
    pub target_accept: f64,
    pub max_tree_depth: usize,
    pub seed: u64,
    /// Standard deviation of the initial position around the origin.
    pub init_jitter: f64,
    pub dual_averaging: DualAverageOptions,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            chains: 2,
            warmup: 1000,
            draws: 2000,
            target_accept: 0.95,
            max_tree_depth: 10,
            seed: 0,
            init_jitter: 0.1,
            dual_averaging: DualAverageOptions::default(),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 || self.warmup == 0 || self.draws == 0 {
            return Err(Error::invalid("chains, warmup and draws must all be >= 1"));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::invalid("target_accept must lie in (0, 1)"));
        }
        if self.max_tree_depth == 0 {
            return Err(Error::invalid("max_tree_depth must be >= 1"));
        }
        if !(self.init_jitter >= 0.0) {
            return Err(Error::invalid("init_jitter must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainDraws {
    /// Row-major `draws x dim`.
    pub samples: Vec<f64>,
    pub divergences: usize,
    pub warmup_divergences: usize,
    pub step_size: f64,
    pub accept_stat_mean: f64,
    pub mean_tree_depth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub dim: usize,
    pub draws: usize,
    pub chains: Vec<ChainDraws>,
}

impl PosteriorDraws {
    pub fn sample(&self, chain: usize, draw: usize) -> &[f64] {
        &self.chains[chain].samples[draw * self.dim..(draw + 1) * self.dim]
    }

    /// Draws of parameter `index`, one vector per chain.
    pub fn parameter(&self, index: usize) -> Vec<Vec<f64>> {
        self.chains
            .iter()
            .map(|c| c.samples.iter().skip(index).step_by(self.dim).copied().collect())
            .collect()
    }

    pub fn divergences(&self) -> usize {
        self.chains.iter().map(|c| c.divergences).sum()
    }

    pub fn accept_stat_mean(&self) -> f64 {
        self.chains.iter().map(|c| c.accept_stat_mean).sum::<f64>() / self.chains.len() as f64
    }
}

fn initial_point<T: LogDensity + ?Sized>(
    target: &T,
    jitter: f64,
    rng: &mut rng::BenchRng,
) -> Result<PhasePoint> {
    let dim = target.dim();
    let normal = Normal::new(0.0, jitter.max(f64::MIN_POSITIVE)).expect("valid jitter");
    for _ in 0..100 {
        let position: Vec<f64> = (0..dim).map(|_| normal.sample(rng)).collect();
        let point = PhasePoint::new(target, position, vec![0.0; dim]);
        if point.is_finite() {
            return Ok(point);
        }
    }
    Err(Error::SamplerAbort(
        "no finite initial point found after 100 attempts".to_string(),
    ))
}

/// Runs one chain: jittered start, warmup with dual averaging, then `draws`
/// transitions at the frozen step size.
pub fn run_chain<T: LogDensity + ?Sized>(
    target: &T,
    config: &SamplerConfig,
    chain: usize,
) -> Result<ChainDraws> {
    config.validate()?;
    let dim = target.dim();
    let mut rng = rng::substream(config.seed, chain);
    let mut point = initial_point(target, config.init_jitter, &mut rng)?;

    let initial_step = find_reasonable_step_size(target, &point, 1.0, &mut rng);
    let mut adapter = DualAveraging::new(initial_step, config.dual_averaging);
    let mut warmup_divergences = 0;
    for _ in 0..config.warmup {
        let t = nuts_transition(
            target,
            &point,
            adapter.current_step_size(),
            config.max_tree_depth,
            &mut rng,
        );
        warmup_divergences += usize::from(t.divergent);
        adapter.update(t.accept_stat, config.target_accept);
        point = t.point;
    }
    if warmup_divergences as f64 > 0.9 * config.warmup as f64 {
        return Err(Error::SamplerAbort(format!(
            "chain {chain}: {warmup_divergences} of {} warmup transitions diverged",
            config.warmup
        )));
    }

    let step_size = adapter.adapted_step_size();
    let mut samples = Vec::with_capacity(config.draws * dim);
    let mut divergences = 0;
    let mut accept_sum = 0.0;
    let mut depth_sum = 0usize;
    for _ in 0..config.draws {
        let t = nuts_transition(target, &point, step_size, config.max_tree_depth, &mut rng);
        divergences += usize::from(t.divergent);
        accept_sum += t.accept_stat;
        depth_sum += t.tree_depth;
        point = t.point;
        samples.extend_from_slice(&point.position);
    }
    let draws = config.draws as f64;
    Ok(ChainDraws {
        samples,
        divergences,
        warmup_divergences,
        step_size,
        accept_stat_mean: accept_sum / draws,
        mean_tree_depth: depth_sum as f64 / draws,
    })
}

/// Runs `config.chains` independent chains in parallel.
pub fn run_chains<T: LogDensity + ?Sized>(target: &T, config: &SamplerConfig) -> Result<PosteriorDraws> {
    config.validate()?;
    let chains = (0..config.chains)
        .into_par_iter()
        .map(|c| run_chain(target, config, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(PosteriorDraws {
        dim: target.dim(),
        draws: config.draws,
        chains,
    })
}

/// Split-R-hat of every parameter.
pub fn rhat_all(draws: &PosteriorDraws) -> Result<Vec<f64>> {
    (0..draws.dim).map(|j| split_rhat(&draws.parameter(j))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_normal(dim: usize) -> FnDensity<impl Fn(&[f64], &mut [f64]) -> f64 + Sync> {
        FnDensity::new(dim, |q: &[f64], g: &mut [f64]| {
            for (gi, qi) in g.iter_mut().zip(q) {
                *gi = -qi;
            }
            -0.5 * q.iter().map(|v| v * v).sum::<f64>()
        })
    }

    #[test]
    fn leapfrog_fixed_point() {
        let target = std_normal(3);
        let start = PhasePoint::new(&target, vec![0.0; 3], vec![0.0; 3]);
        let next = leapfrog(&target, &start, 0.3);
        assert_eq!(next.position, start.position);
        assert_eq!(next.momentum, start.momentum);
    }

    #[test]
    fn leapfrog_reversible() {
        let target = std_normal(4);
        let start = PhasePoint::new(&target, vec![0.3, -1.2, 2.0, 0.1], vec![1.0, 0.5, -0.7, 0.2]);
        let mut fwd = leapfrog(&target, &start, 0.2);
        fwd.momentum.iter_mut().for_each(|p| *p = -*p);
        let back = leapfrog(&target, &fwd, 0.2);
        for i in 0..4 {
            assert!((back.position[i] - start.position[i]).abs() < 1e-10);
            assert!((back.momentum[i] + start.momentum[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn cliff_triggers_divergence() {
        // logp = -inf beyond q > 0.5
        let target = FnDensity::new(1, |q: &[f64], g: &mut [f64]| {
            g[0] = -q[0];
            if q[0] > 0.5 {
                f64::NEG_INFINITY
            } else {
                -0.5 * q[0] * q[0]
            }
        });
        let start = PhasePoint::new(&target, vec![0.4], vec![0.0]);
        let mut rng = rng::seeded(5);
        let mut saw_divergence = false;
        for _ in 0..50 {
            let t = nuts_transition(&target, &start, 0.5, 10, &mut rng);
            assert!(t.point.is_finite());
            saw_divergence |= t.divergent;
        }
        assert!(saw_divergence);
    }

    #[test]
    fn tiny_step_barely_moves() {
        let target = std_normal(2);
        let start = PhasePoint::new(&target, vec![0.5, -0.5], vec![0.0; 2]);
        let t = nuts_transition(&target, &start, 1e-6, 3, &mut rng::seeded(2));
        assert!(t.accept_stat > 0.999_999);
        let moved: f64 = t
            .point
            .position
            .iter()
            .zip(&start.position)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(moved < 1e-4);
    }

    #[test]
    fn config_validation() {
        let bad = SamplerConfig {
            target_accept: 1.0,
            ..SamplerConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(SamplerConfig {
            draws: 0,
            ..SamplerConfig::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn shape_and_determinism() {
        let target = std_normal(3);
        let config = SamplerConfig {
            warmup: 100,
            draws: 50,
            seed: 11,
            ..SamplerConfig::default()
        };
        let a = run_chains(&target, &config).unwrap();
        let b = run_chains(&target, &config).unwrap();
        assert_eq!(a.chains.len(), 2);
        assert_eq!(a.chains[0].samples.len(), 150);
        assert_eq!(a, b);
        assert_ne!(a.chains[0].samples, a.chains[1].samples);
    }
}
