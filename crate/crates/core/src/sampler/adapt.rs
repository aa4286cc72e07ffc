use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::hamiltonian::{leapfrog, PhasePoint};
use super::LogDensity;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualAverageOptions {
    pub gamma: f64,
    pub t0: f64,
    pub kappa: f64,
    /// The recursion shrinks toward `log(mu_factor * initial_step)`.
    pub mu_factor: f64,
}

impl Default for DualAverageOptions {
    fn default() -> Self {
        Self {
            gamma: 0.05,
            t0: 10.0,
            kappa: 0.75,
            mu_factor: 10.0,
        }
    }
}

/// Nesterov dual averaging on `log(step_size)`.
#[derive(Debug, Clone)]
pub struct DualAveraging {
    options: DualAverageOptions,
    mu: f64,
    hbar: f64,
    log_step: f64,
    log_step_avg: f64,
    count: u64,
}

impl DualAveraging {
    pub fn new(initial_step: f64, options: DualAverageOptions) -> Self {
        Self {
            options,
            mu: (options.mu_factor * initial_step).ln(),
            hbar: 0.0,
            log_step: initial_step.ln(),
            log_step_avg: 0.0,
            count: 0,
        }
    }

    pub fn update(&mut self, accept_stat: f64, target_accept: f64) {
        let DualAverageOptions { gamma, t0, kappa, .. } = self.options;
        self.count += 1;
        let t = self.count as f64;
        let w = 1.0 / (t + t0);
        self.hbar = (1.0 - w) * self.hbar + w * (target_accept - accept_stat);
        self.log_step = self.mu - t.sqrt() / gamma * self.hbar;
        let m = t.powf(-kappa);
        self.log_step_avg = m * self.log_step + (1.0 - m) * self.log_step_avg;
    }

    /// Step size to use for the next warmup transition.
    pub fn current_step_size(&self) -> f64 {
        self.log_step.exp()
    }

    /// Averaged iterate; frozen as the sampling step size after warmup.
    pub fn adapted_step_size(&self) -> f64 {
        if self.count == 0 {
            self.log_step.exp()
        } else {
            self.log_step_avg.exp()
        }
    }

    /// Shrinkage point `exp(mu)` of the recursion.
    pub fn shrinkage_target(&self) -> f64 {
        self.mu.exp()
    }
}

/// Runs the recursion over a stream of acceptance statistics and returns
/// the averaged step size.
pub fn dual_averaging_adapt(
    accept_stats: &[f64],
    target_accept: f64,
    initial_step: f64,
    options: DualAverageOptions,
) -> f64 {
    let mut da = DualAveraging::new(initial_step, options);
    for &a in accept_stats {
        da.update(a, target_accept);
    }
    da.adapted_step_size()
}

/// Doubles or halves the step size until the one-step acceptance ratio
/// crosses 0.5.
pub fn find_reasonable_step_size<T: LogDensity + ?Sized, R: Rng + ?Sized>(
    target: &T,
    point: &PhasePoint,
    initial: f64,
    rng: &mut R,
) -> f64 {
    let mut start = point.clone();
    start.momentum = (0..start.position.len())
        .map(|_| StandardNormal.sample(rng))
        .collect();
    let h0 = start.hamiltonian();
    let log_ratio = |eps: f64| {
        let next = leapfrog(target, &start, eps);
        let r = h0 - next.hamiltonian();
        if r.is_nan() {
            f64::NEG_INFINITY
        } else {
            r
        }
    };

    let mut eps = initial;
    let half = 0.5f64.ln();
    let direction = if log_ratio(eps) > half { 1.0 } else { -1.0 };
    for _ in 0..100 {
        let r = log_ratio(eps);
        if direction * r <= direction * half {
            break;
        }
        eps *= 2f64.powf(direction);
    }
    eps.clamp(1e-10, 1e3)
}
