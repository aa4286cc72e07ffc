//! One NUTS transition: multinomial sampling over a doubling trajectory,
//! biased progressive sampling when merging at the top level, and the
//! momentum-sum no-U-turn criterion checked across every merge (including
//! the two extended checks that straddle the merge point).

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::hamiltonian::{leapfrog, PhasePoint};
use super::LogDensity;

pub const MAX_DELTA_H: f64 = 1000.0;

#[derive(Debug, Clone)]
pub struct Transition {
    pub point: PhasePoint,
    /// Mean Metropolis acceptance over every leapfrog step in the tree.
    pub accept_stat: f64,
    pub divergent: bool,
    pub tree_depth: usize,
    pub n_leapfrog: usize,
}

struct Subtree {
    proposal: PhasePoint,
    /// Momentum at the edge adjacent to where the subtree was attached.
    p_near: Vec<f64>,
    /// Momentum at the far edge.
    p_far: Vec<f64>,
    rho: Vec<f64>,
    log_sum_weight: f64,
}

struct TreeBuilder<'a, T: ?Sized> {
    target: &'a T,
    h0: f64,
    n_leapfrog: usize,
    sum_metro_prob: f64,
    divergent: bool,
}

fn no_u_turn(p_a: &[f64], p_b: &[f64], rho: &[f64]) -> bool {
    dot(p_a, rho) > 0.0 && dot(p_b, rho) > 0.0
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

impl<'a, T: LogDensity + ?Sized> TreeBuilder<'a, T> {
    /// Extends `edge` by `2^depth` leapfrog steps of size `step`. Returns
    /// `None` when the subtree diverged or contains a U-turn.
    fn build<R: Rng + ?Sized>(
        &mut self,
        edge: &mut PhasePoint,
        depth: usize,
        step: f64,
        rng: &mut R,
    ) -> Option<Subtree> {
        if depth == 0 {
            *edge = leapfrog(self.target, edge, step);
            self.n_leapfrog += 1;
            let h = edge.hamiltonian();
            let log_weight = self.h0 - h;
            self.sum_metro_prob += if log_weight > 0.0 { 1.0 } else { log_weight.exp() };
            if h - self.h0 > MAX_DELTA_H || !edge.is_finite() {
                self.divergent = true;
                return None;
            }
            return Some(Subtree {
                proposal: edge.clone(),
                p_near: edge.momentum.clone(),
                p_far: edge.momentum.clone(),
                rho: edge.momentum.clone(),
                log_sum_weight: log_weight,
            });
        }

        let inner = self.build(edge, depth - 1, step, rng)?;
        let outer = self.build(edge, depth - 1, step, rng)?;

        let log_sum_weight = log_add_exp(inner.log_sum_weight, outer.log_sum_weight);
        let take_outer = outer.log_sum_weight > log_sum_weight
            || rng.random::<f64>() < (outer.log_sum_weight - log_sum_weight).exp();

        let rho = add(&inner.rho, &outer.rho);
        let persist = no_u_turn(&inner.p_near, &outer.p_far, &rho)
            && no_u_turn(&inner.p_near, &outer.p_near, &add(&inner.rho, &outer.p_near))
            && no_u_turn(&inner.p_far, &outer.p_far, &add(&outer.rho, &inner.p_far));
        if !persist {
            return None;
        }
        Some(Subtree {
            proposal: if take_outer { outer.proposal } else { inner.proposal },
            p_near: inner.p_near,
            p_far: outer.p_far,
            rho,
            log_sum_weight,
        })
    }
}

/// Draws a fresh momentum and performs one NUTS transition from `current`.
///
/// `current` must carry a finite log-density and gradient.
pub fn nuts_transition<T: LogDensity + ?Sized, R: Rng + ?Sized>(
    target: &T,
    current: &PhasePoint,
    step_size: f64,
    max_tree_depth: usize,
    rng: &mut R,
) -> Transition {
    let mut start = current.clone();
    start.momentum = (0..start.position.len())
        .map(|_| StandardNormal.sample(rng))
        .collect();

    let mut builder = TreeBuilder {
        target,
        h0: start.hamiltonian(),
        n_leapfrog: 0,
        sum_metro_prob: 0.0,
        divergent: false,
    };

    let mut forward_edge = start.clone();
    let mut backward_edge = start.clone();
    let mut p_fwd = start.momentum.clone();
    let mut p_bck = start.momentum.clone();
    let mut rho = start.momentum.clone();
    let mut log_sum_weight = 0.0;
    let mut sample = start;
    let mut depth = 0;

    while depth < max_tree_depth {
        let forward = rng.random::<bool>();
        let (edge, step) = if forward {
            (&mut forward_edge, step_size)
        } else {
            (&mut backward_edge, -step_size)
        };
        let Some(subtree) = builder.build(edge, depth, step, rng) else {
            break;
        };
        depth += 1;

        if subtree.log_sum_weight > log_sum_weight
            || rng.random::<f64>() < (subtree.log_sum_weight - log_sum_weight).exp()
        {
            sample = subtree.proposal.clone();
        }
        log_sum_weight = log_add_exp(log_sum_weight, subtree.log_sum_weight);

        // old trajectory: attached edge `near_old`, far edge `far_old`
        let (near_old, far_old) = if forward { (&p_fwd, &p_bck) } else { (&p_bck, &p_fwd) };
        let merged_rho = add(&rho, &subtree.rho);
        let persist = no_u_turn(far_old, &subtree.p_far, &merged_rho)
            && no_u_turn(far_old, &subtree.p_near, &add(&rho, &subtree.p_near))
            && no_u_turn(near_old, &subtree.p_far, &add(&subtree.rho, near_old));

        rho = merged_rho;
        if forward {
            p_fwd = subtree.p_far;
        } else {
            p_bck = subtree.p_far;
        }
        if !persist {
            break;
        }
    }

    let accept_stat = if builder.n_leapfrog > 0 {
        builder.sum_metro_prob / builder.n_leapfrog as f64
    } else {
        0.0
    };
    Transition {
        point: sample,
        accept_stat,
        divergent: builder.divergent,
        tree_depth: depth,
        n_leapfrog: builder.n_leapfrog,
    }
}
