//! Split-R-hat and effective sample size for one scalar parameter.

use crate::error::{Error, Result};

/// Splits every chain in half (dropping the middle draw of odd-length
/// chains). Each chain must have at least 4 draws.
fn split_halves(chains: &[Vec<f64>]) -> Result<Vec<&[f64]>> {
    if chains.is_empty() {
        return Err(Error::invalid("no chains supplied"));
    }
    let n = chains[0].len();
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::invalid("chains must have equal length"));
    }
    if n < 4 {
        return Err(Error::invalid(format!(
            "need at least 4 draws per chain to split, got {n}"
        )));
    }
    let half = n / 2;
    Ok(chains
        .iter()
        .flat_map(|c| [&c[..half], &c[n - half..]])
        .collect())
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Potential scale reduction on split chains.
///
/// Returns `+inf` when the segments have zero within-variance but disagree,
/// and 1 when every draw is identical.
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<f64> {
    let segments = split_halves(chains)?;
    let n = segments[0].len() as f64;
    let means: Vec<f64> = segments.iter().map(|s| mean(s)).collect();
    let within = segments.iter().map(|s| sample_var(s)).sum::<f64>() / segments.len() as f64;
    let between = n * sample_var(&means);
    if within == 0.0 {
        return Ok(if between == 0.0 { 1.0 } else { f64::INFINITY });
    }
    let var_plus = (n - 1.0) / n * within + between / n;
    Ok((var_plus / within).sqrt())
}

/// Multi-chain effective sample size on split chains with Geyer's initial
/// monotone sequence estimator.
pub fn effective_sample_size(chains: &[Vec<f64>]) -> Result<f64> {
    let segments = split_halves(chains)?;
    let m = segments.len();
    let n = segments[0].len();
    let nf = n as f64;
    let means: Vec<f64> = segments.iter().map(|s| mean(s)).collect();
    let autocov = |lag: usize| -> f64 {
        segments
            .iter()
            .zip(&means)
            .map(|(s, mu)| {
                (0..n - lag)
                    .map(|i| (s[i] - mu) * (s[i + lag] - mu))
                    .sum::<f64>()
                    / nf
            })
            .sum::<f64>()
            / m as f64
    };
    let within = autocov(0) * nf / (nf - 1.0);
    let between = if m > 1 { nf * sample_var(&means) } else { 0.0 };
    let var_plus = (nf - 1.0) / nf * within + between / nf;
    if !(var_plus > 0.0) {
        return Ok((m * n) as f64);
    }
    let rho = |lag: usize| 1.0 - (within - autocov(lag)) / var_plus;

    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let mut pair = rho(lag) + rho(lag + 1);
        if pair < 0.0 {
            break;
        }
        pair = pair.min(prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
        lag += 2;
    }
    let tau = tau.max(1.0 / (m * n) as f64);
    Ok((m * n) as f64 / tau)
}
