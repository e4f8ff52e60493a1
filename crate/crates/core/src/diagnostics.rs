//! Convergence summaries for scalar parameter chains: split-R̂ and effective
//! sample size with Geyer's initial monotone sequence truncation.

use crate::evaluation::quantile_sorted;

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSummary {
    pub mean: f64,
    pub sd: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
    pub ess: f64,
    pub rhat: f64,
    /// Every draw identical; ESS and R̂ are undefined and reported as NaN.
    pub degenerate: bool,
}

/// Summarizes one parameter from one or more equal-length chains.
pub fn summarize_chains(chains: &[&[f64]]) -> ParameterSummary {
    let mut pooled: Vec<f64> = chains.iter().flat_map(|c| c.iter().copied()).collect();
    let m = pooled.len();
    let mean = pooled.iter().sum::<f64>() / m as f64;
    let sd = if m > 1 {
        (pooled.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt()
    } else {
        0.0
    };
    pooled.sort_by(f64::total_cmp);
    let degenerate = m == 0 || pooled[0] == pooled[m - 1];
    let (ess, rhat) = if degenerate {
        (f64::NAN, f64::NAN)
    } else {
        (effective_sample_size(chains), split_rhat(chains))
    };
    ParameterSummary {
        mean,
        sd: if degenerate { 0.0 } else { sd },
        q05: quantile_sorted(&pooled, 0.05),
        q50: quantile_sorted(&pooled, 0.5),
        q95: quantile_sorted(&pooled, 0.95),
        ess,
        rhat,
        degenerate,
    }
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Potential scale reduction computed on chains split in half.
/// NaN when fewer than four draws per chain are available.
pub fn split_rhat(chains: &[&[f64]]) -> f64 {
    let len = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    let half = len / 2;
    if half < 2 {
        return f64::NAN;
    }
    let halves: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| [&c[..half], &c[len - half..len]])
        .collect();
    let stats: Vec<(f64, f64)> = halves.iter().map(|h| mean_var(h)).collect();
    let m = halves.len() as f64;
    let n = half as f64;
    let grand = stats.iter().map(|s| s.0).sum::<f64>() / m;
    let between = n / (m - 1.0) * stats.iter().map(|s| (s.0 - grand).powi(2)).sum::<f64>();
    let within = stats.iter().map(|s| s.1).sum::<f64>() / m;
    if within <= 0.0 {
        return f64::NAN;
    }
    let var_plus = (n - 1.0) / n * within + between / n;
    (var_plus / within).sqrt()
}

fn autocovariance(x: &[f64], mean: f64, lag: usize) -> f64 {
    let n = x.len();
    let mut acc = 0.0;
    for i in 0..n - lag {
        acc += (x[i] - mean) * (x[i + lag] - mean);
    }
    acc / n as f64
}

/// Multi-chain effective sample size. Autocorrelations are combined across
/// chains and summed in adjacent pairs until a pair turns negative, with the
/// pair sums forced to be non-increasing.
pub fn effective_sample_size(chains: &[&[f64]]) -> f64 {
    let len = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    let k = chains.len();
    if len < 4 || k == 0 {
        return f64::NAN;
    }
    let chains: Vec<&[f64]> = chains.iter().map(|c| &c[..len]).collect();
    let stats: Vec<(f64, f64)> = chains.iter().map(|c| mean_var(c)).collect();
    let n = len as f64;
    let within = stats.iter().map(|s| s.1).sum::<f64>() / k as f64;
    let var_plus = if k > 1 {
        let grand = stats.iter().map(|s| s.0).sum::<f64>() / k as f64;
        let between = n / (k as f64 - 1.0) * stats.iter().map(|s| (s.0 - grand).powi(2)).sum::<f64>();
        (n - 1.0) / n * within + between / n
    } else {
        within * (n - 1.0) / n
    };
    if var_plus <= 0.0 {
        return f64::NAN;
    }
    let rho = |lag: usize| {
        let mean_acov = chains
            .iter()
            .zip(&stats)
            .map(|(c, s)| autocovariance(c, s.0, lag))
            .sum::<f64>()
            / k as f64;
        1.0 - (within * (n - 1.0) / n - mean_acov) / var_plus
    };

    let mut sum = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut t = 0;
    while t + 1 < len {
        let pair = rho(t) + rho(t + 1);
        if pair < 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        sum += pair;
        prev_pair = pair;
        t += 2;
    }
    // Σ_{t≥0} pairs counts ρ_0 = 1 once; τ = −1 + 2·Σ pairs.
    let tau = (2.0 * sum - 1.0).max(1.0 / (k as f64 * n).log10().max(1.0));
    k as f64 * n / tau
}
