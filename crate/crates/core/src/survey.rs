//! Survey-design arithmetic: pseudo-posterior weight scaling and informative
//! Poisson probability-proportional-to-size subsampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Retries before an empty Poisson sample is reported as a degenerate design.
pub const POISSON_RETRIES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyDesign {
    pub raw_weights: Vec<f64>,
    pub scaled_weights: Vec<f64>,
}

impl SurveyDesign {
    pub fn n(&self) -> usize {
        self.raw_weights.len()
    }
}

/// Correctly rounded sum of `values` (Shewchuk's exact partials).
///
/// Scaling relies on this: n equal weights c sum to exactly fl(n·c), so
/// equal raw weights scale to exactly 1.0.
pub fn exact_sum(values: &[f64]) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for &x in values {
        let mut x = x;
        let mut kept = 0;
        for i in 0..partials.len() {
            let mut y = partials[i];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        partials.truncate(kept);
        partials.push(x);
    }
    // Round the partials to nearest, handling the half-way case.
    let mut hi = 0.0;
    if let Some(mut top) = partials.pop() {
        hi = top;
        let mut lo = 0.0;
        while let Some(y) = partials.pop() {
            let x = top;
            hi = x + y;
            lo = y - (hi - x);
            top = hi;
            if lo != 0.0 {
                break;
            }
        }
        if let Some(&next) = partials.last() {
            if (lo < 0.0 && next < 0.0) || (lo > 0.0 && next > 0.0) {
                let y = lo * 2.0;
                let x = hi + y;
                if y == x - hi {
                    hi = x;
                }
            }
        }
    }
    hi
}

/// w̃ᵢ = n·wᵢ/Σⱼwⱼ, so the scaled weights sum to the sample size.
pub fn scale_weights(raw_weights: &[f64]) -> Result<SurveyDesign> {
    if raw_weights.is_empty() {
        return Err(Error::validation("no survey weights supplied"));
    }
    if let Some((i, w)) = raw_weights
        .iter()
        .enumerate()
        .find(|(_, w)| !(w.is_finite() && **w > 0.0))
    {
        return Err(Error::validation(format!(
            "survey weight {i} must be positive and finite, got {w}"
        )));
    }
    let n = raw_weights.len() as f64;
    let total = exact_sum(raw_weights);
    let scaled = raw_weights.iter().map(|w| n * w / total).collect();
    Ok(SurveyDesign {
        raw_weights: raw_weights.to_vec(),
        scaled_weights: scaled,
    })
}

/// sᵢ = exp(wᵢ* + 2·I(Zᵢ = 1)), where w* is the weight standardized to mean
/// zero and unit variance (divisor N).
pub fn make_size_variable(raw_weights: &[f64], response_flags: &[u8]) -> Result<Vec<f64>> {
    let n = raw_weights.len();
    if n < 2 {
        return Err(Error::DegenerateDesign(format!(
            "size variable needs at least 2 units, got {n}"
        )));
    }
    if response_flags.len() != n {
        return Err(Error::dims(format!(
            "{n} weights but {} response flags",
            response_flags.len()
        )));
    }
    if let Some(i) = raw_weights.iter().position(|w| !w.is_finite()) {
        return Err(Error::validation(format!("weight {i} is not finite")));
    }
    if let Some(i) = response_flags.iter().position(|&z| z > 1) {
        return Err(Error::validation(format!(
            "response flag {i} must be 0 or 1, got {}",
            response_flags[i]
        )));
    }
    let mean = raw_weights.iter().sum::<f64>() / n as f64;
    let var = raw_weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / n as f64;
    let sd = var.sqrt();
    if !(sd > 0.0) || sd <= 1e-12 * mean.abs() {
        return Err(Error::DegenerateDesign(
            "survey weights have zero variance; cannot standardize".into(),
        ));
    }
    Ok(raw_weights
        .iter()
        .zip(response_flags)
        .map(|(w, &z)| ((w - mean) / sd + 2.0 * f64::from(z)).exp())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonPpsDesign {
    pub size_vars: Vec<f64>,
    pub inclusion_probs: Vec<f64>,
    pub expected_n: f64,
}

impl PoissonPpsDesign {
    /// πᵢ = min(1, E[n]·sᵢ/Σⱼsⱼ).
    pub fn new(size_vars: Vec<f64>, expected_n: f64) -> Result<Self> {
        if size_vars.is_empty() {
            return Err(Error::DegenerateDesign("empty population".into()));
        }
        if let Some((i, s)) = size_vars
            .iter()
            .enumerate()
            .find(|(_, s)| !(s.is_finite() && **s > 0.0))
        {
            return Err(Error::validation(format!(
                "size variable {i} must be positive and finite, got {s}"
            )));
        }
        if !(expected_n.is_finite() && expected_n > 0.0) {
            return Err(Error::Config(format!(
                "expected sample size must be positive, got {expected_n}"
            )));
        }
        let total: f64 = size_vars.iter().sum();
        let inclusion_probs = size_vars
            .iter()
            .map(|s| (expected_n * s / total).min(1.0))
            .collect();
        Ok(Self {
            size_vars,
            inclusion_probs,
            expected_n,
        })
    }

    pub fn population_size(&self) -> usize {
        self.size_vars.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonSample {
    pub indices: Vec<usize>,
    /// 1/πᵢ for each selected unit, aligned with `indices`.
    pub weights: Vec<f64>,
}

/// Independent Bernoulli(πᵢ) inclusion for every unit; an empty draw is
/// retried up to [`POISSON_RETRIES`] times.
pub fn poisson_pps_sample<R: Rng + ?Sized>(
    design: &PoissonPpsDesign,
    rng: &mut R,
) -> Result<PoissonSample> {
    for _ in 0..=POISSON_RETRIES {
        let indices: Vec<usize> = design
            .inclusion_probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| rng.random::<f64>() < p)
            .map(|(i, _)| i)
            .collect();
        if !indices.is_empty() {
            let weights = indices
                .iter()
                .map(|&i| 1.0 / design.inclusion_probs[i])
                .collect();
            return Ok(PoissonSample { indices, weights });
        }
    }
    Err(Error::ResampleExhausted {
        retries: POISSON_RETRIES,
    })
}
