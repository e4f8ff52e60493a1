//! Synthetic stand-in for a processed accelerometry survey: one log-scale
//! activity curve per unit on a minute grid, an age covariate, positive
//! survey weights, a binary mortality indicator and a six-level
//! death-year/survived category.
//!
//! Curves are a diurnal mean plus six Fourier components with decreasing
//! score variances. The first score falls with age. Mortality follows
//!
//! ```text
//! logit p = intercept + age_effect·(age − 67.5)/10 − curve_effect·(s₁ + s₃/2)
//! ```
//!
//! so the true coefficient function is −curve_effect·(φ₁ + φ₃/2).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::basis::CurveGrid;
use crate::dataset::FunctionalDataset;
use crate::error::{Error, Result};
use crate::rng::RngStream;

const SCORE_SDS: [f64; 6] = [1.2, 0.8, 0.6, 0.4, 0.3, 0.2];

pub const CATEGORY_NAMES: [&str; 6] = ["year1", "year2", "year3", "year4", "year5", "survived"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub units: usize,
    pub grid_points: usize,
    pub seed: u64,
    pub intercept: f64,
    pub age_effect: f64,
    pub curve_effect: f64,
    pub noise_sd: f64,
    /// Log-scale spread of the raw weights.
    pub weight_spread: f64,
    /// Round curves, ages and weights to this many decimals.
    pub decimals: Option<i32>,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            units: 2000,
            grid_points: 1440,
            seed: 0,
            intercept: -2.2,
            age_effect: 0.8,
            curve_effect: 1.0,
            noise_sd: 0.3,
            weight_spread: 0.3,
            decimals: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticPopulation {
    pub dataset: FunctionalDataset,
    /// True coefficient function on the [0, 1] grid.
    pub eta: Vec<f64>,
    /// True success probabilities.
    pub probs: Vec<f64>,
}

/// Orthonormal (under ∫ over [0, 1]) Fourier components, in score order.
fn component(j: usize, t: f64) -> f64 {
    let freq = (j / 2 + 1) as f64;
    let arg = 2.0 * PI * freq * t;
    if j.is_multiple_of(2) {
        2f64.sqrt() * arg.sin()
    } else {
        2f64.sqrt() * arg.cos()
    }
}

fn diurnal_mean(t: f64) -> f64 {
    2.5 + 1.5 * (2.0 * PI * (t - 0.3)).sin()
}

pub fn generate(config: &SyntheticConfig) -> Result<SyntheticPopulation> {
    if config.units < 2 || config.grid_points < 2 {
        return Err(Error::Config(
            "synthetic data needs at least 2 units and 2 grid points".into(),
        ));
    }
    let mut rng = RngStream::new(config.seed, 0);
    let n = config.units;
    let t_len = config.grid_points;
    let grid = CurveGrid::unit(t_len)?;
    let times = grid.times().to_vec();
    let basis = DMatrix::from_fn(t_len, SCORE_SDS.len(), |t, j| component(j, times[t]));
    let mean: Vec<f64> = times.iter().map(|&t| diurnal_mean(t)).collect();

    let mut ages = Vec::with_capacity(n);
    let mut scores = DMatrix::zeros(n, SCORE_SDS.len());
    let mut curves = DMatrix::zeros(n, t_len);
    let mut weights = Vec::with_capacity(n);
    let mut successes = Vec::with_capacity(n);
    let mut categories = Vec::with_capacity(n);
    let mut probs = Vec::with_capacity(n);

    for i in 0..n {
        let age = rng.random_range(50.0..85.0);
        let age_std = (age - 67.5) / 10.0;
        for (j, sd) in SCORE_SDS.iter().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            scores[(i, j)] = sd * z - if j == 0 { 0.5 * age_std } else { 0.0 };
        }
        for t in 0..t_len {
            let noise: f64 = StandardNormal.sample(&mut rng);
            let signal: f64 = (0..SCORE_SDS.len()).map(|j| scores[(i, j)] * basis[(t, j)]).sum();
            curves[(i, t)] = mean[t] + signal + config.noise_sd * noise;
        }
        let logit = config.intercept + config.age_effect * age_std
            - config.curve_effect * (scores[(i, 0)] + 0.5 * scores[(i, 2)]);
        let p = 1.0 / (1.0 + (-logit).exp());
        let died = rng.random::<f64>() < p;

        // Exponential time to death with P(T < 5) = p, binned by year.
        let category = if died {
            let rate = -(-p).ln_1p() / 5.0;
            loop {
                let e: f64 = Exp1.sample(&mut rng);
                let time = e / rate;
                if time < 5.0 {
                    break (time.floor() as usize + 1).min(5);
                }
            }
        } else {
            6
        };
        let w: f64 = StandardNormal.sample(&mut rng);
        weights.push(2.0e4 * (config.weight_spread * w + 0.1 * age_std).exp());
        ages.push(age);
        successes.push(u32::from(died));
        categories.push(category);
        probs.push(p);
    }

    if let Some(d) = config.decimals {
        let scale = 10f64.powi(d);
        let round = |v: &mut f64| *v = (*v * scale).round() / scale;
        curves.iter_mut().for_each(round);
        ages.iter_mut().for_each(round);
        weights.iter_mut().for_each(round);
    }

    let eta = (0..t_len)
        .map(|t| -config.curve_effect * (basis[(t, 0)] + 0.5 * basis[(t, 2)]))
        .collect();
    let width = n.to_string().len().max(4);
    let dataset = FunctionalDataset {
        unit_ids: (0..n).map(|i| format!("U{:0width$}", i + 1)).collect(),
        successes,
        trials: vec![1; n],
        covariate_names: vec!["age".to_string()],
        covariates: DMatrix::from_vec(n, 1, ages),
        curves,
        raw_times: (0..t_len).map(|t| t as f64).collect(),
        grid,
        raw_weights: weights,
        categories: Some(categories),
        category_names: CATEGORY_NAMES.iter().map(|s| s.to_string()).collect(),
    };
    dataset.validate()?;
    Ok(SyntheticPopulation {
        dataset,
        eta,
        probs,
    })
}
