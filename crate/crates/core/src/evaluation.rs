//! Scoring, posterior bands and the replicated subsampling study comparing
//! functional and scalar models, weighted and unweighted.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{BasisExpansion, DEFAULT_VARIANCE_THRESHOLD};
use crate::binomial::{fit_with_rng, predict_probabilities, BinomialModelData, SamplerConfig};
use crate::dataset::{CovariateScaling, FunctionalDataset};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::survey::{make_size_variable, poisson_pps_sample, scale_weights, PoissonPpsDesign};

pub const PROB_CLAMP: f64 = 1e-12;

/// Bands from fewer draws than this carry a warning.
pub const MIN_BAND_DRAWS: usize = 100;

/// Mean binary cross-entropy of `p_hat` against 0/1 outcomes, with p̂
/// clamped to [1e-12, 1 − 1e-12].
pub fn binary_cross_entropy(z: &[u8], p_hat: &[f64]) -> Result<f64> {
    if z.len() != p_hat.len() {
        return Err(Error::dims(format!(
            "{} outcomes but {} probabilities",
            z.len(),
            p_hat.len()
        )));
    }
    if z.is_empty() {
        return Err(Error::validation("no units to score"));
    }
    let total: f64 = z
        .iter()
        .zip(p_hat)
        .map(|(&zi, &p)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            if zi == 1 {
                -p.ln()
            } else {
                -(-p).ln_1p()
            }
        })
        .sum();
    Ok(total / z.len() as f64)
}

/// Linearly interpolated sample quantile (the usual "type 7" definition).
/// NaN for empty input.
pub fn quantile(values: &[f64], prob: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, prob)
}

pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        m => {
            let h = (m - 1) as f64 * prob.clamp(0.0, 1.0);
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(m - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CredibleBand {
    pub grid: Vec<f64>,
    pub lower: Vec<f64>,
    pub mean: Vec<f64>,
    pub upper: Vec<f64>,
    pub level: f64,
    /// Set when the band rests on fewer than [`MIN_BAND_DRAWS`] draws.
    pub warning: Option<String>,
}

/// Equal-tailed pointwise band over the columns of `draws` (M×T).
pub fn pointwise_credible_band(draws: &DMatrix<f64>, grid: &[f64], level: f64) -> Result<CredibleBand> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!("band level must lie in (0, 1), got {level}")));
    }
    if draws.ncols() != grid.len() {
        return Err(Error::dims(format!(
            "draws have {} columns, grid has {} points",
            draws.ncols(),
            grid.len()
        )));
    }
    let m = draws.nrows();
    if m == 0 {
        return Err(Error::validation("no draws"));
    }
    let warning = (m < MIN_BAND_DRAWS)
        .then(|| format!("credible band computed from only {m} draws"));
    let alpha = (1.0 - level) / 2.0;
    let t = grid.len();
    let (mut lower, mut mean, mut upper) = (Vec::with_capacity(t), Vec::with_capacity(t), Vec::with_capacity(t));
    for col in draws.column_iter() {
        let mut sorted: Vec<f64> = col.iter().copied().collect();
        sorted.sort_by(f64::total_cmp);
        let avg = if sorted[0] == sorted[m - 1] {
            sorted[0]
        } else {
            sorted.iter().sum::<f64>() / m as f64
        };
        let lo = quantile_sorted(&sorted, alpha);
        let hi = quantile_sorted(&sorted, 1.0 - alpha);
        // Rounding in the mean must not push it outside the band.
        lower.push(lo.min(avg));
        upper.push(hi.max(avg));
        mean.push(avg);
    }
    Ok(CredibleBand {
        grid: grid.to_vec(),
        lower,
        mean,
        upper,
        level,
        warning,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelTag {
    #[serde(rename = "FM-W")]
    FunctionalWeighted,
    #[serde(rename = "SM-W")]
    ScalarWeighted,
    #[serde(rename = "FM-UW")]
    FunctionalUnweighted,
    #[serde(rename = "SM-UW")]
    ScalarUnweighted,
}

impl ModelTag {
    pub const ALL: [ModelTag; 4] = [
        ModelTag::FunctionalWeighted,
        ModelTag::ScalarWeighted,
        ModelTag::FunctionalUnweighted,
        ModelTag::ScalarUnweighted,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelTag::FunctionalWeighted => "FM-W",
            ModelTag::ScalarWeighted => "SM-W",
            ModelTag::FunctionalUnweighted => "FM-UW",
            ModelTag::ScalarUnweighted => "SM-UW",
        }
    }

    pub fn parse(s: &str) -> Option<ModelTag> {
        ModelTag::ALL.into_iter().find(|t| t.as_str() == s)
    }

    pub fn functional(self) -> bool {
        matches!(self, ModelTag::FunctionalWeighted | ModelTag::FunctionalUnweighted)
    }

    pub fn weighted(self) -> bool {
        matches!(self, ModelTag::FunctionalWeighted | ModelTag::ScalarWeighted)
    }

    /// Index of the fit's substream within a replicate (1..=4; 0 is the subsample).
    fn stream_index(self) -> u64 {
        match self {
            ModelTag::FunctionalWeighted => 1,
            ModelTag::FunctionalUnweighted => 2,
            ModelTag::ScalarWeighted => 3,
            ModelTag::ScalarUnweighted => 4,
        }
    }
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BceReport {
    pub model_tag: ModelTag,
    pub replicate: usize,
    pub bce: f64,
    /// Realized subsample size.
    pub sample_size: usize,
    /// Number of basis functions (0 for scalar models).
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeVariable {
    /// exp(standardized weight + 2·response), which over-samples responders.
    Informative,
    /// Equal sizes, i.e. a simple random design.
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyConfig {
    pub replicates: usize,
    pub expected_n: f64,
    pub size_variable: SizeVariable,
    pub threshold: f64,
    pub seed: u64,
    /// Seeds inside are ignored; each fit runs on a derived stream.
    pub sampler: SamplerConfig,
    /// Largest tolerated share of failed replicates.
    pub max_failure_rate: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            replicates: 20,
            expected_n: 300.0,
            size_variable: SizeVariable::Informative,
            threshold: DEFAULT_VARIANCE_THRESHOLD,
            seed: 0,
            sampler: SamplerConfig::default(),
            max_failure_rate: 0.1,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be positive".into()));
        }
        if !(self.expected_n.is_finite() && self.expected_n > 0.0) {
            return Err(Error::Config("expected_n must be positive".into()));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::Config("threshold must lie in (0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.max_failure_rate) {
            return Err(Error::Config("max_failure_rate must lie in [0, 1]".into()));
        }
        self.sampler.validate()
    }
}

/// Per-replicate outcome, kept so callers can inspect failures.
#[derive(Debug)]
pub struct StudyOutcome {
    pub reports: Vec<BceReport>,
    pub failures: Vec<(usize, Error)>,
}

/// Runs the study and fails if more than `max_failure_rate` of the
/// replicates fail.
pub fn run_simulation_study(population: &FunctionalDataset, config: &StudyConfig) -> Result<Vec<BceReport>> {
    let outcome = run_simulation_study_detailed(population, config)?;
    let failed = outcome.failures.len();
    if failed as f64 > config.max_failure_rate * config.replicates as f64 {
        let last = outcome
            .failures
            .last()
            .map(|(r, e)| format!("replicate {r}: {e}"))
            .unwrap_or_default();
        return Err(Error::TooManyFailures {
            failed,
            total: config.replicates,
            last,
        });
    }
    Ok(outcome.reports)
}

pub fn run_simulation_study_detailed(
    population: &FunctionalDataset,
    config: &StudyConfig,
) -> Result<StudyOutcome> {
    config.validate()?;
    population.validate()?;
    let outcomes = population.response_flags()?;
    let sizes = match config.size_variable {
        SizeVariable::Informative => make_size_variable(&population.raw_weights, &outcomes)?,
        SizeVariable::Constant => vec![1.0; population.n()],
    };
    let design = PoissonPpsDesign::new(sizes, config.expected_n)?;
    let master = RngStream::new(config.seed, 0);

    let results: Vec<(usize, Result<Vec<BceReport>>)> = (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            let stream = master.derive(r as u64);
            (r, run_replicate(population, &outcomes, &design, config, r, &stream))
        })
        .collect();

    let mut reports = Vec::with_capacity(4 * config.replicates);
    let mut failures = Vec::new();
    for (r, res) in results {
        match res {
            Ok(mut rows) => reports.append(&mut rows),
            Err(e) => failures.push((r, e)),
        }
    }
    Ok(StudyOutcome { reports, failures })
}

fn run_replicate(
    population: &FunctionalDataset,
    outcomes: &[u8],
    design: &PoissonPpsDesign,
    config: &StudyConfig,
    replicate: usize,
    stream: &RngStream,
) -> Result<Vec<BceReport>> {
    let sample = poisson_pps_sample(design, &mut stream.derive(0))?;
    let sub = population.subset(&sample.indices);
    let weights = scale_weights(&sample.weights)?;

    let basis = BasisExpansion::from_curves(&sub.curves, &sub.grid, config.threshold)?;
    let scaling = CovariateScaling::standardizing(&sub.covariate_names, &sub.covariates)?;
    let x_sub = scaling.design(&sub.covariates)?;
    let x_pop = scaling.design(&population.covariates)?;
    let xi_pop = basis.project_curves(&population.curves)?;

    let full = BinomialModelData::new(
        sub.successes.clone(),
        sub.trials.clone(),
        x_sub,
        basis.scores.clone(),
        weights.scaled_weights,
    )?;

    ModelTag::ALL
        .par_iter()
        .map(|&tag| {
            let mut data = if tag.functional() { full.clone() } else { full.scalar_only() };
            if !tag.weighted() {
                data = data.unweighted();
            }
            let mut rng = stream.derive(tag.stream_index());
            let draws = fit_with_rng(&data, &config.sampler, &mut rng)?;
            let xi = if tag.functional() {
                xi_pop.clone()
            } else {
                DMatrix::zeros(population.n(), 0)
            };
            let pred = predict_probabilities(&draws, &x_pop, &xi)?;
            let bce = binary_cross_entropy(outcomes, pred.mean.as_slice())?;
            Ok(BceReport {
                model_tag: tag,
                replicate,
                bce,
                sample_size: sample.indices.len(),
                k: data.k(),
            })
        })
        .collect()
}

/// Mean and standard error of the BCE for one model across replicates.
pub fn summarize_bce(reports: &[BceReport], tag: ModelTag) -> Option<(f64, f64)> {
    let values: Vec<f64> = reports.iter().filter(|r| r.model_tag == tag).map(|r| r.bce).collect();
    let m = values.len();
    if m == 0 {
        return None;
    }
    let v = DVector::from_vec(values);
    let mean = v.mean();
    let se = if m > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64 / m as f64).sqrt()
    } else {
        f64::NAN
    };
    Some((mean, se))
}
