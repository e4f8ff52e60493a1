//! Stick-breaking decomposition of a C-category response into C−1
//! conditionally independent weighted Binomial fits.
//!
//! Slice c models Z_c out of n_c = n − Σ_{j<c} Z_j trials with conditional
//! probability p̃_c = p_c / (1 − Σ_{j<c} p_j). Units with n_c = 0 drop out of
//! slice c. Every slice keeps the full-sample scaled weights; they are not
//! renormalized within slices.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::binomial::{fit_with_rng, predict_probabilities, BinomialModelData, PosteriorDraws, SamplerConfig};
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalData {
    /// n×C category counts. Categorical labels give one-hot rows.
    counts: DMatrix<u32>,
    x: DMatrix<f64>,
    xi: DMatrix<f64>,
    w_tilde: Vec<f64>,
}

impl CategoricalData {
    /// Labels are 1-based category indices in `1..=categories`.
    pub fn from_labels(
        labels: &[usize],
        categories: usize,
        x: DMatrix<f64>,
        xi: DMatrix<f64>,
        w_tilde: Vec<f64>,
    ) -> Result<Self> {
        if categories < 2 {
            return Err(Error::validation(format!(
                "need at least 2 categories, got {categories}"
            )));
        }
        let mut counts = DMatrix::zeros(labels.len(), categories);
        for (i, &label) in labels.iter().enumerate() {
            if label == 0 || label > categories {
                return Err(Error::validation(format!(
                    "unit {i}: label {label} outside 1..={categories}"
                )));
            }
            counts[(i, label - 1)] = 1;
        }
        Self::from_counts(counts, x, xi, w_tilde)
    }

    pub fn from_counts(
        counts: DMatrix<u32>,
        x: DMatrix<f64>,
        xi: DMatrix<f64>,
        w_tilde: Vec<f64>,
    ) -> Result<Self> {
        let n = counts.nrows();
        if counts.ncols() < 2 {
            return Err(Error::validation(format!(
                "need at least 2 categories, got {}",
                counts.ncols()
            )));
        }
        if n == 0 {
            return Err(Error::validation("categorical data has no units"));
        }
        if x.nrows() != n || xi.nrows() != n || w_tilde.len() != n {
            return Err(Error::dims(format!(
                "unit counts disagree: counts {n}, X {}, Ξ {}, weights {}",
                x.nrows(),
                xi.nrows(),
                w_tilde.len()
            )));
        }
        for i in 0..n {
            if counts.row(i).iter().all(|&c| c == 0) {
                return Err(Error::validation(format!("unit {i} has no observations")));
            }
        }
        Ok(Self {
            counts,
            x,
            xi,
            w_tilde,
        })
    }

    pub fn n(&self) -> usize {
        self.counts.nrows()
    }

    pub fn categories(&self) -> usize {
        self.counts.ncols()
    }

    pub fn counts(&self) -> &DMatrix<u32> {
        &self.counts
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn xi(&self) -> &DMatrix<f64> {
        &self.xi
    }

    pub fn w_tilde(&self) -> &[f64] {
        &self.w_tilde
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StickBreakingSlice {
    /// 1-based category index in `1..C`.
    pub category: usize,
    pub successes: Vec<u32>,
    pub trials: Vec<u32>,
    /// Units with at least one remaining trial.
    pub keep: Vec<bool>,
}

impl StickBreakingSlice {
    pub fn kept(&self) -> usize {
        self.keep.iter().filter(|&&k| k).count()
    }

    /// Binomial data restricted to the kept units.
    pub fn model_data(&self, data: &CategoricalData) -> Result<BinomialModelData> {
        let rows: Vec<usize> = (0..self.keep.len()).filter(|&i| self.keep[i]).collect();
        if rows.is_empty() {
            return Err(Error::DegenerateData(format!(
                "stick-breaking slice {} has no units with remaining trials",
                self.category
            )));
        }
        BinomialModelData::new_unnormalized(
            rows.iter().map(|&i| self.successes[i]).collect(),
            rows.iter().map(|&i| self.trials[i]).collect(),
            data.x.select_rows(&rows),
            data.xi.select_rows(&rows),
            rows.iter().map(|&i| data.w_tilde[i]).collect(),
        )
    }
}

pub fn to_stick_breaking(data: &CategoricalData) -> Vec<StickBreakingSlice> {
    let n = data.n();
    let mut remaining: Vec<u32> = (0..n).map(|i| data.counts.row(i).iter().sum()).collect();
    let mut slices = Vec::with_capacity(data.categories() - 1);
    for c in 0..data.categories() - 1 {
        let successes: Vec<u32> = (0..n).map(|i| data.counts[(i, c)]).collect();
        let trials = remaining.clone();
        let keep = trials.iter().map(|&t| t > 0).collect();
        for i in 0..n {
            remaining[i] -= successes[i];
        }
        slices.push(StickBreakingSlice {
            category: c + 1,
            successes,
            trials,
            keep,
        });
    }
    slices
}

/// Fits every slice. Slice c runs on stream `(seed, c − 1)`, so with C = 2
/// the result equals a plain binomial fit with the same seed.
pub fn fit_multinomial(data: &CategoricalData, config: &SamplerConfig) -> Result<Vec<PosteriorDraws>> {
    config.validate()?;
    to_stick_breaking(data)
        .par_iter()
        .map(|slice| {
            let label = |e: Error| Error::Slice {
                slice: slice.category,
                source: Box::new(e),
            };
            let model = slice.model_data(data).map_err(label)?;
            let mut rng = RngStream::new(config.seed, slice.category as u64 - 1);
            fit_with_rng(&model, config, &mut rng).map_err(label)
        })
        .collect()
}

/// Converts per-draw conditional probabilities (M×(C−1)) into category
/// probabilities (M×C).
pub fn compose_category_probs(ptilde: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(bad) = ptilde.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
        return Err(Error::domain(format!(
            "conditional probabilities must lie in (0, 1), got {bad}"
        )));
    }
    let (m, slices) = ptilde.shape();
    let mut out = DMatrix::zeros(m, slices + 1);
    for s in 0..m {
        let mut stick = 1.0;
        for c in 0..slices {
            out[(s, c)] = ptilde[(s, c)] * stick;
            stick *= 1.0 - ptilde[(s, c)];
        }
        out[(s, slices)] = stick;
    }
    Ok(out)
}

/// Inverse of [`compose_category_probs`]: p̃_c = p_c / (1 − Σ_{j<c} p_j),
/// with the denominator summed from the tail (Σ_{j≥c} p_j) to avoid
/// cancellation when the remaining stick is short.
pub fn conditional_from_category_probs(probs: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, c) = probs.shape();
    DMatrix::from_fn(m, c.saturating_sub(1), |s, j| {
        let rest: f64 = (j..c).map(|l| probs[(s, l)]).sum();
        probs[(s, j)] / rest
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryPrediction {
    /// One M×C matrix per unit.
    pub per_unit: Vec<DMatrix<f64>>,
    /// m×C posterior means.
    pub mean: DMatrix<f64>,
}

pub fn predict_category_probs(
    slices: &[PosteriorDraws],
    x_new: &DMatrix<f64>,
    xi_new: &DMatrix<f64>,
) -> Result<CategoryPrediction> {
    if slices.is_empty() {
        return Err(Error::dims("no slice draws"));
    }
    let preds = slices
        .iter()
        .map(|d| predict_probabilities(d, x_new, xi_new))
        .collect::<Result<Vec<_>>>()?;
    let m_draws = preds[0].draws.ncols();
    if preds.iter().any(|p| p.draws.ncols() != m_draws) {
        return Err(Error::dims("slices retained different numbers of draws"));
    }
    let units = x_new.nrows();
    let c = slices.len() + 1;
    let mut per_unit = Vec::with_capacity(units);
    let mut mean = DMatrix::zeros(units, c);
    for i in 0..units {
        let ptilde = DMatrix::from_fn(m_draws, slices.len(), |s, j| preds[j].draws[(i, s)]);
        let probs = compose_category_probs(&ptilde)?;
        mean.set_row(i, &probs.row_mean());
        per_unit.push(probs);
    }
    Ok(CategoryPrediction { per_unit, mean })
}

/// Running sums Σ_{c≤y} p_c along each row.
pub fn cumulative_probs(probs: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = probs.clone();
    for mut row in out.row_iter_mut() {
        let mut acc = 0.0;
        for v in row.iter_mut() {
            acc += *v;
            *v = acc;
        }
    }
    out
}
