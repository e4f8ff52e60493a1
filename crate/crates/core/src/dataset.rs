//! In-memory functional data set shared by the commands and the simulation
//! driver.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::CurveGrid;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalDataset {
    pub unit_ids: Vec<String>,
    pub successes: Vec<u32>,
    pub trials: Vec<u32>,
    pub covariate_names: Vec<String>,
    /// n×p scalar covariates, without an intercept column.
    pub covariates: DMatrix<f64>,
    /// n×T curve values.
    pub curves: DMatrix<f64>,
    /// Time labels as supplied.
    pub raw_times: Vec<f64>,
    /// The same grid mapped onto [0, 1].
    pub grid: CurveGrid,
    pub raw_weights: Vec<f64>,
    /// 1-based indices into `category_names`, present for multinomial data.
    pub categories: Option<Vec<usize>>,
    pub category_names: Vec<String>,
}

impl FunctionalDataset {
    pub fn n(&self) -> usize {
        self.unit_ids.len()
    }

    /// Checks shapes and values. Every constructor path ends here.
    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(Error::validation("data set has no units"));
        }
        let lens = [
            ("successes", self.successes.len()),
            ("trials", self.trials.len()),
            ("covariates", self.covariates.nrows()),
            ("curves", self.curves.nrows()),
            ("weights", self.raw_weights.len()),
        ];
        for (what, len) in lens {
            if len != n {
                return Err(Error::dims(format!("{what} has {len} rows, expected {n}")));
            }
        }
        if self.covariate_names.len() != self.covariates.ncols() {
            return Err(Error::dims("covariate names and columns disagree"));
        }
        if self.curves.ncols() != self.grid.len() || self.raw_times.len() != self.grid.len() {
            return Err(Error::dims(format!(
                "curves have {} columns but the grid has {} points",
                self.curves.ncols(),
                self.grid.len()
            )));
        }
        for i in 0..n {
            if self.trials[i] == 0 || self.successes[i] > self.trials[i] {
                return Err(Error::validation(format!(
                    "unit {}: need 0 <= successes <= trials and trials >= 1",
                    self.unit_ids[i]
                )));
            }
            if !(self.raw_weights[i].is_finite() && self.raw_weights[i] > 0.0) {
                return Err(Error::validation(format!(
                    "unit {}: weight must be positive and finite",
                    self.unit_ids[i]
                )));
            }
        }
        if self.covariates.iter().chain(self.curves.iter()).any(|v| !v.is_finite()) {
            return Err(Error::validation("non-finite covariate or curve value"));
        }
        if let Some(labels) = &self.categories {
            if labels.len() != n {
                return Err(Error::dims("category labels and units disagree"));
            }
            let c = self.category_names.len();
            if c < 2 {
                return Err(Error::validation("need at least 2 categories"));
            }
            if let Some(i) = labels.iter().position(|&l| l == 0 || l > c) {
                return Err(Error::validation(format!(
                    "unit {}: category index out of range",
                    self.unit_ids[i]
                )));
            }
        }
        Ok(())
    }

    /// Responses as 0/1 flags; requires single-trial units.
    pub fn response_flags(&self) -> Result<Vec<u8>> {
        self.successes
            .iter()
            .zip(&self.trials)
            .map(|(&z, &n)| {
                if n == 1 {
                    Ok(z as u8)
                } else {
                    Err(Error::validation("binary responses need one trial per unit"))
                }
            })
            .collect()
    }

    pub fn subset(&self, rows: &[usize]) -> FunctionalDataset {
        let pick = |v: &[u32]| rows.iter().map(|&i| v[i]).collect::<Vec<_>>();
        FunctionalDataset {
            unit_ids: rows.iter().map(|&i| self.unit_ids[i].clone()).collect(),
            successes: pick(&self.successes),
            trials: pick(&self.trials),
            covariate_names: self.covariate_names.clone(),
            covariates: self.covariates.select_rows(rows),
            curves: self.curves.select_rows(rows),
            raw_times: self.raw_times.clone(),
            grid: self.grid.clone(),
            raw_weights: rows.iter().map(|&i| self.raw_weights[i]).collect(),
            categories: self
                .categories
                .as_ref()
                .map(|c| rows.iter().map(|&i| c[i]).collect()),
            category_names: self.category_names.clone(),
        }
    }
}

/// Centering and scaling applied to scalar covariates before the intercept
/// column is prepended. Stored with a fit so new units are transformed the
/// same way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateScaling {
    pub names: Vec<String>,
    pub centers: Vec<f64>,
    pub scales: Vec<f64>,
}

impl CovariateScaling {
    pub fn identity(names: &[String]) -> Self {
        Self {
            names: names.to_vec(),
            centers: vec![0.0; names.len()],
            scales: vec![1.0; names.len()],
        }
    }

    /// Column means and sample standard deviations (divisor n − 1).
    pub fn standardizing(names: &[String], covariates: &DMatrix<f64>) -> Result<Self> {
        let n = covariates.nrows();
        if n < 2 {
            return Err(Error::DegenerateData("cannot standardize fewer than 2 units".into()));
        }
        let mut centers = Vec::with_capacity(names.len());
        let mut scales = Vec::with_capacity(names.len());
        for (j, name) in names.iter().enumerate() {
            let col = covariates.column(j);
            let mean = col.mean();
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            if !(var > 0.0) {
                return Err(Error::DegenerateData(format!("covariate `{name}` is constant")));
            }
            centers.push(mean);
            scales.push(var.sqrt());
        }
        Ok(Self {
            names: names.to_vec(),
            centers,
            scales,
        })
    }

    /// n×(1+p) design matrix with a leading intercept column.
    pub fn design(&self, covariates: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if covariates.ncols() != self.names.len() {
            return Err(Error::dims(format!(
                "expected {} covariates, got {}",
                self.names.len(),
                covariates.ncols()
            )));
        }
        Ok(DMatrix::from_fn(covariates.nrows(), self.names.len() + 1, |i, j| {
            if j == 0 {
                1.0
            } else {
                (covariates[(i, j - 1)] - self.centers[j - 1]) / self.scales[j - 1]
            }
        }))
    }

    /// Parameter names for the design columns.
    pub fn coefficient_names(&self) -> Vec<String> {
        std::iter::once("intercept".to_string())
            .chain(self.names.iter().cloned())
            .collect()
    }
}
