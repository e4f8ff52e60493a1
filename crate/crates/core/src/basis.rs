//! Empirical functional principal components on a uniform grid.
//!
//! Inner products are grid quadratures, ⟨f, g⟩ = Δt·Σ_t f(t)g(t), and basis
//! columns are orthonormal under that inner product (Δt·ΦᵀΦ = I). The number
//! of retained components K is the smallest count whose cumulative share of
//! the total variance reaches the configured threshold. Each eigencurve is
//! sign-normalized so that its largest-magnitude entry is positive.
//!
//! Centering and the eigendecomposition use the unweighted sample; survey
//! weights play no part in the basis.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_VARIANCE_THRESHOLD: f64 = 0.95;

/// Slack applied when comparing cumulative variance shares with the threshold,
/// so that a full-rank request (threshold 1.0) is not defeated by rounding.
const THRESHOLD_SLACK: f64 = 1e-10;

/// Eigenvalues below this fraction of the leading one are treated as zero.
const NULL_EIGENVALUE_RATIO: f64 = 1e-12;

pub const SIGN_CONVENTION: &str = "largest-magnitude entry of each eigencurve is positive";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveGrid {
    times: Vec<f64>,
    step: f64,
}

impl CurveGrid {
    /// Uniform grid from explicit time points.
    pub fn new(times: Vec<f64>) -> Result<Self> {
        let t = times.len();
        if t < 2 {
            return Err(Error::validation(format!(
                "a curve grid needs at least 2 points, got {t}"
            )));
        }
        if let Some(i) = times.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("grid time {i} is not finite")));
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::validation(format!(
                "grid times must be strictly increasing (index {})",
                i + 1
            )));
        }
        let step = (times[t - 1] - times[0]) / (t - 1) as f64;
        let tol = 1e-9 * step.max(1.0);
        for (i, w) in times.windows(2).enumerate() {
            if ((w[1] - w[0]) - step).abs() > tol {
                return Err(Error::validation(format!(
                    "grid is not uniform: spacing {} at index {} differs from {}",
                    w[1] - w[0],
                    i + 1,
                    step
                )));
            }
        }
        Ok(Self { times, step })
    }

    /// T equally spaced points on [0, 1].
    pub fn unit(t: usize) -> Result<Self> {
        if t < 2 {
            return Err(Error::validation(format!(
                "a curve grid needs at least 2 points, got {t}"
            )));
        }
        let last = (t - 1) as f64;
        Self::new((0..t).map(|i| i as f64 / last).collect())
    }

    /// Validates raw time labels and maps them affinely onto [0, 1].
    pub fn rescaled_to_unit(raw: &[f64]) -> Result<Self> {
        let raw = Self::new(raw.to_vec())?;
        Self::unit(raw.len())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisExpansion {
    pub grid: CurveGrid,
    pub mean_curve: DVector<f64>,
    /// T×K, column k is φ_k on the grid.
    pub basis: DMatrix<f64>,
    /// n×K expansion scores of the curves the basis was built from.
    pub scores: DMatrix<f64>,
    /// Retained eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Cumulative variance shares of the retained components.
    pub var_explained: Vec<f64>,
    pub total_variance: f64,
    pub threshold: f64,
}

impl BasisExpansion {
    /// Centers `curves` (n×T) and runs [`compute_fpca`].
    pub fn from_curves(curves: &DMatrix<f64>, grid: &CurveGrid, threshold: f64) -> Result<Self> {
        let (mean, centered) = center_curves(curves)?;
        Ok(compute_fpca(&centered, grid, threshold)?.with_mean_curve(mean))
    }

    pub fn with_mean_curve(mut self, mean_curve: DVector<f64>) -> Self {
        assert_eq!(mean_curve.len(), self.grid.len(), "mean curve length");
        self.mean_curve = mean_curve;
        self
    }

    pub fn k(&self) -> usize {
        self.basis.ncols()
    }

    /// Largest |Δt·ΦᵀΦ − I| entry.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.basis.transpose() * &self.basis * self.grid.step();
        let k = self.k();
        (gram - DMatrix::<f64>::identity(k, k)).amax()
    }

    /// Scores of every row of `curves` (m×T).
    pub fn project_curves(&self, curves: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if curves.ncols() != self.grid.len() {
            return Err(Error::validation(format!(
                "curves have {} grid points, basis has {}",
                curves.ncols(),
                self.grid.len()
            )));
        }
        let mut centered = curves.clone();
        for mut row in centered.row_iter_mut() {
            row -= self.mean_curve.transpose();
        }
        Ok(centered * &self.basis * self.grid.step())
    }
}

/// Column means and the centered copy of an n×T curve matrix.
pub fn center_curves(curves: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (n, t) = curves.shape();
    if n < 2 {
        return Err(Error::validation(format!(
            "need at least 2 curves to center, got {n}"
        )));
    }
    if t == 0 {
        return Err(Error::validation("curves have no grid points"));
    }
    for j in 0..t {
        for i in 0..n {
            if !curves[(i, j)].is_finite() {
                return Err(Error::validation(format!(
                    "non-finite curve value at row {i}, column {j}"
                )));
            }
        }
    }
    let mean = curves.row_mean().transpose();
    let mut centered = curves.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    Ok((mean, centered))
}

/// Eigendecomposition of the sample covariance operator of centered curves.
///
/// Works on whichever of the n×n Gram matrix or the T×T covariance is
/// smaller; both have the same nonzero spectrum.
pub fn compute_fpca(
    centered: &DMatrix<f64>,
    grid: &CurveGrid,
    threshold: f64,
) -> Result<BasisExpansion> {
    let (n, t) = centered.shape();
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Config(format!(
            "variance threshold must lie in (0, 1], got {threshold}"
        )));
    }
    if n < 2 {
        return Err(Error::validation(format!(
            "need at least 2 curves for FPCA, got {n}"
        )));
    }
    if t != grid.len() {
        return Err(Error::dims(format!(
            "curves have {t} columns, grid has {} points",
            grid.len()
        )));
    }
    if centered.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("non-finite value in centered curves"));
    }
    let dt = grid.step();
    let scale = dt / (n - 1) as f64;
    let total_variance = centered.norm_squared() * scale;
    if total_variance <= 0.0 {
        return Err(Error::DegenerateData(
            "centered curves are identically zero; no variance to explain".into(),
        ));
    }

    let use_gram = n <= t;
    let operator = if use_gram {
        centered * centered.transpose() * scale
    } else {
        centered.transpose() * centered * scale
    };
    let eig = SymmetricEigen::new(operator);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let leading = eig.eigenvalues[order[0]].max(0.0);
    let mut eigenvalues = Vec::new();
    let mut var_explained = Vec::new();
    let mut cumulative = 0.0;
    for &idx in &order {
        let lambda = eig.eigenvalues[idx].max(0.0);
        if lambda <= NULL_EIGENVALUE_RATIO * leading {
            break;
        }
        cumulative += lambda;
        eigenvalues.push(lambda);
        var_explained.push((cumulative / total_variance).min(1.0));
        if cumulative / total_variance >= threshold - THRESHOLD_SLACK {
            break;
        }
    }
    let k = eigenvalues.len();

    let mut basis = DMatrix::<f64>::zeros(t, k);
    for (col, &idx) in order.iter().take(k).enumerate() {
        let v = eig.eigenvectors.column(idx);
        let direction = if use_gram {
            centered.transpose() * v
        } else {
            v.into_owned()
        };
        basis.set_column(col, &direction);
    }
    orthonormalize(&mut basis, dt);
    for mut col in basis.column_iter_mut() {
        let pivot = col.iamax();
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
    }
    let scores = centered * &basis * dt;

    Ok(BasisExpansion {
        grid: grid.clone(),
        mean_curve: DVector::zeros(t),
        basis,
        scores,
        eigenvalues,
        var_explained,
        total_variance,
        threshold,
    })
}

/// Modified Gram–Schmidt under ⟨f, g⟩ = Δt·fᵀg.
fn orthonormalize(basis: &mut DMatrix<f64>, dt: f64) {
    for j in 0..basis.ncols() {
        for i in 0..j {
            let proj = basis.column(i).dot(&basis.column(j)) * dt;
            let prev = basis.column(i).into_owned();
            basis.column_mut(j).axpy(-proj, &prev, 1.0);
        }
        let norm = (basis.column(j).norm_squared() * dt).sqrt();
        basis.column_mut(j).unscale_mut(norm);
    }
}

/// Δt·Φᵀ(curve − mean).
pub fn project_curve(curve: &DVector<f64>, expansion: &BasisExpansion) -> Result<DVector<f64>> {
    if curve.len() != expansion.grid.len() {
        return Err(Error::validation(format!(
            "curve has {} points, basis grid has {}",
            curve.len(),
            expansion.grid.len()
        )));
    }
    Ok(expansion.basis.tr_mul(&(curve - &expansion.mean_curve)) * expansion.grid.step())
}

/// η(t) = Σ_k b(k)φ_k(t) for each row of an M×K coefficient matrix.
pub fn reconstruct_eta(b_draws: &DMatrix<f64>, expansion: &BasisExpansion) -> Result<DMatrix<f64>> {
    if b_draws.ncols() != expansion.k() {
        return Err(Error::dims(format!(
            "coefficient draws have {} columns, basis has K = {}",
            b_draws.ncols(),
            expansion.k()
        )));
    }
    Ok(b_draws * expansion.basis.transpose())
}
