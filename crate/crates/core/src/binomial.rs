//! Gibbs sampler for the survey-weighted Binomial pseudo-likelihood model
//!
//! ```text
//! Z | β, b   ∝ ∏ Bin(Zᵢ | nᵢ, pᵢ)^{w̃ᵢ}
//! logit(pᵢ)  = xᵢ'β + Σ_k b(k)ξᵢ(k)
//! β          ~ N_q(0, σ²_β I)
//! b(k)       ~ N(0, λ_k² τ²)
//! λ_k² | ν_k ~ IG(1/2, 1/ν_k),  τ² | ν_τ ~ IG(1/2, 1/ν_τ)
//! ν_k, ν_τ   ~ IG(1/2, 1)
//! ```
//!
//! with Pólya-Gamma augmentation ωᵢ ~ PG(w̃ᵢnᵢ, ψᵢ). Each sweep updates
//! ω → b → β → λ² → τ² → ν, drawing β and b as two separate Gaussian blocks.
//! Setting every w̃ᵢ = 1 gives the ordinary (unweighted) model through the
//! same code path.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{
    cholesky_with_jitter, sample_inverse_gamma, sample_mvn_from_precision, sample_polya_gamma,
    PolyaGammaParams,
};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Linear predictors are clamped to ±35 before the logistic transform when
/// reporting probabilities. The sampler itself never clamps.
pub const PREDICTOR_CLAMP: f64 = 35.0;

#[derive(Debug, Clone, PartialEq)]
pub struct BinomialModelData {
    successes: Vec<u32>,
    trials: Vec<u32>,
    x: DMatrix<f64>,
    xi: DMatrix<f64>,
    w_tilde: DVector<f64>,
    kappa: DVector<f64>,
}

impl BinomialModelData {
    /// Validates a full-sample data set, including Σw̃ᵢ = n (within 1e-6).
    pub fn new(
        successes: Vec<u32>,
        trials: Vec<u32>,
        x: DMatrix<f64>,
        xi: DMatrix<f64>,
        w_tilde: Vec<f64>,
    ) -> Result<Self> {
        let data = Self::new_unnormalized(successes, trials, x, xi, w_tilde)?;
        let n = data.n() as f64;
        let total: f64 = data.w_tilde.iter().sum();
        if (total - n).abs() > 1e-6 {
            return Err(Error::validation(format!(
                "scaled weights must sum to the sample size {n}, got {total}"
            )));
        }
        Ok(data)
    }

    /// Same checks as [`BinomialModelData::new`] except the weight-sum
    /// constraint. Stick-breaking slices keep the full-sample weights of
    /// the units they retain, so their weights need not sum to the slice size.
    pub fn new_unnormalized(
        successes: Vec<u32>,
        trials: Vec<u32>,
        x: DMatrix<f64>,
        xi: DMatrix<f64>,
        w_tilde: Vec<f64>,
    ) -> Result<Self> {
        let n = successes.len();
        if n == 0 {
            return Err(Error::validation("model data has no units"));
        }
        if trials.len() != n || x.nrows() != n || xi.nrows() != n || w_tilde.len() != n {
            return Err(Error::dims(format!(
                "unit counts disagree: successes {n}, trials {}, X {}, Ξ {}, weights {}",
                trials.len(),
                x.nrows(),
                xi.nrows(),
                w_tilde.len()
            )));
        }
        if x.ncols() == 0 {
            return Err(Error::validation("X needs at least one column"));
        }
        for i in 0..n {
            if trials[i] == 0 {
                return Err(Error::validation(format!("unit {i} has zero trials")));
            }
            if successes[i] > trials[i] {
                return Err(Error::validation(format!(
                    "unit {i}: {} successes exceed {} trials",
                    successes[i], trials[i]
                )));
            }
            if !(w_tilde[i].is_finite() && w_tilde[i] > 0.0) {
                return Err(Error::validation(format!(
                    "unit {i}: scaled weight must be positive and finite, got {}",
                    w_tilde[i]
                )));
            }
        }
        if x.iter().chain(xi.iter()).any(|v| !v.is_finite()) {
            return Err(Error::validation("non-finite covariate or score"));
        }
        let kappa = DVector::from_fn(n, |i, _| {
            w_tilde[i] * (f64::from(successes[i]) - 0.5 * f64::from(trials[i]))
        });
        Ok(Self {
            successes,
            trials,
            x,
            xi,
            w_tilde: DVector::from_vec(w_tilde),
            kappa,
        })
    }

    /// Copy with every scaled weight set to one.
    pub fn unweighted(&self) -> Self {
        let mut out = self.clone();
        out.w_tilde.fill(1.0);
        out.kappa = DVector::from_fn(self.n(), |i, _| {
            f64::from(self.successes[i]) - 0.5 * f64::from(self.trials[i])
        });
        out
    }

    /// Copy without functional scores (K = 0).
    pub fn scalar_only(&self) -> Self {
        let mut out = self.clone();
        out.xi = DMatrix::zeros(self.n(), 0);
        out
    }

    pub fn n(&self) -> usize {
        self.successes.len()
    }

    pub fn q(&self) -> usize {
        self.x.ncols()
    }

    pub fn k(&self) -> usize {
        self.xi.ncols()
    }

    pub fn successes(&self) -> &[u32] {
        &self.successes
    }

    pub fn trials(&self) -> &[u32] {
        &self.trials
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn xi(&self) -> &DMatrix<f64> {
        &self.xi
    }

    pub fn w_tilde(&self) -> &DVector<f64> {
        &self.w_tilde
    }

    /// ψ = Xβ + Ξb.
    pub fn linear_predictor(&self, beta: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        let mut psi = &self.x * beta;
        if self.k() > 0 {
            psi += &self.xi * b;
        }
        psi
    }
}

/// κᵢ = w̃ᵢ(Zᵢ − nᵢ/2).
pub fn kappa_vector(data: &BinomialModelData) -> DVector<f64> {
    data.kappa.clone()
}

/// Σᵢ w̃ᵢ·[Zᵢ log pᵢ + (nᵢ − Zᵢ) log(1 − pᵢ)], the weighted log
/// pseudo-likelihood without binomial coefficients.
pub fn log_pseudo_likelihood(data: &BinomialModelData, beta: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let psi = data.linear_predictor(beta, b);
    (0..data.n())
        .map(|i| {
            let z = f64::from(data.successes[i]);
            let n = f64::from(data.trials[i]);
            let log_p = -softplus(-psi[i]);
            let log_q = -softplus(psi[i]);
            data.w_tilde[i] * (z * log_p + (n - z) * log_q)
        })
        .sum()
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn logistic(x: f64) -> f64 {
    let x = x.clamp(-PREDICTOR_CLAMP, PREDICTOR_CLAMP);
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub omega: DVector<f64>,
    pub beta: DVector<f64>,
    pub b: DVector<f64>,
    pub lambda2: DVector<f64>,
    pub tau2: f64,
    pub nu: DVector<f64>,
    pub nu_tau: f64,
}

impl ModelState {
    /// β = 0, b = 0, λ² = 1, τ² = 1, ν = 1, ν_τ = 1. ω is left at its
    /// PG(·, 0) mean until the first ω update.
    pub fn initial(data: &BinomialModelData) -> Self {
        let (n, q, k) = (data.n(), data.q(), data.k());
        Self {
            omega: DVector::from_fn(n, |i, _| 0.25 * data.w_tilde[i] * f64::from(data.trials[i])),
            beta: DVector::zeros(q),
            b: DVector::zeros(k),
            lambda2: DVector::from_element(k, 1.0),
            tau2: 1.0,
            nu: DVector::from_element(k, 1.0),
            nu_tau: 1.0,
        }
    }

    /// Checks that every component is finite and every variance-type
    /// component strictly positive.
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !self.omega.iter().all(|&v| positive(v)) {
            return Err(Error::domain("ω left the positive reals"));
        }
        if !self.beta.iter().chain(self.b.iter()).all(|v| v.is_finite()) {
            return Err(Error::domain("β or b is not finite"));
        }
        if !self.lambda2.iter().chain(self.nu.iter()).all(|&v| positive(v)) {
            return Err(Error::domain("λ² or ν left the positive reals"));
        }
        if !(positive(self.tau2) && positive(self.nu_tau)) {
            return Err(Error::domain(format!(
                "τ² = {} or ν_τ = {} left the positive reals",
                self.tau2, self.nu_tau
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub sigma2_beta: f64,
    pub seed: u64,
    pub thin: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            iterations: 5000,
            burn_in: 1000,
            sigma2_beta: 10.0,
            seed: 0,
            thin: 1,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be positive".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::Config(format!(
                "burn_in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be positive".into()));
        }
        if self.retained() == 0 {
            return Err(Error::Config("no draws would be retained".into()));
        }
        if !(self.sigma2_beta.is_finite() && self.sigma2_beta > 0.0) {
            return Err(Error::Config(format!(
                "sigma2_beta must be positive, got {}",
                self.sigma2_beta
            )));
        }
        Ok(())
    }

    /// M = (iterations − burn_in)/thin, rounded down.
    pub fn retained(&self) -> usize {
        (self.iterations.saturating_sub(self.burn_in)) / self.thin.max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawsMeta {
    pub config: SamplerConfig,
    pub n: usize,
    pub q: usize,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    /// M×q
    pub beta_draws: DMatrix<f64>,
    /// M×K
    pub b_draws: DMatrix<f64>,
    pub meta: DrawsMeta,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.beta_draws.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn q(&self) -> usize {
        self.beta_draws.ncols()
    }

    pub fn k(&self) -> usize {
        self.b_draws.ncols()
    }

    pub fn beta_mean(&self) -> DVector<f64> {
        self.beta_draws.row_mean().transpose()
    }

    pub fn b_mean(&self) -> DVector<f64> {
        self.b_draws.row_mean().transpose()
    }

    /// Stacks several chains' draws; metadata comes from the first.
    pub fn concat(parts: &[PosteriorDraws]) -> Result<PosteriorDraws> {
        let first = parts
            .first()
            .ok_or_else(|| Error::dims("no draws to concatenate"))?;
        let (q, k) = (first.q(), first.k());
        if parts.iter().any(|p| p.q() != q || p.k() != k) {
            return Err(Error::dims("chains disagree on q or K"));
        }
        let m: usize = parts.iter().map(PosteriorDraws::len).sum();
        let mut beta = DMatrix::zeros(m, q);
        let mut b = DMatrix::zeros(m, k);
        let mut row = 0;
        for p in parts {
            beta.rows_mut(row, p.len()).copy_from(&p.beta_draws);
            b.rows_mut(row, p.len()).copy_from(&p.b_draws);
            row += p.len();
        }
        Ok(PosteriorDraws {
            beta_draws: beta,
            b_draws: b,
            meta: first.meta.clone(),
        })
    }
}

/// Gaussian full conditional in information form: N(P⁻¹ℓ, P⁻¹).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianConditional {
    pub precision: DMatrix<f64>,
    pub linear: DVector<f64>,
}

impl GaussianConditional {
    pub fn mean(&self) -> Option<DVector<f64>> {
        cholesky_with_jitter(&self.precision)
            .ok()
            .map(|c| c.solve(&self.linear))
    }

    pub fn covariance(&self) -> Option<DMatrix<f64>> {
        cholesky_with_jitter(&self.precision).ok().map(|c| c.inverse())
    }

    fn sample<R: Rng + ?Sized>(&self, block: &'static str, rng: &mut R) -> Result<DVector<f64>> {
        sample_mvn_from_precision(&self.precision, &self.linear, rng)
            .map_err(|_| Error::NumericalSingularity { block })
    }
}

/// Aᵀ diag(ω) A.
fn weighted_gram(a: &DMatrix<f64>, omega: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = a.clone();
    for (mut row, &w) in scaled.row_iter_mut().zip(omega.iter()) {
        row *= w;
    }
    a.tr_mul(&scaled)
}

/// Precision Ξ'ΩΞ + Λ⁻¹/τ² and linear term Ξ'(κ − Ω·Xβ).
pub fn conditional_b(state: &ModelState, data: &BinomialModelData) -> GaussianConditional {
    let mut precision = weighted_gram(&data.xi, &state.omega);
    for k in 0..data.k() {
        precision[(k, k)] += 1.0 / (state.tau2 * state.lambda2[k]);
    }
    let x_beta = &data.x * &state.beta;
    let resid = &data.kappa - state.omega.component_mul(&x_beta);
    GaussianConditional {
        precision,
        linear: data.xi.tr_mul(&resid),
    }
}

/// Precision X'ΩX + I/σ²_β and linear term X'(κ − Ω·Ξb).
pub fn conditional_beta(
    state: &ModelState,
    data: &BinomialModelData,
    sigma2_beta: f64,
) -> GaussianConditional {
    let mut precision = weighted_gram(&data.x, &state.omega);
    for j in 0..data.q() {
        precision[(j, j)] += 1.0 / sigma2_beta;
    }
    let resid = if data.k() > 0 {
        let xi_b = &data.xi * &state.b;
        &data.kappa - state.omega.component_mul(&xi_b)
    } else {
        data.kappa.clone()
    };
    GaussianConditional {
        precision,
        linear: data.x.tr_mul(&resid),
    }
}

/// ωᵢ ~ PG(w̃ᵢnᵢ, xᵢ'β + ξᵢ'b), independently over units.
pub fn step_omega<R: Rng + ?Sized>(
    state: &mut ModelState,
    data: &BinomialModelData,
    rng: &mut R,
) -> Result<()> {
    let psi = data.linear_predictor(&state.beta, &state.b);
    for i in 0..data.n() {
        let shape = data.w_tilde[i] * f64::from(data.trials[i]);
        let params = PolyaGammaParams::new(shape, psi[i])
            .map_err(|e| Error::domain(format!("unit {i}: {e}")))?;
        state.omega[i] = sample_polya_gamma(params, rng);
    }
    Ok(())
}

pub fn step_b<R: Rng + ?Sized>(
    state: &mut ModelState,
    data: &BinomialModelData,
    rng: &mut R,
) -> Result<()> {
    if data.k() == 0 {
        return Ok(());
    }
    state.b = conditional_b(state, data).sample("b", rng)?;
    Ok(())
}

pub fn step_beta<R: Rng + ?Sized>(
    state: &mut ModelState,
    data: &BinomialModelData,
    sigma2_beta: f64,
    rng: &mut R,
) -> Result<()> {
    state.beta = conditional_beta(state, data, sigma2_beta).sample("beta", rng)?;
    Ok(())
}

/// λ_k² ~ IG(1, 1/ν_k + b(k)²/(2τ²)).
pub fn step_lambda2<R: Rng + ?Sized>(state: &mut ModelState, rng: &mut R) -> Result<()> {
    for k in 0..state.b.len() {
        let scale = 1.0 / state.nu[k] + state.b[k] * state.b[k] / (2.0 * state.tau2);
        state.lambda2[k] = sample_inverse_gamma(1.0, scale, rng)?;
    }
    Ok(())
}

/// τ² ~ IG((K+1)/2, 1/ν_τ + Σ_k b(k)²/(2λ_k²)).
pub fn step_tau2<R: Rng + ?Sized>(state: &mut ModelState, rng: &mut R) -> Result<()> {
    let k = state.b.len();
    let spread: f64 = state
        .b
        .iter()
        .zip(state.lambda2.iter())
        .map(|(b, l2)| b * b / (2.0 * l2))
        .sum();
    let shape = (k as f64 + 1.0) / 2.0;
    state.tau2 = sample_inverse_gamma(shape, 1.0 / state.nu_tau + spread, rng)?;
    Ok(())
}

/// ν_k ~ IG(1, 1 + 1/λ_k²) and ν_τ ~ IG(1, 1 + 1/τ²).
pub fn step_nu<R: Rng + ?Sized>(state: &mut ModelState, rng: &mut R) -> Result<()> {
    for k in 0..state.nu.len() {
        state.nu[k] = sample_inverse_gamma(1.0, 1.0 + 1.0 / state.lambda2[k], rng)?;
    }
    state.nu_tau = sample_inverse_gamma(1.0, 1.0 + 1.0 / state.tau2, rng)?;
    Ok(())
}

/// One full sweep in the order ω → b → β → λ² → τ² → ν.
pub fn sweep<R: Rng + ?Sized>(
    state: &mut ModelState,
    data: &BinomialModelData,
    sigma2_beta: f64,
    rng: &mut R,
) -> Result<()> {
    step_omega(state, data, rng)?;
    step_b(state, data, rng)?;
    step_beta(state, data, sigma2_beta, rng)?;
    step_lambda2(state, rng)?;
    step_tau2(state, rng)?;
    step_nu(state, rng)?;
    Ok(())
}

/// Runs the sampler on the stream `(config.seed, 0)`.
pub fn fit(data: &BinomialModelData, config: &SamplerConfig) -> Result<PosteriorDraws> {
    fit_with_rng(data, config, &mut RngStream::new(config.seed, 0))
}

pub fn fit_with_rng<R: Rng + ?Sized>(
    data: &BinomialModelData,
    config: &SamplerConfig,
    rng: &mut R,
) -> Result<PosteriorDraws> {
    config.validate()?;
    let m = config.retained();
    let mut beta_draws = DMatrix::zeros(m, data.q());
    let mut b_draws = DMatrix::zeros(m, data.k());

    let annotate = |iteration: usize| {
        move |e: Error| Error::Sampler {
            iteration,
            source: Box::new(e),
        }
    };

    let mut state = ModelState::initial(data);
    step_omega(&mut state, data, rng).map_err(annotate(0))?;

    let mut row = 0;
    for it in 0..config.iterations {
        sweep(&mut state, data, config.sigma2_beta, rng).map_err(annotate(it + 1))?;
        state.validate().map_err(annotate(it + 1))?;
        if it >= config.burn_in && (it - config.burn_in + 1).is_multiple_of(config.thin) && row < m {
            beta_draws.set_row(row, &state.beta.transpose());
            b_draws.set_row(row, &state.b.transpose());
            row += 1;
        }
    }
    debug_assert_eq!(row, m);

    Ok(PosteriorDraws {
        beta_draws,
        b_draws,
        meta: DrawsMeta {
            config: *config,
            n: data.n(),
            q: data.q(),
            k: data.k(),
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// m×M, entry (i, s) is unit i's probability under draw s.
    pub draws: DMatrix<f64>,
    pub mean: DVector<f64>,
}

impl Prediction {
    pub fn interval(&self, unit: usize, level: f64) -> (f64, f64) {
        let row: Vec<f64> = self.draws.row(unit).iter().copied().collect();
        let alpha = (1.0 - level) / 2.0;
        (
            crate::evaluation::quantile(&row, alpha),
            crate::evaluation::quantile(&row, 1.0 - alpha),
        )
    }
}

/// Per-draw pᵢ = logistic(xᵢ'β + ξᵢ'b) for new units, plus the posterior mean.
pub fn predict_probabilities(
    draws: &PosteriorDraws,
    x_new: &DMatrix<f64>,
    xi_new: &DMatrix<f64>,
) -> Result<Prediction> {
    if x_new.ncols() != draws.q() || xi_new.ncols() != draws.k() {
        return Err(Error::dims(format!(
            "new data has q = {}, K = {}; draws have q = {}, K = {}",
            x_new.ncols(),
            xi_new.ncols(),
            draws.q(),
            draws.k()
        )));
    }
    if x_new.nrows() != xi_new.nrows() {
        return Err(Error::dims(format!(
            "X has {} rows, Ξ has {}",
            x_new.nrows(),
            xi_new.nrows()
        )));
    }
    let mut psi = x_new * draws.beta_draws.transpose();
    if draws.k() > 0 {
        psi += xi_new * draws.b_draws.transpose();
    }
    let probs = psi.map(logistic);
    let mean = probs.column_mean();
    Ok(Prediction { draws: probs, mean })
}
