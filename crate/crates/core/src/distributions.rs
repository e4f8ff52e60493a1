//! Random-variate generators used by the Gibbs sampler.
//!
//! Pólya-Gamma variates are drawn from the infinite-convolution
//! representation
//!
//! ```text
//! PG(b, c) = 1/(2π²) Σ_{k≥1} g_k / ((k − 1/2)² + c²/(4π²)),   g_k ~ Gamma(b, 1)
//! ```
//!
//! truncated after [`PG_TRUNCATION_TERMS`] terms. The discarded tail is
//! replaced by its expectation,
//!
//! ```text
//! tail(b, c) = b/(2c)·tanh(c/2) − b/(2π²) Σ_{k≤200} 1/((k − 1/2)² + c²/(4π²)),
//! ```
//!
//! so every draw has exactly the analytic mean. At c = 0 the tail constant is
//! b/(2π²)·Σ_{k>200} 1/(k − 1/2)² ≈ 2.533·10⁻⁴·b. The shape b may be any
//! positive real, which the survey-weighted shapes w̃ᵢnᵢ require.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{Error, Result};

/// Number of gamma terms kept in the Pólya-Gamma series.
pub const PG_TRUNCATION_TERMS: usize = 200;

/// Initial diagonal jitter, relative to the mean diagonal entry.
const JITTER_RELATIVE: f64 = 1e-8;
const JITTER_ATTEMPTS: usize = 3;

/// Gamma(shape, 1) variates by Marsaglia–Tsang. Shapes below one are boosted:
/// Gamma(a) = Gamma(a + 1)·exp(−E/a) with E ~ Exp(1). Shape one is a plain
/// exponential.
#[derive(Debug, Clone, Copy)]
pub struct GammaSampler {
    d: f64,
    c: f64,
    inv_shape: f64,
    kind: GammaKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GammaKind {
    Exponential,
    Boosted,
    Direct,
}

impl GammaSampler {
    pub fn new(shape: f64) -> Result<Self> {
        if !(shape.is_finite() && shape > 0.0) {
            return Err(Error::domain(format!(
                "gamma shape must be positive and finite, got {shape}"
            )));
        }
        let kind = if shape == 1.0 {
            GammaKind::Exponential
        } else if shape < 1.0 {
            GammaKind::Boosted
        } else {
            GammaKind::Direct
        };
        let a = if kind == GammaKind::Boosted {
            shape + 1.0
        } else {
            shape
        };
        let d = a - 1.0 / 3.0;
        Ok(Self {
            d,
            c: 1.0 / (9.0 * d).sqrt(),
            inv_shape: 1.0 / shape,
            kind,
        })
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            GammaKind::Exponential => rng.sample(Exp1),
            GammaKind::Direct => self.marsaglia_tsang(rng),
            GammaKind::Boosted => {
                let e: f64 = rng.sample(Exp1);
                self.marsaglia_tsang(rng) * (-e * self.inv_shape).exp()
            }
        }
    }

    #[inline]
    fn marsaglia_tsang<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let x: f64 = rng.sample(StandardNormal);
            let v = 1.0 + self.c * x;
            if v <= 0.0 {
                continue;
            }
            let v = v * v * v;
            let u: f64 = rng.random();
            let x2 = x * x;
            if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + self.d * (1.0 - v + v.ln()) {
                return self.d * v;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyaGammaParams {
    b: f64,
    c: f64,
}

impl PolyaGammaParams {
    pub fn new(b: f64, c: f64) -> Result<Self> {
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::domain(format!(
                "Pólya-Gamma shape must be positive and finite, got {b}"
            )));
        }
        if !c.is_finite() {
            return Err(Error::domain(format!(
                "Pólya-Gamma tilt must be finite, got {c}"
            )));
        }
        Ok(Self { b, c })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

/// E[PG(b, c)] = b/(2c)·tanh(c/2), with the limit b/4 at c = 0.
pub fn polya_gamma_mean(params: PolyaGammaParams) -> f64 {
    let PolyaGammaParams { b, c } = params;
    let c = c.abs();
    if c < 1e-6 {
        // tanh(x)/x = 1 − x²/3 + O(x⁴) with x = c/2
        0.25 * b * (1.0 - c * c / 12.0)
    } else {
        b / (2.0 * c) * (0.5 * c).tanh()
    }
}

/// One draw from PG(b, c).
pub fn sample_polya_gamma<R: Rng + ?Sized>(params: PolyaGammaParams, rng: &mut R) -> f64 {
    let PolyaGammaParams { b, c } = params;
    let gamma = GammaSampler::new(b).expect("validated shape");
    let d2 = c * c / (4.0 * PI * PI);

    let mut weighted = 0.0;
    let mut inv_sum = 0.0;
    for k in 0..PG_TRUNCATION_TERMS {
        let h = k as f64 + 0.5;
        let inv = 1.0 / (h * h + d2);
        inv_sum += inv;
        weighted += gamma.sample(rng) * inv;
    }
    let scale = 1.0 / (2.0 * PI * PI);
    let tail = (polya_gamma_mean(params) - b * scale * inv_sum).max(0.0);
    weighted * scale + tail
}

/// Expected value of the terms the truncated series drops.
pub fn polya_gamma_tail_mean(params: PolyaGammaParams) -> f64 {
    let d2 = params.c * params.c / (4.0 * PI * PI);
    let inv_sum: f64 = (0..PG_TRUNCATION_TERMS)
        .map(|k| {
            let h = k as f64 + 0.5;
            1.0 / (h * h + d2)
        })
        .sum();
    (polya_gamma_mean(params) - params.b * inv_sum / (2.0 * PI * PI)).max(0.0)
}

/// Draw from IG(shape, scale), density ∝ x^{−shape−1} e^{−scale/x}.
pub fn sample_inverse_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> Result<f64> {
    if !(shape.is_finite() && shape > 0.0 && scale.is_finite() && scale > 0.0) {
        return Err(Error::domain(format!(
            "inverse-gamma parameters must be positive and finite, got shape={shape}, scale={scale}"
        )));
    }
    Ok(scale / GammaSampler::new(shape)?.sample(rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("{dim}x{dim} precision matrix is not positive definite")]
pub struct NotPositiveDefinite {
    pub dim: usize,
}

/// Cholesky factor of `precision`, retrying with a diagonal jitter of
/// 1e-8·mean(diag), doubled on each of up to three retries.
pub fn cholesky_with_jitter(
    precision: &DMatrix<f64>,
) -> Result<Cholesky<f64, Dyn>, NotPositiveDefinite> {
    let dim = precision.nrows();
    if precision.ncols() != dim || precision.iter().any(|v| !v.is_finite()) {
        return Err(NotPositiveDefinite { dim });
    }
    if let Some(chol) = precision.clone().cholesky() {
        return Ok(chol);
    }
    let mean_diag = precision.diagonal().mean().abs().max(f64::MIN_POSITIVE);
    let mut jitter = JITTER_RELATIVE * mean_diag;
    for _ in 0..JITTER_ATTEMPTS {
        let mut jittered = precision.clone();
        for i in 0..dim {
            jittered[(i, i)] += jitter;
        }
        if let Some(chol) = jittered.cholesky() {
            return Ok(chol);
        }
        jitter *= 2.0;
    }
    Err(NotPositiveDefinite { dim })
}

/// Draw from N(P⁻¹ℓ, P⁻¹) given the precision P and linear term ℓ.
///
/// With P = LLᵀ the draw is L⁻ᵀ(L⁻¹ℓ + z), z ~ N(0, I): one factorization
/// and two triangular solves.
pub fn sample_mvn_from_precision<R: Rng + ?Sized>(
    precision: &DMatrix<f64>,
    linear_term: &DVector<f64>,
    rng: &mut R,
) -> Result<DVector<f64>, NotPositiveDefinite> {
    let dim = linear_term.len();
    if precision.nrows() != dim {
        return Err(NotPositiveDefinite { dim });
    }
    if dim == 0 {
        return Ok(DVector::zeros(0));
    }
    let chol = cholesky_with_jitter(precision)?;
    let l = chol.l();
    let mut y = l
        .solve_lower_triangular(linear_term)
        .ok_or(NotPositiveDefinite { dim })?;
    for v in y.iter_mut() {
        *v += rng.sample::<f64, _>(StandardNormal);
    }
    l.tr_solve_lower_triangular(&y)
        .ok_or(NotPositiveDefinite { dim })
}
