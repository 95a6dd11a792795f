//! Stage 1: Bayesian quadrature posterior for a single integral.

use nalgebra::DVector;

use crate::embeddings::EmbeddingPair;
use crate::error::{Error, Result};
use crate::kernels::gram_sym;
use crate::solver::RegularizedCholesky;

/// Relative slack below zero tolerated (and clamped) in posterior variances.
pub const VARIANCE_CLAMP: f64 = 1e-10;

/// Gaussian posterior `N(mean, variance)` on an integral.
#[derive(Debug, Clone, PartialEq)]
pub struct BqPosterior {
    pub mean: f64,
    pub variance: f64,
    pub sample_count: usize,
    pub condition_estimate: f64,
    /// Jitter added by the solver on top of the requested regularizer.
    pub jitter: f64,
}

/// Quadrature weights `w = (K + lambda Id)^{-1} mu` and the matching posterior variance.
#[derive(Debug, Clone)]
pub struct BqRule {
    pub weights: DVector<f64>,
    pub variance: f64,
    pub initial_error: f64,
    pub condition_estimate: f64,
    pub jitter: f64,
}

/// A prior mean function known through its values at the nodes and its integral.
#[derive(Debug, Clone)]
pub struct PriorMean {
    pub at_samples: Vec<f64>,
    pub integral: f64,
}

pub(crate) fn clamp_variance(v: f64, scale: f64) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v >= -VARIANCE_CLAMP * scale.abs().max(f64::MIN_POSITIVE) {
        Ok(0.0)
    } else {
        Err(Error::NegativeVariance(v))
    }
}

/// Weights and variance of the BQ rule on `samples`, independent of the integrand values.
pub fn bq_rule(pair: &EmbeddingPair, samples: &[Vec<f64>], lambda_x: f64) -> Result<BqRule> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    if lambda_x < 0.0 || !lambda_x.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda_x = {lambda_x}")));
    }
    let k = gram_sym(pair.kernel(), samples)?;
    let mu = pair.kme_many(samples)?;
    let chol = RegularizedCholesky::new(&k, lambda_x)?;
    let weights = chol.solve_vec(&mu);
    let init = pair.initial_error()?;
    let half = chol.half_solve(&nalgebra::DMatrix::from_column_slice(mu.len(), 1, mu.as_slice()));
    let raw = init - half.norm_squared();
    let scale = init.abs().max(pair.kernel().amplitude());
    Ok(BqRule {
        weights,
        variance: clamp_variance(raw, scale)?,
        initial_error: init,
        condition_estimate: chol.condition_estimate(),
        jitter: chol.jitter(),
    })
}

impl BqRule {
    pub fn apply(&self, f_vals: &[f64]) -> Result<f64> {
        if f_vals.len() != self.weights.len() {
            return Err(Error::DimensionMismatch { expected: self.weights.len(), got: f_vals.len() });
        }
        if let Some(v) = f_vals.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("integrand value {v}")));
        }
        Ok(self.weights.iter().zip(f_vals).map(|(w, f)| w * f).sum())
    }
}

/// BQ posterior with a zero prior mean.
pub fn bq_fit(pair: &EmbeddingPair, samples: &[Vec<f64>], f_vals: &[f64], lambda_x: f64) -> Result<BqPosterior> {
    let rule = bq_rule(pair, samples, lambda_x)?;
    Ok(BqPosterior {
        mean: rule.apply(f_vals)?,
        variance: rule.variance,
        sample_count: samples.len(),
        condition_estimate: rule.condition_estimate,
        jitter: rule.jitter,
    })
}

/// BQ posterior with a general prior mean `m_X`.
pub fn bq_fit_with_prior_mean(
    pair: &EmbeddingPair,
    samples: &[Vec<f64>],
    f_vals: &[f64],
    lambda_x: f64,
    prior: &PriorMean,
) -> Result<BqPosterior> {
    if prior.at_samples.len() != f_vals.len() {
        return Err(Error::DimensionMismatch { expected: f_vals.len(), got: prior.at_samples.len() });
    }
    let centered: Vec<f64> = f_vals.iter().zip(&prior.at_samples).map(|(f, m)| f - m).collect();
    let mut post = bq_fit(pair, samples, &centered, lambda_x)?;
    post.mean += prior.integral;
    Ok(post)
}
