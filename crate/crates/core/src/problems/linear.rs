//! Bayesian linear regression with a `N(0, diag(theta))` prior on the weights.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::measure::Measure;

/// Quantity whose posterior expectation is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearIntegrand {
    /// `f(x) = x^T x`.
    SecondMoment,
    /// `f(x) = x^T y*`.
    PredictiveMean,
}

/// Regression data and the conjugate posterior map `theta -> N(m(theta), Sigma(theta))`.
#[derive(Debug, Clone)]
pub struct LinearBayes {
    pub design: DMatrix<f64>,
    pub responses: DVector<f64>,
    pub noise_precision: f64,
    pub new_input: DVector<f64>,
    pub integrand: LinearIntegrand,
}

impl LinearBayes {
    pub fn new(
        design: DMatrix<f64>,
        responses: DVector<f64>,
        noise_precision: f64,
        new_input: DVector<f64>,
        integrand: LinearIntegrand,
    ) -> Result<Self> {
        if design.nrows() != responses.len() {
            return Err(Error::DimensionMismatch { expected: design.nrows(), got: responses.len() });
        }
        if new_input.len() != design.ncols() {
            return Err(Error::DimensionMismatch { expected: design.ncols(), got: new_input.len() });
        }
        if design.ncols() == 0 {
            return Err(Error::EmptyInput);
        }
        if !(noise_precision > 0.0) {
            return Err(Error::InvalidParameter(format!("noise precision {noise_precision}")));
        }
        Ok(Self { design, responses, noise_precision, new_input, integrand })
    }

    /// `m = 10 d` rows with iid standard normal design, `Z = Y w + eps`, `w, eps` standard normal.
    pub fn generate(d: usize, seed: u64, integrand: LinearIntegrand) -> Result<Self> {
        if d == 0 {
            return Err(Error::EmptyInput);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = 10 * d;
        let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
        let design = DMatrix::from_fn(m, d, |_, _| draw());
        let w = DVector::from_fn(d, |_, _| draw());
        let noise = DVector::from_fn(m, |_, _| draw());
        let responses = &design * w + noise;
        let new_input = DVector::from_fn(d, |_, _| draw());
        Self::new(design, responses, 1.0, new_input, integrand)
    }

    pub fn dim(&self) -> usize {
        self.design.ncols()
    }

    /// Posterior mean and covariance for prior variances `theta`.
    pub fn posterior(&self, theta: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let d = self.dim();
        if theta.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: theta.len() });
        }
        if let Some(&t) = theta.iter().find(|t| !(**t > 0.0)) {
            return Err(Error::NonPositiveInput(t));
        }
        let yt = self.design.transpose();
        let mut precision = &yt * &self.design * self.noise_precision;
        for i in 0..d {
            precision[(i, i)] += 1.0 / theta[i];
        }
        let cov = precision
            .cholesky()
            .ok_or_else(|| Error::InvalidParameter("degenerate design".into()))?
            .inverse();
        let cov = (&cov + cov.transpose()) * 0.5;
        let mean = &cov * (&yt * &self.responses) * self.noise_precision;
        Ok((mean, cov))
    }

    pub fn conditional_measure(&self, theta: &[f64]) -> Result<Measure> {
        let (m, s) = self.posterior(theta)?;
        Measure::gaussian(m.as_slice().to_vec(), s)
    }

    pub fn integrand(&self, x: &[f64]) -> f64 {
        match self.integrand {
            LinearIntegrand::SecondMoment => x.iter().map(|v| v * v).sum(),
            LinearIntegrand::PredictiveMean => x.iter().zip(self.new_input.iter()).map(|(a, b)| a * b).sum(),
        }
    }

    /// `tr(Sigma) + m^T m` or `m^T y*`.
    pub fn exact(&self, theta: &[f64]) -> Result<f64> {
        let (m, s) = self.posterior(theta)?;
        Ok(match self.integrand {
            LinearIntegrand::SecondMoment => s.trace() + m.norm_squared(),
            LinearIntegrand::PredictiveMean => m.dot(&self.new_input),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prior_only_posterior() {
        let p = LinearBayes::new(
            DMatrix::zeros(3, 2),
            DVector::zeros(3),
            1.0,
            DVector::zeros(2),
            LinearIntegrand::SecondMoment,
        )
        .unwrap();
        let (m, s) = p.posterior(&[1.7, 1.7]).unwrap();
        assert_eq!(m.norm(), 0.0);
        assert!((s[(0, 0)] - 1.7).abs() < 1e-14 && s[(0, 1)].abs() < 1e-14);
        assert!((p.exact(&[1.7, 1.7]).unwrap() - 3.4).abs() < 1e-13);
    }

    #[test]
    fn one_by_one_arithmetic() {
        let p = LinearBayes::new(
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 1.0),
            1.0,
            DVector::from_element(1, 2.0),
            LinearIntegrand::SecondMoment,
        )
        .unwrap();
        let (m, s) = p.posterior(&[1.0]).unwrap();
        assert!((s[(0, 0)] - 0.5).abs() < 1e-15 && (m[0] - 0.5).abs() < 1e-15);
        assert!((p.exact(&[1.0]).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn generated_design_shape() {
        let p = LinearBayes::generate(3, 11, LinearIntegrand::PredictiveMean).unwrap();
        assert_eq!(p.design.shape(), (30, 3));
        assert!(p.posterior(&[0.0, 1.0, 1.0]).is_err());
    }
}
