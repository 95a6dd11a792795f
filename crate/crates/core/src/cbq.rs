//! Stage 2: heteroscedastic GP regression of stage-1 means over the parameter.

use nalgebra::{DMatrix, DVector};

use crate::bq::{clamp_variance, BqPosterior};
use crate::error::{Error, Result};
use crate::kernels::{eval_kernel, gram, gram_sym, KernelSpec};
use crate::solver::RegularizedCholesky;

/// Affine map applied to stage-1 means before the stage-2 fit: `y = (I - shift) / scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Standardization {
    pub shift: f64,
    pub scale: f64,
}

impl Standardization {
    pub const IDENTITY: Standardization = Standardization { shift: 0.0, scale: 1.0 };

    /// Population mean and standard deviation of `values`; the identity scale is kept
    /// when the values are (numerically) constant.
    pub fn from_values(values: &[f64]) -> Self {
        let (mean, std) = crate::hyperopt::mean_std(values);
        if values.len() < 2 || crate::hyperopt::is_degenerate(mean, std) {
            Standardization { shift: mean, scale: 1.0 }
        } else {
            Standardization { shift: mean, scale: std }
        }
    }
}

/// A fitted stage-2 model.
#[derive(Debug, Clone)]
pub struct CbqModel {
    thetas: Vec<Vec<f64>>,
    means: Vec<f64>,
    variances: Vec<f64>,
    kernel: KernelSpec,
    lambda_theta: f64,
    standardization: Standardization,
    chol: RegularizedCholesky,
    alpha: DVector<f64>,
}

/// Fit with a zero prior mean and no rescaling of the targets.
pub fn cbq_fit(thetas: &[Vec<f64>], posteriors: &[BqPosterior], kernel: &KernelSpec, lambda_theta: f64) -> Result<CbqModel> {
    let means: Vec<f64> = posteriors.iter().map(|p| p.mean).collect();
    let vars: Vec<f64> = posteriors.iter().map(|p| p.variance).collect();
    CbqModel::fit(thetas, &means, &vars, kernel, lambda_theta, Standardization::IDENTITY)
}

impl CbqModel {
    /// Fit on `(means - shift) / scale` with stage-1 variances divided by `scale^2`.
    pub fn fit(
        thetas: &[Vec<f64>],
        means: &[f64],
        variances: &[f64],
        kernel: &KernelSpec,
        lambda_theta: f64,
        standardization: Standardization,
    ) -> Result<Self> {
        let t = thetas.len();
        if t == 0 {
            return Err(Error::EmptyInput);
        }
        if means.len() != t {
            return Err(Error::DimensionMismatch { expected: t, got: means.len() });
        }
        if variances.len() != t {
            return Err(Error::DimensionMismatch { expected: t, got: variances.len() });
        }
        if !(lambda_theta >= 0.0) || !lambda_theta.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda_theta = {lambda_theta}")));
        }
        if let Some(&v) = variances.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::NegativeVariance(v));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::NonFinite("stage-1 mean".into()));
        }
        let Standardization { shift, scale } = standardization;
        if !(scale > 0.0) || !shift.is_finite() || !scale.is_finite() {
            return Err(Error::InvalidParameter(format!("standardization {standardization:?}")));
        }
        let k = gram_sym(kernel, thetas)?;
        let reg = DVector::from_iterator(t, variances.iter().map(|v| lambda_theta + v / (scale * scale)));
        let chol = RegularizedCholesky::with_diagonal(&k, &reg)?;
        let y = DVector::from_iterator(t, means.iter().map(|m| (m - shift) / scale));
        let alpha = chol.solve_vec(&y);
        Ok(Self {
            thetas: thetas.to_vec(),
            means: means.to_vec(),
            variances: variances.to_vec(),
            kernel: kernel.clone(),
            lambda_theta,
            standardization,
            chol,
            alpha,
        })
    }

    pub fn thetas(&self) -> &[Vec<f64>] {
        &self.thetas
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn lambda_theta(&self) -> f64 {
        self.lambda_theta
    }

    pub fn standardization(&self) -> Standardization {
        self.standardization
    }

    /// Solve against the regularized Gram matrix, in standardized units.
    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Jitter the solver needed on top of the heteroscedastic diagonal.
    pub fn jitter(&self) -> f64 {
        self.chol.jitter()
    }

    fn check_dim(&self, theta: &[f64]) -> Result<()> {
        let d = self.thetas[0].len();
        if theta.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: theta.len() });
        }
        Ok(())
    }

    /// Stage-2 weights `(K + diag)^{-1} k(theta_{1:T}, theta*)`.
    pub fn weights(&self, theta: &[f64]) -> Result<DVector<f64>> {
        self.check_dim(theta)?;
        let ks = gram(&self.kernel, &self.thetas, &[theta.to_vec()])?;
        Ok(self.chol.solve_vec(&ks.column(0).into_owned()))
    }

    /// Posterior mean of `I(theta*)` without the variance solve.
    pub fn predict_mean(&self, theta: &[f64]) -> Result<f64> {
        self.check_dim(theta)?;
        let mut s = 0.0;
        for (th, a) in self.thetas.iter().zip(self.alpha.iter()) {
            s += eval_kernel(&self.kernel, theta, th)? * a;
        }
        Ok(self.standardization.shift + self.standardization.scale * s)
    }

    /// Posterior mean and variance of `I(theta*)`.
    pub fn predict(&self, theta: &[f64]) -> Result<(f64, f64)> {
        self.check_dim(theta)?;
        let ks = gram(&self.kernel, &self.thetas, &[theta.to_vec()])?;
        let Standardization { shift, scale } = self.standardization;
        let mean = shift + scale * ks.column(0).dot(&self.alpha);
        let prior = eval_kernel(&self.kernel, theta, theta)?;
        let v = self.chol.half_solve(&ks);
        let var = clamp_variance(prior - v.norm_squared(), prior)?;
        Ok((mean, scale * scale * var))
    }

    /// Joint posterior at several test parameters.
    pub fn predict_joint(&self, thetas: &[Vec<f64>]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        if thetas.is_empty() {
            return Err(Error::EmptyInput);
        }
        for th in thetas {
            self.check_dim(th)?;
        }
        let ks = gram(&self.kernel, &self.thetas, thetas)?;
        let Standardization { shift, scale } = self.standardization;
        let mean = ks.transpose() * &self.alpha * scale + DVector::from_element(thetas.len(), shift);
        let v = self.chol.half_solve(&ks);
        let mut cov = gram_sym(&self.kernel, thetas)? - v.transpose() * v;
        let s = thetas.len();
        for i in 0..s {
            let prior = eval_kernel(&self.kernel, &thetas[i], &thetas[i])?;
            cov[(i, i)] = clamp_variance(cov[(i, i)], prior)?;
            for j in 0..i {
                let avg = 0.5 * (cov[(i, j)] + cov[(j, i)]);
                cov[(i, j)] = avg;
                cov[(j, i)] = avg;
            }
        }
        Ok((mean, cov * (scale * scale)))
    }
}

/// Pointwise posterior of `I(theta*)`.
pub fn cbq_predict(model: &CbqModel, theta: &[f64]) -> Result<(f64, f64)> {
    model.predict(theta)
}

/// Joint posterior of `I(theta*_1), ..., I(theta*_S)`.
pub fn cbq_predict_joint(model: &CbqModel, thetas: &[Vec<f64>]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    model.predict_joint(thetas)
}
