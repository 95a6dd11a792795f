//! Two-treatment health-economics model with a 19-dimensional Gaussian input.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::measure::{Gaussian, Measure};

/// Means of `X_1..X_17, theta_1, theta_2`.
pub const MEANS: [f64; 19] = [
    1000.0, 0.1, 5.2, 400.0, 0.3, 3.0, 0.25, -0.1, 0.5, 1500.0, 0.08, 6.1, 0.3, 3.0, 0.2, -0.1, 0.5, 0.7, 0.8,
];

/// Standard deviations in the same order as [`MEANS`].
pub const STDS: [f64; 19] = [
    1.0, 0.02, 1.0, 200.0, 0.1, 0.5, 0.1, 0.02, 0.2, 1.0, 0.02, 1.0, 0.05, 1.0, 0.05, 0.02, 0.2, 0.1, 0.1,
];

/// Zero-based indices of the mutually correlated block `theta_1, theta_2, X_6, X_14`.
pub const CORRELATED: [usize; 4] = [17, 18, 5, 13];
pub const CORRELATION: f64 = 0.6;
pub const DIM_X: usize = 17;

/// Joint law of `(x, theta)` and the conditional laws `x | theta`.
#[derive(Debug, Clone)]
pub struct HealthModel {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

/// Mean and covariance of the block `free` given the coordinates `observed = values`.
pub fn gaussian_condition(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    observed: &[usize],
    values: &[f64],
) -> Result<(DVector<f64>, DMatrix<f64>, Vec<usize>)> {
    let n = mean.len();
    if observed.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: observed.len(), got: values.len() });
    }
    let free: Vec<usize> = (0..n).filter(|i| !observed.contains(i)).collect();
    let pick = |rows: &[usize], cols: &[usize]| DMatrix::from_fn(rows.len(), cols.len(), |i, j| cov[(rows[i], cols[j])]);
    let s_oo = pick(observed, observed);
    let s_fo = pick(&free, observed);
    let s_ff = pick(&free, &free);
    let chol = s_oo.cholesky().ok_or_else(|| Error::InvalidParameter("observed block not SPD".into()))?;
    let resid = DVector::from_iterator(observed.len(), observed.iter().zip(values).map(|(&i, v)| v - mean[i]));
    let m = DVector::from_iterator(free.len(), free.iter().map(|&i| mean[i])) + &s_fo * chol.solve(&resid);
    let c = &s_ff - &s_fo * chol.solve(&s_fo.transpose());
    let c = (&c + c.transpose()) * 0.5;
    Ok((m, c, free))
}

impl Default for HealthModel {
    fn default() -> Self {
        let mean = DVector::from_column_slice(&MEANS);
        let mut cov = DMatrix::from_diagonal(&DVector::from_iterator(19, STDS.iter().map(|s| s * s)));
        for &i in &CORRELATED {
            for &j in &CORRELATED {
                if i != j {
                    cov[(i, j)] = CORRELATION * STDS[i] * STDS[j];
                }
            }
        }
        Self { mean, cov }
    }
}

impl HealthModel {
    pub fn joint_mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn joint_cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Marginal law of `theta`.
    pub fn theta_prior(&self) -> Result<Measure> {
        let m = vec![self.mean[17], self.mean[18]];
        let c = DMatrix::from_fn(2, 2, |i, j| self.cov[(17 + i, 17 + j)]);
        Measure::gaussian(m, c)
    }

    pub fn conditional_gaussian(&self, theta: &[f64]) -> Result<Gaussian> {
        if theta.len() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: theta.len() });
        }
        let (m, c, _) = gaussian_condition(&self.mean, &self.cov, &[17, 18], theta)?;
        Gaussian::new(m.as_slice().to_vec(), c)
    }

    pub fn conditional_measure(&self, theta: &[f64]) -> Result<Measure> {
        self.conditional_gaussian(theta).map(Measure::Gaussian)
    }

    /// Net benefit of treatment `arm` (0 or 1).
    pub fn integrand(&self, arm: usize, x: &[f64], theta: &[f64]) -> f64 {
        let v = |k: usize| x[k - 1];
        match arm {
            0 => 1e4 * (theta[0] * v(5) * v(6) + v(7) * v(8) * v(9)) - (v(1) + v(2) * v(3) * v(4)),
            _ => 1e4 * (theta[1] * v(13) * v(14) + v(15) * v(16) * v(17)) - (v(10) + v(11) * v(12) * v(4)),
        }
    }

    /// Exact `I_c(theta)`: every product has at most one factor correlated with `theta`.
    pub fn exact(&self, arm: usize, theta: &[f64]) -> Result<f64> {
        let g = self.conditional_gaussian(theta)?;
        let m = g.mean();
        Ok(self.integrand(arm, m, theta))
    }
}

/// `E[max_c I_c] - max_c E[I_c]` from per-draw arm values `values[c][j]`.
pub fn evppi_from_values(values: &[Vec<f64>]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::NotApplicable("EVPPI needs at least two arms".into()));
    }
    let m = values[0].len();
    if m == 0 {
        return Err(Error::EmptyInput);
    }
    if values.iter().any(|v| v.len() != m) {
        return Err(Error::DimensionMismatch { expected: m, got: values.iter().map(Vec::len).min().unwrap_or(0) });
    }
    let best: f64 = (0..m).map(|j| values.iter().map(|v| v[j]).fold(f64::NEG_INFINITY, f64::max)).sum::<f64>() / m as f64;
    let arm_means = values.iter().map(|v| v.iter().sum::<f64>() / m as f64);
    Ok(best - arm_means.fold(f64::NEG_INFINITY, f64::max))
}
