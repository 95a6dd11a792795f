//! Empirical-Bayes hyperparameter selection for both stages.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernels::{gram_sym, KernelSpec};
use crate::solver::RegularizedCholesky;
use crate::special::LN_SQRT_2PI;

/// Candidate values searched by the grid optimizers.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperGrid {
    pub amplitudes: Vec<f64>,
    pub lengthscales: Vec<f64>,
    pub lambdas_theta: Vec<f64>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        Self {
            amplitudes: vec![1.0, 10.0, 100.0, 1000.0],
            lengthscales: vec![0.1, 0.3, 1.0, 3.0, 10.0],
            lambdas_theta: vec![0.01, 0.1, 1.0],
        }
    }
}

impl HyperGrid {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("amplitudes", &self.amplitudes),
            ("lengthscales", &self.lengthscales),
            ("lambdas_theta", &self.lambdas_theta),
        ] {
            if v.is_empty() {
                return Err(Error::InvalidParameter(format!("{name} is empty")));
            }
            if v.iter().any(|&x| !(x > 0.0) || !x.is_finite()) || v.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidParameter(format!("{name} must be positive and strictly increasing")));
            }
        }
        Ok(())
    }
}

/// Values shifted to mean 0 and scaled to unit population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub(crate) fn is_degenerate(mean: f64, std: f64) -> bool {
    !(std > 1e-12 * (1.0 + mean.abs()))
}

pub fn standardize(values: &[f64]) -> Result<Standardized> {
    if values.len() < 2 {
        return Err(Error::DegenerateTargets);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("standardize input".into()));
    }
    let (mean, std) = mean_std(values);
    if is_degenerate(mean, std) {
        return Err(Error::DegenerateTargets);
    }
    Ok(Standardized { values: values.iter().map(|v| (v - mean) / std).collect(), mean, std })
}

pub fn destandardize(values: &[f64], mean: f64, std: f64) -> Vec<f64> {
    values.iter().map(|v| mean + std * v).collect()
}

/// `log N(y; 0, K + diag(reg))` evaluated through a Cholesky factor.
pub fn gaussian_log_marginal(k: &DMatrix<f64>, reg: &DVector<f64>, y: &[f64]) -> Result<f64> {
    if y.len() != k.nrows() {
        return Err(Error::DimensionMismatch { expected: k.nrows(), got: y.len() });
    }
    let chol = RegularizedCholesky::with_diagonal(k, reg)?;
    let yv = DMatrix::from_column_slice(y.len(), 1, y);
    let z = chol.half_solve(&yv);
    let n = y.len() as f64;
    let v = -0.5 * chol.log_det() - n * LN_SQRT_2PI - 0.5 * z.norm_squared();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite("log marginal likelihood".into()))
    }
}

/// Stage-1 log marginal likelihood with a zero prior mean.
pub fn stage1_log_marginal(kernel: &KernelSpec, samples: &[Vec<f64>], f_vals: &[f64], lambda_x: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let k = gram_sym(kernel, samples)?;
    gaussian_log_marginal(&k, &DVector::from_element(samples.len(), lambda_x), f_vals)
}

/// Stage-2 log marginal likelihood with the heteroscedastic diagonal `lambda + sigma2_BQ`.
pub fn stage2_log_marginal(
    kernel: &KernelSpec,
    thetas: &[Vec<f64>],
    means: &[f64],
    variances: &[f64],
    lambda_theta: f64,
) -> Result<f64> {
    if thetas.is_empty() {
        return Err(Error::EmptyInput);
    }
    if variances.len() != thetas.len() {
        return Err(Error::DimensionMismatch { expected: thetas.len(), got: variances.len() });
    }
    let k = gram_sym(kernel, thetas)?;
    let reg = DVector::from_iterator(variances.len(), variances.iter().map(|v| lambda_theta + v));
    gaussian_log_marginal(&k, &reg, means)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stage1Choice {
    pub lengthscale: f64,
    pub amplitude: f64,
    pub log_marginal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stage2Choice {
    pub lengthscale: f64,
    pub amplitude: f64,
    pub lambda_theta: f64,
    pub log_marginal: f64,
}

fn check_targets(values: &[f64]) -> Result<()> {
    if values.len() >= 2 {
        let (mean, std) = mean_std(values);
        if is_degenerate(mean, std) {
            return Err(Error::DegenerateTargets);
        }
    }
    Ok(())
}

/// Grid argmax of the stage-1 log marginal over (lengthscale, amplitude).
///
/// Cells are visited in increasing lengthscale, then increasing amplitude, and only a
/// strictly larger value replaces the incumbent, so ties go to the smallest lengthscale
/// and then the smallest amplitude.
pub fn grid_search_stage1(
    family: &KernelSpec,
    samples: &[Vec<f64>],
    f_vals: &[f64],
    lambda_x: f64,
    grid: &HyperGrid,
) -> Result<Stage1Choice> {
    grid.validate()?;
    check_targets(f_vals)?;
    let mut best: Option<Stage1Choice> = None;
    for &l in &grid.lengthscales {
        for &a in &grid.amplitudes {
            let Ok(k) = family.with_params(l, a) else { continue };
            let Ok(v) = stage1_log_marginal(&k, samples, f_vals, lambda_x) else { continue };
            if best.map_or(true, |b| v > b.log_marginal) {
                best = Some(Stage1Choice { lengthscale: l, amplitude: a, log_marginal: v });
            }
        }
    }
    best.ok_or(Error::GridExhausted)
}

/// Grid argmax of the stage-2 log marginal over (lengthscale, amplitude, lambda).
pub fn grid_search_stage2(
    family: &KernelSpec,
    thetas: &[Vec<f64>],
    means: &[f64],
    variances: &[f64],
    grid: &HyperGrid,
) -> Result<Stage2Choice> {
    grid.validate()?;
    check_targets(means)?;
    if variances.len() != thetas.len() || means.len() != thetas.len() {
        return Err(Error::DimensionMismatch { expected: thetas.len(), got: means.len().min(variances.len()) });
    }
    let mut best: Option<Stage2Choice> = None;
    for &l in &grid.lengthscales {
        let Ok(unit) = family.with_params(l, 1.0) else { continue };
        let Ok(k1) = gram_sym(&unit, thetas) else { continue };
        for &a in &grid.amplitudes {
            let k = &k1 * a;
            for &lam in &grid.lambdas_theta {
                let reg = DVector::from_iterator(variances.len(), variances.iter().map(|v| lam + v));
                let Ok(v) = gaussian_log_marginal(&k, &reg, means) else { continue };
                if best.map_or(true, |b| v > b.log_marginal) {
                    best = Some(Stage2Choice { lengthscale: l, amplitude: a, lambda_theta: lam, log_marginal: v });
                }
            }
        }
    }
    best.ok_or(Error::GridExhausted)
}

/// Settings of the Stein-kernel gradient ascent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentOptions {
    pub step: f64,
    pub iterations: usize,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self { step: 0.05, iterations: 300 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteinChoice {
    pub constant: f64,
    pub lengthscale: f64,
    pub amplitude: f64,
    pub log_marginal: f64,
}

/// Central-difference gradient with step `1e-4 (1 + |p_i|)`.
pub fn central_gradient<F: Fn(&[f64]) -> f64>(obj: &F, p: &[f64]) -> Vec<f64> {
    let mut q = p.to_vec();
    (0..p.len())
        .map(|i| {
            let h = 1e-4 * (1.0 + p[i].abs());
            q[i] = p[i] + h;
            let up = obj(&q);
            q[i] = p[i] - h;
            let down = obj(&q);
            q[i] = p[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Maximize the stage-1 log marginal of a Stein kernel over `(c, log l, log A)`.
///
/// Full-batch gradient ascent from `(c, l, A) = (0, l0, A0)`, where `(l0, A0)` is taken from
/// the kernel passed in. The gradient is rescaled to unit length when longer than one, and a
/// step that lands on a non-finite objective is rejected and the step halved. Returns the
/// best iterate seen.
pub fn stein_c_descent(
    kernel: &KernelSpec,
    samples: &[Vec<f64>],
    f_vals: &[f64],
    lambda_x: f64,
    options: DescentOptions,
) -> Result<SteinChoice> {
    if kernel.stein_constant().is_none() {
        return Err(Error::InvalidParameter("stein_c_descent needs a Stein kernel".into()));
    }
    check_targets(f_vals)?;
    let obj = |p: &[f64]| -> f64 {
        let k = kernel
            .with_params(p[1].exp(), p[2].exp())
            .and_then(|k| k.with_stein_constant(p[0]));
        match k.and_then(|k| stage1_log_marginal(&k, samples, f_vals, lambda_x)) {
            Ok(v) => v,
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let mut p = vec![0.0, kernel.lengthscale().ln(), kernel.amplitude().ln()];
    let mut current = obj(&p);
    if !current.is_finite() {
        return Err(Error::NonFinite("Stein log marginal at initialization".into()));
    }
    let mut best = (p.clone(), current);
    let mut step = options.step;
    for _ in 0..options.iterations {
        let mut g = central_gradient(&obj, &p);
        if g.iter().any(|v| !v.is_finite()) {
            step *= 0.5;
            continue;
        }
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1.0 {
            g.iter_mut().for_each(|v| *v /= norm);
        }
        let cand: Vec<f64> = p.iter().zip(&g).map(|(a, b)| a + step * b).collect();
        let v = obj(&cand);
        if !v.is_finite() {
            step *= 0.5;
            continue;
        }
        p = cand;
        current = v;
        if current > best.1 {
            best = (p.clone(), current);
        }
    }
    let (p, v) = best;
    Ok(SteinChoice { constant: p[0], lengthscale: p[1].exp(), amplitude: p[2].exp(), log_marginal: v })
}
