//! Comparison estimators: Monte Carlo, importance sampling, polynomial and kernel
//! least-squares Monte Carlo, and multi-output Bayesian quadrature.

use nalgebra::{DMatrix, DVector};

use crate::cbq::{CbqModel, Standardization};
use crate::embeddings::EmbeddingPair;
use crate::error::{Error, Result};
use crate::hyperopt::HyperGrid;
use crate::kernels::{eval_kernel, gram, KernelSpec};
use crate::measure::Measure;
use crate::problems::{Dataset, ProblemSpec};
use crate::solver::RegularizedCholesky;

pub fn mc_estimate(f_vals: &[f64]) -> Result<f64> {
    if f_vals.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(f_vals.iter().sum::<f64>() / f_vals.len() as f64)
}

/// Scaling of the importance-sampling sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsNormalization {
    /// Divide by `T` only.
    Verbatim,
    /// Divide by `N T`, an estimator of `I(theta*)`.
    Normalized,
}

/// Reuse every sample for `theta*` with weights `p_{theta*}(x) / p_{theta_t}(x)`.
pub fn is_estimate(
    problem: &ProblemSpec,
    data: &Dataset,
    arm: usize,
    theta_star: &[f64],
    normalization: IsNormalization,
) -> Result<f64> {
    if problem.theta_dependent() {
        return Err(Error::NotApplicable(format!(
            "importance sampling needs an integrand that does not depend on theta ({} problem)",
            problem.id()
        )));
    }
    let target = problem.conditional_measure(theta_star)?;
    is_weighted_sum(&target, &data.measures, &data.samples, &data.values[arm], normalization)
}

/// The importance-sampling sum for explicit measures and values.
pub fn is_weighted_sum(
    target: &Measure,
    proposals: &[Measure],
    samples: &[Vec<Vec<f64>>],
    values: &[Vec<f64>],
    normalization: IsNormalization,
) -> Result<f64> {
    let t = proposals.len();
    if t == 0 {
        return Err(Error::EmptyInput);
    }
    if samples.len() != t || values.len() != t {
        return Err(Error::DimensionMismatch { expected: t, got: samples.len().min(values.len()) });
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for ((p, xs), fs) in proposals.iter().zip(samples).zip(values) {
        for (x, f) in xs.iter().zip(fs) {
            let lp = p.log_density(x)?;
            if lp == f64::NEG_INFINITY {
                return Err(Error::ZeroDensity);
            }
            total += (target.log_density(x)? - lp).exp() * f;
            count += 1;
        }
    }
    Ok(match normalization {
        IsNormalization::Verbatim => total / t as f64,
        IsNormalization::Normalized => total / count as f64,
    })
}

/// Exponent vectors of all monomials of total degree `<= order` in `dim` variables, graded.
pub fn monomials(dim: usize, order: usize) -> Vec<Vec<usize>> {
    fn rec(dim: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == dim {
            out.push(prefix.clone());
            return;
        }
        for e in (0..=left).rev() {
            prefix.push(e);
            rec(dim, left - e, prefix, out);
            prefix.pop();
        }
    }
    let mut all = Vec::new();
    for deg in 0..=order {
        let mut layer = Vec::new();
        let mut prefix = Vec::new();
        rec(dim, deg, &mut prefix, &mut layer);
        all.extend(layer.into_iter().filter(|m| m.iter().sum::<usize>() == deg));
    }
    all
}

fn monomial_row(theta: &[f64], exps: &[Vec<usize>]) -> Vec<f64> {
    exps.iter().map(|e| theta.iter().zip(e).map(|(t, &k)| t.powi(k as i32)).product()).collect()
}

/// A fitted second-stage regression.
#[derive(Debug, Clone)]
pub enum RegressionModel {
    /// Ridge regression on total-degree monomials with centered, unit-variance columns.
    Polynomial {
        order: usize,
        ridge: f64,
        exponents: Vec<Vec<usize>>,
        col_mean: Vec<f64>,
        col_scale: Vec<f64>,
        coefficients: DVector<f64>,
    },
    /// Kernel ridge regression with a homoscedastic regularizer on standardized targets.
    KernelRidge(CbqModel),
}

/// Least-squares fit of total-degree-`order` polynomials; the intercept is unpenalized.
pub fn lsmc_fit(thetas: &[Vec<f64>], targets: &[f64], order: usize, ridge: f64) -> Result<RegressionModel> {
    if !(1..=4).contains(&order) {
        return Err(Error::InvalidParameter(format!("polynomial order {order} not in 1..=4")));
    }
    if !(ridge >= 0.0) {
        return Err(Error::InvalidParameter(format!("ridge {ridge}")));
    }
    let t = thetas.len();
    if t == 0 {
        return Err(Error::EmptyInput);
    }
    if targets.len() != t {
        return Err(Error::DimensionMismatch { expected: t, got: targets.len() });
    }
    let dim = thetas[0].len();
    let exponents = monomials(dim, order);
    let p = exponents.len();
    let raw = DMatrix::from_fn(t, p, |i, j| monomial_row(&thetas[i], &exponents[j..j + 1])[0]);
    let mut col_mean = vec![0.0; p];
    let mut col_scale = vec![1.0; p];
    for j in 1..p {
        let c = raw.column(j);
        let m = c.mean();
        let s = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / t as f64).sqrt();
        col_mean[j] = m;
        col_scale[j] = if s > 0.0 { s } else { 1.0 };
    }
    let design = DMatrix::from_fn(t, p, |i, j| if j == 0 { 1.0 } else { (raw[(i, j)] - col_mean[j]) / col_scale[j] });
    let rows = if ridge > 0.0 { t + p - 1 } else { t };
    let mut a = DMatrix::zeros(rows, p);
    a.rows_mut(0, t).copy_from(&design);
    let mut b = DVector::zeros(rows);
    b.rows_mut(0, t).copy_from(&DVector::from_column_slice(targets));
    if ridge > 0.0 {
        for j in 1..p {
            a[(t + j - 1, j)] = ridge.sqrt();
        }
    }
    if rows < p {
        return Err(Error::InvalidParameter(format!("rank deficient: {t} points for {p} monomials")));
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= 1e-10 * smax {
        return Err(Error::InvalidParameter(format!("rank deficient design ({t} points, {p} monomials)")));
    }
    let coefficients = svd.solve(&b, 0.0).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(RegressionModel::Polynomial { order, ridge, exponents, col_mean, col_scale, coefficients })
}

/// Kernel ridge regression on standardized targets with regularizer `lambda Id`.
pub fn klsmc_fit(thetas: &[Vec<f64>], targets: &[f64], kernel: &KernelSpec, lambda_theta: f64) -> Result<RegressionModel> {
    let st = Standardization::from_values(targets);
    let zeros = vec![0.0; targets.len()];
    CbqModel::fit(thetas, targets, &zeros, kernel, lambda_theta, st).map(RegressionModel::KernelRidge)
}

impl RegressionModel {
    pub fn predict(&self, theta: &[f64]) -> Result<f64> {
        match self {
            RegressionModel::Polynomial { exponents, col_mean, col_scale, coefficients, .. } => {
                if let Some(e) = exponents.first() {
                    if e.len() != theta.len() {
                        return Err(Error::DimensionMismatch { expected: e.len(), got: theta.len() });
                    }
                }
                let row = monomial_row(theta, exponents);
                Ok(row
                    .iter()
                    .enumerate()
                    .map(|(j, v)| if j == 0 { coefficients[0] } else { coefficients[j] * (v - col_mean[j]) / col_scale[j] })
                    .sum())
            }
            RegressionModel::KernelRidge(m) => m.predict(theta).map(|p| p.0),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            RegressionModel::Polynomial { order, ridge, .. } => format!("p={order};ridge={ridge}"),
            RegressionModel::KernelRidge(m) => {
                format!("{};lam={}", m.kernel().describe(), m.lambda_theta())
            }
        }
    }
}

pub fn lsmc_predict(model: &RegressionModel, theta: &[f64]) -> Result<f64> {
    model.predict(theta)
}

pub fn klsmc_predict(model: &RegressionModel, theta: &[f64]) -> Result<f64> {
    model.predict(theta)
}

/// Number of held-out parameters used to tune baselines: 20% of `T`, at least two.
pub fn validation_size(t: usize) -> usize {
    ((0.2 * t as f64).round() as usize).max(2)
}

/// Ridge values searched for LSMC.
pub const LSMC_RIDGES: [f64; 4] = [0.0, 0.01, 0.1, 1.0];

fn split(t: usize) -> Result<usize> {
    let v = validation_size(t);
    if t < v + 2 {
        return Err(Error::InvalidParameter(format!("T = {t} too small for a validation split")));
    }
    Ok(t - v)
}

fn validation_rmse(model: &RegressionModel, thetas: &[Vec<f64>], targets: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for (th, y) in thetas.iter().zip(targets) {
        s += (model.predict(th)? - y).powi(2);
    }
    Ok((s / thetas.len() as f64).sqrt())
}

/// Pick `(order, ridge)` by held-out RMSE on the last parameters, then refit on all of them.
pub fn lsmc_select(thetas: &[Vec<f64>], targets: &[f64]) -> Result<RegressionModel> {
    let cut = split(thetas.len())?;
    let mut best: Option<(usize, f64, f64)> = None;
    for order in 1..=4 {
        for ridge in LSMC_RIDGES {
            let Ok(m) = lsmc_fit(&thetas[..cut], &targets[..cut], order, ridge) else { continue };
            let Ok(r) = validation_rmse(&m, &thetas[cut..], &targets[cut..]) else { continue };
            if r.is_finite() && best.map_or(true, |b| r < b.2) {
                best = Some((order, ridge, r));
            }
        }
    }
    let (order, ridge, _) = best.ok_or(Error::GridExhausted)?;
    lsmc_fit(thetas, targets, order, ridge)
}

/// Pick `(l, A, lambda)` by held-out RMSE, then refit on all parameters.
pub fn klsmc_select(thetas: &[Vec<f64>], targets: &[f64], family: &KernelSpec, grid: &HyperGrid) -> Result<RegressionModel> {
    grid.validate()?;
    let cut = split(thetas.len())?;
    let mut best: Option<(KernelSpec, f64, f64)> = None;
    for &l in &grid.lengthscales {
        for &a in &grid.amplitudes {
            let Ok(k) = family.with_params(l, a) else { continue };
            for &lam in &grid.lambdas_theta {
                let Ok(m) = klsmc_fit(&thetas[..cut], &targets[..cut], &k, lam) else { continue };
                let Ok(r) = validation_rmse(&m, &thetas[cut..], &targets[cut..]) else { continue };
                if r.is_finite() && best.as_ref().map_or(true, |b| r < b.2) {
                    best = Some((k.clone(), lam, r));
                }
            }
        }
    }
    let (k, lam, _) = best.ok_or(Error::GridExhausted)?;
    klsmc_fit(thetas, targets, &k, lam)
}

/// Joint GP structure of multi-output BQ.
#[derive(Debug, Clone)]
pub enum MobqForm {
    /// One GP on `x` over all `N T` samples.
    XOnly,
    /// Product kernel `k_X(x, x') k_Theta(theta, theta')`.
    Product(KernelSpec),
}

/// Default bound on `N T` for multi-output BQ.
pub const MOBQ_CAP: usize = 3000;

/// A multi-output BQ model fitted on all `N T` samples at once.
#[derive(Debug, Clone)]
pub struct MobqModel {
    nodes: Vec<Vec<f64>>,
    node_thetas: Vec<Vec<f64>>,
    x_kernel: KernelSpec,
    form: MobqForm,
    alpha: DVector<f64>,
    standardization: Standardization,
    jitter: f64,
}

pub fn mobq_fit(
    data: &Dataset,
    arm: usize,
    x_kernel: &KernelSpec,
    form: MobqForm,
    lambda_x: f64,
    cap: usize,
) -> Result<MobqModel> {
    let size = data.n() * data.t();
    if size == 0 {
        return Err(Error::EmptyInput);
    }
    if size > cap {
        return Err(Error::CapExceeded { size, cap });
    }
    if matches!(x_kernel, KernelSpec::Stein { .. }) {
        return Err(Error::UnsupportedPair("multi-output BQ needs a kernel that does not depend on theta".into()));
    }
    let (nodes, node_thetas, values) = stack(data, arm);
    let mut k = gram(x_kernel, &nodes, &nodes)?;
    if let MobqForm::Product(kt) = &form {
        k.component_mul_assign(&gram(kt, &node_thetas, &node_thetas)?);
    }
    let st = Standardization::from_values(&values);
    let chol = RegularizedCholesky::new(&k, lambda_x)?;
    let y = DVector::from_iterator(size, values.iter().map(|v| (v - st.shift) / st.scale));
    let alpha = chol.solve_vec(&y);
    Ok(MobqModel { nodes, node_thetas, x_kernel: x_kernel.clone(), form, alpha, standardization: st, jitter: chol.jitter() })
}

fn stack(data: &Dataset, arm: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>) {
    let size = data.n() * data.t();
    let mut nodes = Vec::with_capacity(size);
    let mut node_thetas = Vec::with_capacity(size);
    let mut values = Vec::with_capacity(size);
    for t in 0..data.t() {
        for (x, f) in data.samples[t].iter().zip(&data.values[arm][t]) {
            nodes.push(x.clone());
            node_thetas.push(data.thetas[t].clone());
            values.push(*f);
        }
    }
    (nodes, node_thetas, values)
}

/// Empirical Bayes choice of the multi-output BQ kernels on the pooled, standardized data.
///
/// `x_template` fixes the x family; `theta_template` selects the product form. The overall
/// amplitude sits on the x kernel. Ties keep the smallest lengthscales, then the smallest
/// amplitude.
pub fn mobq_select(
    data: &Dataset,
    arm: usize,
    x_template: &KernelSpec,
    theta_template: Option<&KernelSpec>,
    grid: &HyperGrid,
    cap: usize,
) -> Result<(KernelSpec, MobqForm)> {
    let size = data.n() * data.t();
    if size == 0 {
        return Err(Error::EmptyInput);
    }
    if size > cap {
        return Err(Error::CapExceeded { size, cap });
    }
    let (nodes, node_thetas, values) = stack(data, arm);
    let st = Standardization::from_values(&values);
    let y = DMatrix::from_iterator(size, 1, values.iter().map(|v| (v - st.shift) / st.scale));
    let n = size as f64;
    let theta_ls: Vec<Option<f64>> = match theta_template {
        Some(_) => grid.lengthscales.iter().map(|&l| Some(l)).collect(),
        None => vec![None],
    };
    let mut best: Option<(f64, KernelSpec, MobqForm)> = None;
    for &lx in &grid.lengthscales {
        let kx = x_template.with_params(lx, 1.0)?;
        let gx = gram(&kx, &nodes, &nodes)?;
        for &lt in &theta_ls {
            let (k, form) = match (lt, theta_template) {
                (Some(lt), Some(tt)) => {
                    let kt = tt.with_params(lt, 1.0)?;
                    (gx.component_mul(&gram(&kt, &node_thetas, &node_thetas)?), MobqForm::Product(kt))
                }
                _ => (gx.clone(), MobqForm::XOnly),
            };
            let Ok(chol) = RegularizedCholesky::new(&k, 0.0) else { continue };
            let quad = chol.half_solve(&y).norm_squared();
            let log_det = chol.log_det();
            for &a in &grid.amplitudes {
                let v = -0.5 * (n * a.ln() + log_det) - 0.5 * n * (2.0 * std::f64::consts::PI).ln() - 0.5 * quad / a;
                if v.is_finite() && best.as_ref().map_or(true, |b| v > b.0) {
                    best = Some((v, x_template.with_params(lx, a)?, form.clone()));
                }
            }
        }
    }
    best.map(|(_, k, f)| (k, f)).ok_or(Error::GridExhausted)
}

impl MobqModel {
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Estimate of `I(theta*)` with `target = P_{theta*}`.
    pub fn predict(&self, theta_star: &[f64], target: &Measure) -> Result<f64> {
        let pair = EmbeddingPair::new(self.x_kernel.clone(), target.clone())?;
        let mut s = 0.0;
        for (j, x) in self.nodes.iter().enumerate() {
            let mut z = pair.kme(x)?;
            if let MobqForm::Product(kt) = &self.form {
                z *= eval_kernel(kt, theta_star, &self.node_thetas[j])?;
            }
            s += z * self.alpha[j];
        }
        Ok(self.standardization.shift + self.standardization.scale * s)
    }
}

/// One-shot multi-output BQ estimate at `theta*`.
#[allow(clippy::too_many_arguments)]
pub fn mobq_estimate(
    data: &Dataset,
    arm: usize,
    x_kernel: &KernelSpec,
    form: MobqForm,
    lambda_x: f64,
    theta_star: &[f64],
    target: &Measure,
    cap: usize,
) -> Result<f64> {
    mobq_fit(data, arm, x_kernel, form, lambda_x, cap)?.predict(theta_star, target)
}
