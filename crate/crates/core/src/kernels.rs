//! Covariance functions, Gram matrices and Langevin-Stein kernels.
//!
//! Every kernel here is stationary in some coordinate system and normalized so
//! that `k(x, x) = A` (Stein kernels excepted). Matérn kernels are of order 3/2:
//!
//! ```text
//! k(r) = A (1 + sqrt(3) r / l) exp(-sqrt(3) r / l)
//! ```
//!
//! with `r` either the Euclidean distance (isotropic) or applied per coordinate
//! and multiplied (tensor product).

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::measure::Measure;

const SQRT_3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaternMetric {
    Isotropic,
    TensorProduct,
}

/// Score function `x -> grad log p(x)` used by Stein kernels.
#[derive(Clone)]
pub enum ScoreFn {
    /// Score of a measure.
    Measure(Arc<Measure>),
    /// The zero map in `d` dimensions.
    Zero(usize),
}

impl ScoreFn {
    pub fn of(measure: Measure) -> Self {
        ScoreFn::Measure(Arc::new(measure))
    }

    pub fn dim(&self) -> usize {
        match self {
            ScoreFn::Measure(m) => m.dim(),
            ScoreFn::Zero(d) => *d,
        }
    }

    pub fn measure(&self) -> Option<&Measure> {
        match self {
            ScoreFn::Measure(m) => Some(m),
            ScoreFn::Zero(_) => None,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            ScoreFn::Measure(m) => m.score(x),
            ScoreFn::Zero(d) => {
                if x.len() != *d {
                    return Err(Error::DimensionMismatch { expected: *d, got: x.len() });
                }
                Ok(vec![0.0; *d])
            }
        }
    }
}

impl fmt::Debug for ScoreFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScoreFn::Measure(m) => write!(f, "ScoreFn({m:?})"),
            ScoreFn::Zero(d) => write!(f, "ScoreFn::Zero({d})"),
        }
    }
}

#[derive(Debug, Clone)]
pub enum KernelSpec {
    GaussianRbf { lengthscale: f64, amplitude: f64 },
    Matern32 { lengthscale: f64, amplitude: f64, metric: MaternMetric },
    /// Gaussian kernel on `log x`; inputs must be strictly positive.
    LogGaussian { lengthscale: f64, amplitude: f64 },
    /// Langevin-Stein kernel of `base` plus the constant `constant`.
    Stein { base: Box<KernelSpec>, score: ScoreFn, constant: f64 },
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::NonFinite(format!("{name} = {v}")));
    }
    if v <= 0.0 {
        return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
    }
    Ok(())
}

impl KernelSpec {
    pub fn rbf(lengthscale: f64, amplitude: f64) -> Result<Self> {
        let k = KernelSpec::GaussianRbf { lengthscale, amplitude };
        k.validate()?;
        Ok(k)
    }

    pub fn matern32(lengthscale: f64, amplitude: f64) -> Result<Self> {
        let k = KernelSpec::Matern32 { lengthscale, amplitude, metric: MaternMetric::Isotropic };
        k.validate()?;
        Ok(k)
    }

    pub fn matern32_tensor(lengthscale: f64, amplitude: f64) -> Result<Self> {
        let k = KernelSpec::Matern32 { lengthscale, amplitude, metric: MaternMetric::TensorProduct };
        k.validate()?;
        Ok(k)
    }

    pub fn log_gaussian(lengthscale: f64, amplitude: f64) -> Result<Self> {
        let k = KernelSpec::LogGaussian { lengthscale, amplitude };
        k.validate()?;
        Ok(k)
    }

    pub fn stein(base: KernelSpec, score: ScoreFn, constant: f64) -> Result<Self> {
        let k = KernelSpec::Stein { base: Box::new(base), score, constant };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::GaussianRbf { lengthscale, amplitude }
            | KernelSpec::Matern32 { lengthscale, amplitude, .. }
            | KernelSpec::LogGaussian { lengthscale, amplitude } => {
                check_positive("lengthscale", *lengthscale)?;
                check_positive("amplitude", *amplitude)
            }
            KernelSpec::Stein { base, constant, .. } => {
                if !constant.is_finite() {
                    return Err(Error::NonFinite(format!("Stein constant = {constant}")));
                }
                match base.as_ref() {
                    KernelSpec::Stein { .. } => Err(Error::NestedStein),
                    KernelSpec::LogGaussian { .. } => Err(Error::UnsupportedPair(
                        "Stein base must be GaussianRbf or Matern32".into(),
                    )),
                    b => b.validate(),
                }
            }
        }
    }

    pub fn lengthscale(&self) -> f64 {
        match self {
            KernelSpec::GaussianRbf { lengthscale, .. }
            | KernelSpec::Matern32 { lengthscale, .. }
            | KernelSpec::LogGaussian { lengthscale, .. } => *lengthscale,
            KernelSpec::Stein { base, .. } => base.lengthscale(),
        }
    }

    pub fn amplitude(&self) -> f64 {
        match self {
            KernelSpec::GaussianRbf { amplitude, .. }
            | KernelSpec::Matern32 { amplitude, .. }
            | KernelSpec::LogGaussian { amplitude, .. } => *amplitude,
            KernelSpec::Stein { base, .. } => base.amplitude(),
        }
    }

    pub fn stein_constant(&self) -> Option<f64> {
        match self {
            KernelSpec::Stein { constant, .. } => Some(*constant),
            _ => None,
        }
    }

    /// Same family with new lengthscale and amplitude (the Stein constant is kept).
    pub fn with_params(&self, lengthscale: f64, amplitude: f64) -> Result<Self> {
        let k = match self {
            KernelSpec::GaussianRbf { .. } => KernelSpec::GaussianRbf { lengthscale, amplitude },
            KernelSpec::Matern32 { metric, .. } => {
                KernelSpec::Matern32 { lengthscale, amplitude, metric: *metric }
            }
            KernelSpec::LogGaussian { .. } => KernelSpec::LogGaussian { lengthscale, amplitude },
            KernelSpec::Stein { base, score, constant } => KernelSpec::Stein {
                base: Box::new(base.with_params(lengthscale, amplitude)?),
                score: score.clone(),
                constant: *constant,
            },
        };
        k.validate()?;
        Ok(k)
    }

    pub fn with_stein_constant(&self, c: f64) -> Result<Self> {
        match self {
            KernelSpec::Stein { base, score, .. } => {
                KernelSpec::stein(base.as_ref().clone(), score.clone(), c)
            }
            _ => Err(Error::InvalidParameter("not a Stein kernel".into())),
        }
    }

    /// Short human-readable description used in result rows.
    pub fn describe(&self) -> String {
        match self {
            KernelSpec::GaussianRbf { lengthscale, amplitude } => {
                format!("rbf(l={lengthscale};A={amplitude})")
            }
            KernelSpec::Matern32 { lengthscale, amplitude, metric } => {
                let m = match metric {
                    MaternMetric::Isotropic => "iso",
                    MaternMetric::TensorProduct => "tensor",
                };
                format!("matern32-{m}(l={lengthscale};A={amplitude})")
            }
            KernelSpec::LogGaussian { lengthscale, amplitude } => {
                format!("loggauss(l={lengthscale};A={amplitude})")
            }
            KernelSpec::Stein { base, constant, .. } => {
                format!("stein[{}](c={constant:.6})", base.describe())
            }
        }
    }
}

fn check_dims(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

#[inline]
fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[inline]
fn matern_1d(a: f64, r: f64) -> f64 {
    let ar = a * r.abs();
    (1.0 + ar) * (-ar).exp()
}

/// Unchecked evaluation of a non-Stein kernel.
fn eval_base(spec: &KernelSpec, x: &[f64], y: &[f64]) -> f64 {
    match spec {
        KernelSpec::GaussianRbf { lengthscale, amplitude } => {
            amplitude * (-0.5 * sq_dist(x, y) / (lengthscale * lengthscale)).exp()
        }
        KernelSpec::Matern32 { lengthscale, amplitude, metric } => {
            let a = SQRT_3 / lengthscale;
            match metric {
                MaternMetric::Isotropic => amplitude * matern_1d(a, sq_dist(x, y).sqrt()),
                MaternMetric::TensorProduct => {
                    amplitude * x.iter().zip(y).map(|(u, v)| matern_1d(a, u - v)).product::<f64>()
                }
            }
        }
        KernelSpec::LogGaussian { lengthscale, amplitude } => {
            let d: f64 = x.iter().zip(y).map(|(u, v)| (u.ln() - v.ln()).powi(2)).sum();
            amplitude * (-0.5 * d / (lengthscale * lengthscale)).exp()
        }
        KernelSpec::Stein { .. } => unreachable!("Stein kernels are evaluated through stein_value"),
    }
}

/// Base kernel value together with `grad_x k`, `grad_y k` and `sum_i d2k/dx_i dy_i`.
#[derive(Debug, Clone)]
pub struct BaseDerivatives {
    pub value: f64,
    pub grad_x: Vec<f64>,
    pub grad_y: Vec<f64>,
    pub trace_cross: f64,
}

pub(crate) fn base_derivatives(base: &KernelSpec, x: &[f64], y: &[f64]) -> BaseDerivatives {
    let d = x.len();
    let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    match base {
        KernelSpec::GaussianRbf { lengthscale, amplitude } => {
            let l2 = lengthscale * lengthscale;
            let r2: f64 = diff.iter().map(|v| v * v).sum();
            let k = amplitude * (-0.5 * r2 / l2).exp();
            let grad_x: Vec<f64> = diff.iter().map(|v| -k * v / l2).collect();
            let grad_y = grad_x.iter().map(|v| -v).collect();
            BaseDerivatives {
                value: k,
                grad_x,
                grad_y,
                trace_cross: k * (d as f64 / l2 - r2 / (l2 * l2)),
            }
        }
        KernelSpec::Matern32 { lengthscale, amplitude, metric: MaternMetric::Isotropic } => {
            let a = SQRT_3 / lengthscale;
            let r = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
            let e = (-a * r).exp();
            let k = amplitude * (1.0 + a * r) * e;
            let g = amplitude * a * a * e;
            let grad_x: Vec<f64> = diff.iter().map(|v| -g * v).collect();
            let grad_y = diff.iter().map(|v| g * v).collect();
            // At r = 0 this is the a.e. limit A * 3 d / l^2.
            BaseDerivatives { value: k, grad_x, grad_y, trace_cross: g * (d as f64 - a * r) }
        }
        KernelSpec::Matern32 { lengthscale, amplitude, metric: MaternMetric::TensorProduct } => {
            let a = SQRT_3 / lengthscale;
            let factors: Vec<f64> = diff.iter().map(|&v| matern_1d(a, v)).collect();
            let dfactors: Vec<f64> = diff.iter().map(|&v| -a * a * v * (-a * v.abs()).exp()).collect();
            let ddfactors: Vec<f64> = diff
                .iter()
                .map(|&v| a * a * (-a * v.abs()).exp() * (1.0 - a * v.abs()))
                .collect();
            let others = |i: usize| -> f64 {
                factors.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, f)| f).product()
            };
            let k = amplitude * factors.iter().product::<f64>();
            let grad_x: Vec<f64> = (0..d).map(|i| amplitude * dfactors[i] * others(i)).collect();
            let grad_y = grad_x.iter().map(|v| -v).collect();
            let trace_cross = (0..d).map(|i| amplitude * ddfactors[i] * others(i)).sum();
            BaseDerivatives { value: k, grad_x, grad_y, trace_cross }
        }
        KernelSpec::LogGaussian { .. } | KernelSpec::Stein { .. } => {
            unreachable!("validated Stein bases are RBF or Matern")
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Stein kernel value from precomputed scores at `x` and `y`.
pub(crate) fn stein_value(base: &KernelSpec, sx: &[f64], sy: &[f64], c: f64, x: &[f64], y: &[f64]) -> f64 {
    let b = base_derivatives(base, x, y);
    dot(sx, sy) * b.value + dot(sx, &b.grad_y) + dot(sy, &b.grad_x) + b.trace_cross + c
}

fn check_log_domain(spec: &KernelSpec, x: &[f64]) -> Result<()> {
    if matches!(spec, KernelSpec::LogGaussian { .. }) {
        if let Some(&v) = x.iter().find(|&&v| !(v > 0.0)) {
            return Err(Error::NonPositiveInput(v));
        }
    }
    Ok(())
}

/// `k(x, y)` for any kernel variant.
pub fn eval_kernel(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    spec.validate()?;
    check_dims(x, y)?;
    check_log_domain(spec, x)?;
    check_log_domain(spec, y)?;
    match spec {
        KernelSpec::Stein { base, score, constant } => {
            stein_eval(base, score, *constant, x, y)
        }
        _ => Ok(eval_base(spec, x, y)),
    }
}

/// Langevin-Stein kernel built from `base` and `score`, shifted by `c`.
pub fn stein_eval(base: &KernelSpec, score: &ScoreFn, c: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    if matches!(base, KernelSpec::Stein { .. }) {
        return Err(Error::NestedStein);
    }
    KernelSpec::Stein { base: Box::new(base.clone()), score: score.clone(), constant: c }.validate()?;
    check_dims(x, y)?;
    if score.dim() != x.len() {
        return Err(Error::DimensionMismatch { expected: score.dim(), got: x.len() });
    }
    let sx = score.eval(x)?;
    let sy = score.eval(y)?;
    Ok(stein_value(base, &sx, &sy, c, x, y))
}

fn check_all(spec: &KernelSpec, pts: &[Vec<f64>], d: usize) -> Result<()> {
    for p in pts {
        if p.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: p.len() });
        }
        check_log_domain(spec, p)?;
    }
    Ok(())
}

/// Gram matrix with entries `k(xs[i], ys[j])`.
pub fn gram(spec: &KernelSpec, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let d = xs.first().or(ys.first()).map_or(0, Vec::len);
    check_all(spec, xs, d)?;
    check_all(spec, ys, d)?;
    let symmetric = std::ptr::eq(xs, ys);
    match spec {
        KernelSpec::Stein { base, score, constant } => {
            if score.dim() != d {
                return Err(Error::DimensionMismatch { expected: score.dim(), got: d });
            }
            let sx = xs.iter().map(|x| score.eval(x)).collect::<Result<Vec<_>>>()?;
            let sy = if symmetric {
                sx.clone()
            } else {
                ys.iter().map(|y| score.eval(y)).collect::<Result<Vec<_>>>()?
            };
            Ok(fill(xs.len(), ys.len(), symmetric, |i, j| {
                stein_value(base, &sx[i], &sy[j], *constant, &xs[i], &ys[j])
            }))
        }
        _ => Ok(fill(xs.len(), ys.len(), symmetric, |i, j| eval_base(spec, &xs[i], &ys[j]))),
    }
}

/// Square Gram matrix of a point set against itself.
pub fn gram_sym(spec: &KernelSpec, xs: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    gram(spec, xs, xs)
}

fn fill<F: FnMut(usize, usize) -> f64>(n: usize, m: usize, symmetric: bool, mut f: F) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, m);
    if symmetric {
        for i in 0..n {
            for j in 0..=i {
                let v = f(i, j);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
    } else {
        for i in 0..n {
            for j in 0..m {
                out[(i, j)] = f(i, j);
            }
        }
    }
    out
}
