//! Kernel mean embeddings `mu(x) = E_{X~P}[k(X, x)]` and initial errors
//! `E_{X,X'~P}[k(X, X')]` for the kernel/measure pairs with closed forms,
//! plus a brute-force quadrature / Monte Carlo oracle to check them against.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernels::{eval_kernel, KernelSpec, MaternMetric};
use crate::measure::{Gaussian, Measure};
use crate::special::{erfcx, integrate, normal_pdf};

const SQRT_3: f64 = 1.732_050_807_568_877_2;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// How the initial error of a pair is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialErrorMode {
    /// Closed form (default).
    Exact,
    /// Average of the embedding over supplied samples from the measure.
    Empirical(Vec<Vec<f64>>),
}

#[derive(Debug, Clone)]
enum Closed {
    RbfGaussian {
        amplitude: f64,
        mean: Vec<f64>,
        /// Cholesky factor of `Sigma + l^2 Id`.
        widened: DMatrix<f64>,
        scale: f64,
        initial: f64,
    },
    LogGaussLognormal {
        log_mean: f64,
        spread: f64,
        scale: f64,
        initial: f64,
    },
    Stein {
        constant: f64,
    },
    MaternStdNormal {
        a: f64,
        amplitude: f64,
        initial: f64,
    },
}

/// A kernel together with a measure whose embedding is available in closed form.
#[derive(Debug, Clone)]
pub struct EmbeddingPair {
    kernel: KernelSpec,
    measure: Measure,
    closed: Closed,
    mode: InitialErrorMode,
}

/// `E_{u~N(0,1)}[(1 + a|u - y|) exp(-a|u - y|)]`.
pub fn matern_std_normal_embedding_1d(a: f64, y: f64) -> f64 {
    // One-sided piece; the other side is the mirror image in y.
    let side = |y: f64| {
        let z = y + a;
        (-0.5 * y * y).exp()
            * (0.5 * (1.0 - a * z) * erfcx(z / std::f64::consts::SQRT_2) + a * FRAC_1_SQRT_2PI)
    };
    side(y) + side(-y)
}

/// `E[(1 + a|U - U'|) exp(-a|U - U'|)]` for independent standard normals.
pub fn matern_std_normal_initial_error_1d(a: f64) -> f64 {
    // U - U' ~ sqrt(2) N(0, 1): an embedding at zero with rate a sqrt(2).
    matern_std_normal_embedding_1d(a * std::f64::consts::SQRT_2, 0.0)
}

impl EmbeddingPair {
    pub fn new(kernel: KernelSpec, measure: Measure) -> Result<Self> {
        kernel.validate()?;
        let closed = match (&kernel, &measure) {
            (KernelSpec::GaussianRbf { lengthscale, amplitude }, Measure::Gaussian(g)) => {
                rbf_gaussian(*lengthscale, *amplitude, g)?
            }
            (KernelSpec::LogGaussian { lengthscale, amplitude }, Measure::Lognormal { log_mean, log_var }) => {
                let l2 = lengthscale * lengthscale;
                Closed::LogGaussLognormal {
                    log_mean: *log_mean,
                    spread: l2 + log_var,
                    scale: amplitude * lengthscale / (l2 + log_var).sqrt(),
                    initial: amplitude * lengthscale / (l2 + 2.0 * log_var).sqrt(),
                }
            }
            (KernelSpec::Stein { score, constant, .. }, m) => {
                if score.dim() != m.dim() {
                    return Err(Error::DimensionMismatch { expected: m.dim(), got: score.dim() });
                }
                if let Some(sm) = score.measure() {
                    if sm != m {
                        return Err(Error::UnsupportedPair(
                            "Stein score was derived from a different measure".into(),
                        ));
                    }
                }
                Closed::Stein { constant: *constant }
            }
            (KernelSpec::Matern32 { lengthscale, amplitude, metric }, Measure::Gaussian(g))
                if is_standard(g) && (*metric == MaternMetric::TensorProduct || g.dim() == 1) =>
            {
                let a = SQRT_3 / lengthscale;
                Closed::MaternStdNormal {
                    a,
                    amplitude: *amplitude,
                    initial: amplitude * matern_std_normal_initial_error_1d(a).powi(g.dim() as i32),
                }
            }
            (k, m) => {
                return Err(Error::UnsupportedPair(format!("{} with {m:?}", k.describe())));
            }
        };
        Ok(Self { kernel, measure, closed, mode: InitialErrorMode::Exact })
    }

    /// Replace the closed-form initial error by the sample average of the embedding.
    pub fn with_empirical_initial_error(mut self, samples: Vec<Vec<f64>>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput);
        }
        self.mode = InitialErrorMode::Empirical(samples);
        Ok(self)
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    pub fn mode(&self) -> &InitialErrorMode {
        &self.mode
    }

    pub fn dim(&self) -> usize {
        self.measure.dim()
    }

    pub fn kme(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(match &self.closed {
            Closed::RbfGaussian { amplitude, mean, widened, scale, .. } => {
                let r = DVector::from_iterator(x.len(), x.iter().zip(mean).map(|(a, b)| a - b));
                let z = widened.solve_lower_triangular(&r).expect("positive diagonal");
                amplitude * scale * (-0.5 * z.norm_squared()).exp()
            }
            Closed::LogGaussLognormal { log_mean, spread, scale, .. } => {
                let v = x[0];
                if !(v > 0.0) {
                    return Err(Error::NonPositiveInput(v));
                }
                scale * (-(v.ln() - log_mean).powi(2) / (2.0 * spread)).exp()
            }
            Closed::Stein { constant } => *constant,
            Closed::MaternStdNormal { a, amplitude, .. } => {
                amplitude * x.iter().map(|&y| matern_std_normal_embedding_1d(*a, y)).product::<f64>()
            }
        })
    }

    pub fn kme_many(&self, xs: &[Vec<f64>]) -> Result<DVector<f64>> {
        let vals = xs.iter().map(|x| self.kme(x)).collect::<Result<Vec<_>>>()?;
        Ok(DVector::from_vec(vals))
    }

    pub fn initial_error(&self) -> Result<f64> {
        if let InitialErrorMode::Empirical(samples) = &self.mode {
            let total = samples.iter().map(|x| self.kme(x)).sum::<Result<f64>>()?;
            return Ok(total / samples.len() as f64);
        }
        Ok(match &self.closed {
            Closed::RbfGaussian { initial, .. }
            | Closed::LogGaussLognormal { initial, .. }
            | Closed::MaternStdNormal { initial, .. } => *initial,
            Closed::Stein { constant } => *constant,
        })
    }
}

fn is_standard(g: &Gaussian) -> bool {
    let d = g.dim();
    g.mean().iter().all(|&m| m == 0.0) && g.cov() == &DMatrix::<f64>::identity(d, d)
}

fn rbf_gaussian(l: f64, amplitude: f64, g: &Gaussian) -> Result<Closed> {
    let d = g.dim();
    let l2 = l * l;
    let id = DMatrix::<f64>::identity(d, d);
    let widened_cov = g.cov() + &id * l2;
    let widened = widened_cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidParameter("Sigma + l^2 Id is not SPD".into()))?
        .l();
    // |Id + Sigma / l^2|^{-1/2} and |Id + 2 Sigma / l^2|^{-1/2}.
    let det1 = (&id + g.cov() / l2).determinant();
    let det2 = (&id + g.cov() * (2.0 / l2)).determinant();
    Ok(Closed::RbfGaussian {
        amplitude,
        mean: g.mean().to_vec(),
        widened,
        scale: det1.powf(-0.5),
        initial: amplitude * det2.powf(-0.5),
    })
}

/// Closed-form kernel mean embedding of `pair` at `x`.
pub fn kme(pair: &EmbeddingPair, x: &[f64]) -> Result<f64> {
    pair.kme(x)
}

/// Closed-form (or empirical, if so configured) initial error of `pair`.
pub fn initial_error(pair: &EmbeddingPair) -> Result<f64> {
    pair.initial_error()
}

/// Map standard-normal coordinates `u` to `m + L u`, `L` the lower Cholesky factor of the covariance.
pub fn inverse_transform(measure: &Measure, u: &[f64]) -> Result<Vec<f64>> {
    match measure {
        Measure::Gaussian(g) => {
            if u.len() != g.dim() {
                return Err(Error::DimensionMismatch { expected: g.dim(), got: u.len() });
            }
            Ok(g.color(u))
        }
        other => Err(Error::UnsupportedPair(format!("inverse transform needs a Gaussian, got {other:?}"))),
    }
}

/// The importance-sampling rewrite `g(x) = f(x) p(x) / q(x)`.
pub fn reweight_integrand<'a, F>(f: F, p: &'a Measure, q: &'a Measure) -> impl Fn(&[f64]) -> Result<f64> + 'a
where
    F: Fn(&[f64]) -> f64 + 'a,
{
    move |x: &[f64]| {
        let qx = q.density(x)?;
        if !(qx > 0.0) {
            return Err(Error::ZeroDensity);
        }
        Ok(f(x) * p.density(x)? / qx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    Quadrature,
    MonteCarlo,
}

/// Brute-force estimate with its error bound (quadrature) or standard error (Monte Carlo).
#[derive(Debug, Clone, Copy)]
pub struct OracleEstimate {
    pub value: f64,
    pub error: f64,
    pub method: OracleMethod,
}

pub const ORACLE_MC_DRAWS: usize = 1_000_000;
const ORACLE_MAX_INTERVALS: usize = 4000;

/// `E_{X~P}[g(X)]` by adaptive quadrature when `dim <= 2`, Monte Carlo otherwise.
///
/// `breaks` are points (in `x` coordinates) where `g` has a kink.
pub fn numeric_expectation<G: Fn(&[f64]) -> f64>(
    measure: &Measure,
    g: G,
    breaks: &[f64],
    tol: f64,
) -> Result<OracleEstimate> {
    match measure.dim() {
        1 | 2 => quadrature_expectation(measure, &g, breaks, tol),
        _ => Ok(mc_expectation(measure, &g, ORACLE_MC_DRAWS, 0)),
    }
}

/// Plain Monte Carlo expectation with `draws` samples from a seeded stream.
pub fn mc_expectation<G: Fn(&[f64]) -> f64>(measure: &Measure, g: &G, draws: usize, seed: u64) -> OracleEstimate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    for _ in 0..draws {
        let v = g(&measure.sample_one(&mut rng));
        sum += v;
        sum2 += v * v;
    }
    let n = draws as f64;
    let mean = sum / n;
    let var = (sum2 / n - mean * mean).max(0.0) * n / (n - 1.0);
    OracleEstimate { value: mean, error: (var / n).sqrt(), method: OracleMethod::MonteCarlo }
}

fn quadrature_expectation<G: Fn(&[f64]) -> f64>(
    measure: &Measure,
    g: &G,
    breaks: &[f64],
    tol: f64,
) -> Result<OracleEstimate> {
    let fail = |estimate: f64| Error::ToleranceNotReached { tol, estimate };
    let q = match measure {
        Measure::Gaussian(gauss) if gauss.dim() == 1 => {
            let m = gauss.mean()[0];
            let s = gauss.cov()[(0, 0)].sqrt();
            let bs: Vec<f64> = breaks.iter().map(|b| (b - m) / s).collect();
            integrate(|u| g(&[m + s * u]) * normal_pdf(u), -14.0, 14.0, &bs, tol, ORACLE_MAX_INTERVALS)
        }
        Measure::Gaussian(gauss) => {
            // Whitened coordinates: x = m + L u with u standard normal.
            let kink = if breaks.len() == 2 { Some(gauss.whiten(breaks)) } else { None };
            let outer_breaks: Vec<f64> = kink.iter().map(|k| k[0]).collect();
            let mut failed = false;
            let q = integrate(
                |u1| {
                    let inner_breaks: Vec<f64> = kink.iter().map(|k| k[1]).collect();
                    let inner = integrate(
                        |u2| g(&gauss.color(&[u1, u2])) * normal_pdf(u2),
                        -14.0,
                        14.0,
                        &inner_breaks,
                        tol * 1e-2,
                        ORACLE_MAX_INTERVALS,
                    );
                    match inner {
                        Some(q) => q.value * normal_pdf(u1),
                        None => {
                            failed = true;
                            f64::NAN
                        }
                    }
                },
                -14.0,
                14.0,
                &outer_breaks,
                tol,
                ORACLE_MAX_INTERVALS,
            );
            if failed {
                return Err(fail(f64::NAN));
            }
            q
        }
        Measure::Lognormal { log_mean, log_var } => {
            let s = log_var.sqrt();
            let bs: Vec<f64> = breaks.iter().filter(|b| **b > 0.0).map(|b| (b.ln() - log_mean) / s).collect();
            integrate(|u| g(&[(log_mean + s * u).exp()]) * normal_pdf(u), -14.0, 14.0, &bs, tol, ORACLE_MAX_INTERVALS)
        }
        Measure::Gamma { shape, rate } => {
            let upper = (shape + 60.0 * shape.sqrt() + 60.0) / rate;
            let density = |x: f64| measure.density(&[x]).unwrap_or(0.0);
            integrate(|x| if x > 0.0 { g(&[x]) * density(x) } else { 0.0 }, 0.0, upper, breaks, tol, ORACLE_MAX_INTERVALS)
        }
        Measure::Uniform { lower, upper } if lower.len() == 1 => {
            let w = upper[0] - lower[0];
            integrate(|x| g(&[x]) / w, lower[0], upper[0], breaks, tol, ORACLE_MAX_INTERVALS)
        }
        Measure::Uniform { lower, upper } => {
            let area = (upper[0] - lower[0]) * (upper[1] - lower[1]);
            let outer_breaks: Vec<f64> = breaks.first().copied().into_iter().collect();
            let inner_breaks: Vec<f64> = breaks.get(1).copied().into_iter().collect();
            integrate(
                |x1| {
                    integrate(|x2| g(&[x1, x2]), lower[1], upper[1], &inner_breaks, tol * 1e-2, ORACLE_MAX_INTERVALS)
                        .map_or(f64::NAN, |q| q.value)
                        / area
                },
                lower[0],
                upper[0],
                &outer_breaks,
                tol,
                ORACLE_MAX_INTERVALS,
            )
        }
    };
    match q {
        Some(q) if q.value.is_finite() => {
            Ok(OracleEstimate { value: q.value, error: q.error, method: OracleMethod::Quadrature })
        }
        Some(q) => Err(fail(q.value)),
        None => Err(fail(f64::NAN)),
    }
}

/// Brute-force estimate of `E_{X~P}[k(X, x)]`, independent of the closed forms above.
pub fn numeric_kme_oracle(kernel: &KernelSpec, measure: &Measure, x: &[f64], tol: f64) -> Result<OracleEstimate> {
    if x.len() != measure.dim() {
        return Err(Error::DimensionMismatch { expected: measure.dim(), got: x.len() });
    }
    kernel.validate()?;
    numeric_expectation(measure, |z| eval_kernel(kernel, z, x).unwrap_or(f64::NAN), x, tol)
}

/// Monte Carlo-only variant of [`numeric_kme_oracle`].
pub fn numeric_kme_oracle_mc(kernel: &KernelSpec, measure: &Measure, x: &[f64], draws: usize, seed: u64) -> Result<OracleEstimate> {
    if x.len() != measure.dim() {
        return Err(Error::DimensionMismatch { expected: measure.dim(), got: x.len() });
    }
    kernel.validate()?;
    Ok(mc_expectation(measure, &|z: &[f64]| eval_kernel(kernel, z, x).unwrap_or(f64::NAN), draws, seed))
}
