//! Probability measures: densities, scores and samplers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::special::{ln_gamma, LN_SQRT_2PI};

/// Multivariate normal with a precomputed lower Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    mean: Vec<f64>,
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
    log_det: f64,
}

impl Gaussian {
    pub fn new(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::EmptyInput);
        }
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: cov.nrows() });
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Gaussian parameters".into()));
        }
        if (&cov - cov.transpose()).amax() > 1e-12 * cov.amax().max(1.0) {
            return Err(Error::InvalidParameter("covariance is not symmetric".into()));
        }
        let min_eig = SymmetricEigen::new(cov.clone()).eigenvalues.min();
        if min_eig <= 1e-12 * cov.trace() {
            return Err(Error::InvalidParameter(format!(
                "covariance is degenerate (min eigenvalue {min_eig:e})"
            )));
        }
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidParameter("covariance is not positive definite".into()))?
            .l();
        let log_det = (0..d).map(|i| 2.0 * chol[(i, i)].ln()).sum();
        Ok(Self { mean, cov, chol, log_det })
    }

    pub fn standard(d: usize) -> Self {
        Self::new(vec![0.0; d], DMatrix::identity(d, d)).expect("identity covariance is valid")
    }

    pub fn isotropic(mean: Vec<f64>, var: f64) -> Result<Self> {
        let d = mean.len();
        Self::new(mean, DMatrix::identity(d, d) * var)
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Lower-triangular `L` with `L L^T = cov`.
    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `L^{-1} (x - m)`: the standard-normal coordinates of `x`.
    pub fn whiten(&self, x: &[f64]) -> DVector<f64> {
        let r = DVector::from_iterator(self.dim(), x.iter().zip(&self.mean).map(|(a, b)| a - b));
        self.chol.solve_lower_triangular(&r).expect("positive diagonal")
    }

    /// `m + L u`.
    pub fn color(&self, u: &[f64]) -> Vec<f64> {
        let u = DVector::from_column_slice(u);
        let x = &self.chol * u;
        x.iter().zip(&self.mean).map(|(a, b)| a + b).collect()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let z = self.whiten(x);
        -0.5 * z.norm_squared() - 0.5 * self.log_det - self.dim() as f64 * LN_SQRT_2PI
    }

    fn score(&self, x: &[f64]) -> Vec<f64> {
        let z = self.whiten(x);
        let g = self.chol.transpose().solve_upper_triangular(&z).expect("positive diagonal");
        g.iter().map(|v| -v).collect()
    }
}

/// A probability distribution used either as a conditional `P_theta` or the parameter law `Q`.
#[derive(Debug, Clone, PartialEq)]
pub enum Measure {
    Gaussian(Gaussian),
    /// `exp(N(log_mean, log_var))` on the positive half-line.
    Lognormal { log_mean: f64, log_var: f64 },
    /// Density proportional to `x^(shape-1) exp(-rate x)`.
    Gamma { shape: f64, rate: f64 },
    /// Product of uniforms on `[lower_i, upper_i]`.
    Uniform { lower: Vec<f64>, upper: Vec<f64> },
}

impl Measure {
    pub fn gaussian(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        Gaussian::new(mean, cov).map(Measure::Gaussian)
    }

    pub fn lognormal(log_mean: f64, log_var: f64) -> Result<Self> {
        if !(log_var > 0.0) || !log_mean.is_finite() || !log_var.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lognormal({log_mean}, {log_var})"
            )));
        }
        Ok(Measure::Lognormal { log_mean, log_var })
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && rate > 0.0) || !shape.is_finite() || !rate.is_finite() {
            return Err(Error::InvalidParameter(format!("gamma({shape}, {rate})")));
        }
        Ok(Measure::Gamma { shape, rate })
    }

    pub fn uniform(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), got: upper.len() });
        }
        if lower.is_empty() || lower.iter().zip(&upper).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidParameter("uniform bounds must satisfy a < b".into()));
        }
        Ok(Measure::Uniform { lower, upper })
    }

    pub fn dim(&self) -> usize {
        match self {
            Measure::Gaussian(g) => g.dim(),
            Measure::Lognormal { .. } | Measure::Gamma { .. } => 1,
            Measure::Uniform { lower, .. } => lower.len(),
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }

    /// Log-density; `-inf` outside the support.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(match self {
            Measure::Gaussian(g) => g.log_density(x),
            Measure::Lognormal { log_mean, log_var } => {
                let v = x[0];
                if v <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    let u = v.ln();
                    -(u - log_mean).powi(2) / (2.0 * log_var) - 0.5 * log_var.ln() - LN_SQRT_2PI - u
                }
            }
            Measure::Gamma { shape, rate } => {
                let v = x[0];
                if v <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    shape * rate.ln() - ln_gamma(*shape) + (shape - 1.0) * v.ln() - rate * v
                }
            }
            Measure::Uniform { lower, upper } => {
                let inside = x.iter().zip(lower.iter().zip(upper)).all(|(v, (a, b))| v >= a && v <= b);
                if inside {
                    -lower.iter().zip(upper).map(|(a, b)| (b - a).ln()).sum::<f64>()
                } else {
                    f64::NEG_INFINITY
                }
            }
        })
    }

    pub fn density(&self, x: &[f64]) -> Result<f64> {
        self.log_density(x).map(f64::exp)
    }

    /// Gradient of the log-density, `grad_x log p(x)`.
    pub fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(match self {
            Measure::Gaussian(g) => g.score(x),
            Measure::Lognormal { log_mean, log_var } => {
                let v = x[0];
                vec![-1.0 / v - (v.ln() - log_mean) / (log_var * v)]
            }
            Measure::Gamma { shape, rate } => vec![(shape - 1.0) / x[0] - rate],
            Measure::Uniform { lower, .. } => vec![0.0; lower.len()],
        })
    }

    pub fn mean(&self) -> Vec<f64> {
        match self {
            Measure::Gaussian(g) => g.mean().to_vec(),
            Measure::Lognormal { log_mean, log_var } => vec![(log_mean + 0.5 * log_var).exp()],
            Measure::Gamma { shape, rate } => vec![shape / rate],
            Measure::Uniform { lower, upper } => {
                lower.iter().zip(upper).map(|(a, b)| 0.5 * (a + b)).collect()
            }
        }
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Measure::Gaussian(g) => {
                let u: Vec<f64> = (0..g.dim()).map(|_| rng.sample(StandardNormal)).collect();
                g.color(&u)
            }
            Measure::Lognormal { log_mean, log_var } => {
                let z: f64 = rng.sample(StandardNormal);
                vec![(log_mean + log_var.sqrt() * z).exp()]
            }
            Measure::Gamma { shape, rate } => vec![sample_gamma(rng, *shape) / rate],
            Measure::Uniform { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(a, b)| a + (b - a) * rng.gen::<f64>())
                .collect(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<Vec<f64>> {
        (0..count).map(|_| self.sample_one(rng)).collect()
    }
}

/// Marsaglia-Tsang squeeze sampler for a unit-rate gamma variate.
fn sample_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    if shape < 1.0 {
        // Boost: G(a) = G(a + 1) * U^(1/a).
        let u: f64 = rng.gen();
        return sample_gamma(rng, shape + 1.0) * u.powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let z: f64 = rng.sample(StandardNormal);
        let v = 1.0 + c * z;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u: f64 = rng.gen();
        if u < 1.0 - 0.0331 * z.powi(4) {
            return d * v;
        }
        if u.ln() < 0.5 * z * z + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Draw `count` points from `measure`; thin wrapper over [`Measure::sample`].
pub fn sample_measure<R: Rng + ?Sized>(measure: &Measure, rng: &mut R, count: usize) -> Vec<Vec<f64>> {
    measure.sample(rng, count)
}
