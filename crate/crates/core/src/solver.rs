//! Cholesky factorization of regularized Gram matrices with jitter escalation.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Relative jitter levels tried, in order, after the plain factorization fails.
pub const JITTER_LADDER: [f64; 3] = [1e-10, 1e-8, 1e-6];

/// Squared-pivot ratio below which a factorization is treated as numerically singular.
const MIN_PIVOT_RATIO: f64 = 1e-13;

/// Cholesky factor of `K + diag(reg) + jitter * Id`.
#[derive(Debug, Clone)]
pub struct RegularizedCholesky {
    factor: Cholesky<f64, Dyn>,
    jitter: f64,
}

impl RegularizedCholesky {
    /// Factor `K + reg * Id`.
    pub fn new(k: &DMatrix<f64>, reg: f64) -> Result<Self> {
        let diag = DVector::from_element(k.nrows(), reg);
        Self::with_diagonal(k, &diag)
    }

    /// Factor `K + diag(reg)` with a per-entry regularizer.
    pub fn with_diagonal(k: &DMatrix<f64>, reg: &DVector<f64>) -> Result<Self> {
        let n = k.nrows();
        if k.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: k.ncols() });
        }
        if reg.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: reg.len() });
        }
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        if k.iter().chain(reg.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Gram matrix entry".into()));
        }
        let mut base = k.clone();
        for i in 0..n {
            base[(i, i)] += reg[i];
        }
        let scale = (k.trace() / n as f64).abs().max(f64::MIN_POSITIVE);

        let attempt = |jitter: f64| {
            let mut m = base.clone();
            if jitter > 0.0 {
                for i in 0..n {
                    m[(i, i)] += jitter;
                }
            }
            Cholesky::new(m).filter(well_conditioned)
        };

        if let Some(factor) = attempt(0.0) {
            return Ok(Self { factor, jitter: 0.0 });
        }
        let mut last = 0.0;
        for rel in JITTER_LADDER {
            last = rel * scale;
            if let Some(factor) = attempt(last) {
                return Ok(Self { factor, jitter: last });
            }
        }
        Err(Error::Factorization { jitter: last })
    }

    /// Jitter that had to be added on top of the requested regularizer (0 if none).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.factor.l_dirty().nrows()
    }

    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.factor.solve(b)
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.factor.solve(b)
    }

    /// `L^{-1} b`, so that `b^T A^{-1} b = |L^{-1} b|^2`.
    pub fn half_solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let l = self.factor.l();
        l.solve_lower_triangular(b).expect("Cholesky factor has a positive diagonal")
    }

    /// `log |K + reg|` from the factor diagonal.
    pub fn log_det(&self) -> f64 {
        let l = self.factor.l_dirty();
        (0..l.nrows()).map(|i| 2.0 * l[(i, i)].ln()).sum()
    }

    /// Ratio of the largest to the smallest squared pivot; a cheap lower bound on the condition number.
    pub fn condition_estimate(&self) -> f64 {
        let l = self.factor.l_dirty();
        let (lo, hi) = (0..l.nrows()).fold((f64::INFINITY, 0.0f64), |(lo, hi), i| {
            let p = l[(i, i)] * l[(i, i)];
            (lo.min(p), hi.max(p))
        });
        hi / lo
    }
}

fn well_conditioned(c: &Cholesky<f64, Dyn>) -> bool {
    let l = c.l_dirty();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for i in 0..l.nrows() {
        let p = l[(i, i)] * l[(i, i)];
        if !p.is_finite() {
            return false;
        }
        lo = lo.min(p);
        hi = hi.max(p);
    }
    lo > MIN_PIVOT_RATIO * hi
}

/// Solve `(K + reg * Id) X = B`, returning the solution and the jitter that was needed.
pub fn regularized_cholesky_solve(
    k: &DMatrix<f64>,
    reg: f64,
    b: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, f64)> {
    if reg < 0.0 {
        return Err(Error::InvalidParameter(format!("regularizer {reg} < 0")));
    }
    if b.nrows() != k.nrows() {
        return Err(Error::DimensionMismatch { expected: k.nrows(), got: b.nrows() });
    }
    let chol = RegularizedCholesky::new(k, reg)?;
    Ok((chol.solve(b), chol.jitter()))
}
