//! Expected loss of a butterfly call option after a multiplicative price shock.

use crate::error::{Error, Result};
use crate::measure::Measure;
use crate::special::normal_cdf;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinanceConfig {
    pub k1: f64,
    pub k2: f64,
    pub shock: f64,
    pub s0: f64,
    pub volatility: f64,
    /// Time of the shock.
    pub eta: f64,
    /// Maturity.
    pub zeta: f64,
}

impl Default for FinanceConfig {
    fn default() -> Self {
        Self { k1: 50.0, k2: 150.0, shock: 0.2, s0: 100.0, volatility: 0.3, eta: 1.0, zeta: 2.0 }
    }
}

/// `max(S-K1,0) + max(S-K2,0) - 2 max(S-(K1+K2)/2, 0)`.
pub fn butterfly_payoff(s: f64, k1: f64, k2: f64) -> f64 {
    let mid = 0.5 * (k1 + k2);
    (s - k1).max(0.0) + (s - k2).max(0.0) - 2.0 * (s - mid).max(0.0)
}

/// Loss `psi(x) - psi((1 + s) x)` caused by the shock.
pub fn finance_integrand(x: f64, config: &FinanceConfig) -> f64 {
    butterfly_payoff(x, config.k1, config.k2) - butterfly_payoff((1.0 + config.shock) * x, config.k1, config.k2)
}

/// `E[max(X - K, 0)]` for `log X ~ N(m, v)`.
pub fn lognormal_call(m: f64, v: f64, k: f64) -> f64 {
    let mean = (m + 0.5 * v).exp();
    if k <= 0.0 {
        return mean - k;
    }
    let sd = v.sqrt();
    let d1 = (m + v - k.ln()) / sd;
    mean * normal_cdf(d1) - k * normal_cdf(d1 - sd)
}

impl FinanceConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.k1 > 0.0
            && self.k2 > self.k1
            && self.shock >= 0.0
            && self.s0 > 0.0
            && self.volatility > 0.0
            && self.eta > 0.0
            && self.zeta > self.eta;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("finance config {self:?}")))
        }
    }

    /// Law of the shock-time price `theta`.
    pub fn theta_prior(&self) -> Result<Measure> {
        let v = self.volatility.powi(2) * self.eta;
        Measure::lognormal(self.s0.ln() - 0.5 * v, v)
    }

    /// `(log-mean, log-variance)` of the maturity price given `theta`.
    pub fn conditional_params(&self, theta: f64) -> Result<(f64, f64)> {
        if !(theta > 0.0) {
            return Err(Error::NonPositiveInput(theta));
        }
        let v = self.volatility.powi(2) * (self.zeta - self.eta);
        Ok((theta.ln() - 0.5 * v, v))
    }

    pub fn conditional_measure(&self, theta: f64) -> Result<Measure> {
        let (m, v) = self.conditional_params(theta)?;
        Measure::lognormal(m, v)
    }

    /// Closed-form `E[f(X) | theta]` assembled from lognormal call prices.
    pub fn exact(&self, theta: f64) -> Result<f64> {
        let (m, v) = self.conditional_params(theta)?;
        let mid = 0.5 * (self.k1 + self.k2);
        let psi = |shift: f64| {
            let m = m + shift;
            lognormal_call(m, v, self.k1) + lognormal_call(m, v, self.k2) - 2.0 * lognormal_call(m, v, mid)
        };
        Ok(psi(0.0) - psi((1.0 + self.shock).ln()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payoff_identities() {
        assert_eq!(butterfly_payoff(100.0, 50.0, 150.0), 50.0);
        assert_eq!(butterfly_payoff(40.0, 50.0, 150.0), 0.0);
        assert_eq!(butterfly_payoff(200.0, 50.0, 150.0), 0.0);
        assert_eq!(butterfly_payoff(75.0, 50.0, 150.0), 25.0);
        let c = FinanceConfig { shock: 0.0, ..FinanceConfig::default() };
        for x in [10.0, 60.0, 99.0, 140.0, 300.0] {
            assert_eq!(finance_integrand(x, &c), 0.0);
        }
    }

    #[test]
    fn call_with_vanishing_strike_is_the_mean() {
        let (m, v) = (0.3, 0.2);
        let c = lognormal_call(m, v, 1e-300);
        assert!((c - (m + 0.5 * v).exp()).abs() < 1e-12);
    }

    #[test]
    fn no_shock_no_loss() {
        let c = FinanceConfig { shock: 0.0, ..FinanceConfig::default() };
        assert_eq!(c.exact(100.0).unwrap(), 0.0);
        assert!(c.exact(-1.0).is_err());
    }
}
