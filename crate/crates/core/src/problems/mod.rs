//! Benchmark conditional-expectation problems `I(theta) = E_{X ~ P_theta}[f(X, theta)]`.

pub mod finance;
pub mod health;
pub mod linear;
pub mod sir;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::measure::Measure;

pub use finance::{butterfly_payoff, finance_integrand, FinanceConfig};
pub use health::{evppi_from_values, gaussian_condition, HealthModel};
pub use linear::{LinearBayes, LinearIntegrand};
pub use sir::{peak_infected, sir_peak, sir_solve, SirConfig, SirState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemId {
    Linear,
    Sir,
    Finance,
    Health,
}

impl ProblemId {
    pub const ALL: [ProblemId; 4] = [ProblemId::Linear, ProblemId::Sir, ProblemId::Finance, ProblemId::Health];

    pub fn name(self) -> &'static str {
        match self {
            ProblemId::Linear => "linear",
            ProblemId::Sir => "sir",
            ProblemId::Finance => "finance",
            ProblemId::Health => "health",
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProblemId::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown problem '{s}' (expected linear, sir, finance or health)")))
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Linear(LinearBayes),
    Sir { config: SirConfig, rate: f64 },
    Finance(FinanceConfig),
    Health(HealthModel),
}

/// A benchmark problem: parameter law `Q`, conditional laws `P_theta`, and integrand(s).
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    kind: Kind,
    theta_prior: Measure,
}

/// How ground truth is available.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruthKind {
    /// Closed form at every `theta`.
    Exact,
    /// Sample-based and cached.
    Pseudo,
}

/// Posterior sensitivity of a Bayesian linear model; `theta ~ Unif(1, 3)^d`.
pub fn linear_bayes_problem(model: LinearBayes) -> Result<ProblemSpec> {
    let d = model.dim();
    let theta_prior = Measure::uniform(vec![1.0; d], vec![3.0; d])?;
    Ok(ProblemSpec { kind: Kind::Linear(model), theta_prior })
}

/// SIR peak infections under a `Gamma(theta, rate)` infection rate, `theta ~ Unif(2, 9)`.
pub fn sir_problem(config: SirConfig, rate: f64) -> Result<ProblemSpec> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::InvalidParameter(format!("gamma rate {rate}")));
    }
    peak_infected(0.0, &config)?;
    let theta_prior = Measure::uniform(vec![2.0], vec![9.0])?;
    Ok(ProblemSpec { kind: Kind::Sir { config, rate }, theta_prior })
}

/// Butterfly-option loss with a lognormal shock-time price.
pub fn finance_problem(config: FinanceConfig) -> Result<ProblemSpec> {
    config.validate()?;
    Ok(ProblemSpec { theta_prior: config.theta_prior()?, kind: Kind::Finance(config) })
}

/// Two-arm health-economics model; `theta` is Gaussian.
pub fn health_problem() -> Result<ProblemSpec> {
    let model = HealthModel::default();
    Ok(ProblemSpec { theta_prior: model.theta_prior()?, kind: Kind::Health(model) })
}

impl ProblemSpec {
    pub fn id(&self) -> ProblemId {
        match self.kind {
            Kind::Linear(_) => ProblemId::Linear,
            Kind::Sir { .. } => ProblemId::Sir,
            Kind::Finance(_) => ProblemId::Finance,
            Kind::Health(_) => ProblemId::Health,
        }
    }

    pub fn dim_x(&self) -> usize {
        match &self.kind {
            Kind::Linear(m) => m.dim(),
            Kind::Sir { .. } | Kind::Finance(_) => 1,
            Kind::Health(_) => health::DIM_X,
        }
    }

    pub fn dim_theta(&self) -> usize {
        self.theta_prior.dim()
    }

    /// Number of integrands (treatment arms); 1 except for the health problem.
    pub fn arms(&self) -> usize {
        match self.kind {
            Kind::Health(_) => 2,
            _ => 1,
        }
    }

    /// Whether `f` depends on `theta` (which rules out importance sampling).
    pub fn theta_dependent(&self) -> bool {
        matches!(self.kind, Kind::Health(_))
    }

    pub fn truth_kind(&self) -> TruthKind {
        match self.kind {
            Kind::Sir { .. } => TruthKind::Pseudo,
            _ => TruthKind::Exact,
        }
    }

    pub fn theta_prior(&self) -> &Measure {
        &self.theta_prior
    }

    pub fn sample_theta<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<Vec<f64>> {
        self.theta_prior.sample(rng, count)
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim_theta() {
            return Err(Error::DimensionMismatch { expected: self.dim_theta(), got: theta.len() });
        }
        Ok(())
    }

    pub fn conditional_measure(&self, theta: &[f64]) -> Result<Measure> {
        self.check_theta(theta)?;
        match &self.kind {
            Kind::Linear(m) => m.conditional_measure(theta),
            Kind::Sir { rate, .. } => Measure::gamma(theta[0], *rate),
            Kind::Finance(c) => c.conditional_measure(theta[0]),
            Kind::Health(h) => h.conditional_measure(theta),
        }
    }

    /// `f_arm(x, theta)`.
    pub fn integrand(&self, arm: usize, x: &[f64], theta: &[f64]) -> Result<f64> {
        if arm >= self.arms() {
            return Err(Error::InvalidParameter(format!("arm {arm} of {}", self.arms())));
        }
        if x.len() != self.dim_x() {
            return Err(Error::DimensionMismatch { expected: self.dim_x(), got: x.len() });
        }
        Ok(match &self.kind {
            Kind::Linear(m) => m.integrand(x),
            Kind::Sir { config, .. } => peak_infected(x[0], config)?,
            Kind::Finance(c) => finance_integrand(x[0], c),
            Kind::Health(h) => h.integrand(arm, x, theta),
        })
    }

    /// Closed-form `I_arm(theta)` where available.
    pub fn exact_truth(&self, arm: usize, theta: &[f64]) -> Option<Result<f64>> {
        if let Err(e) = self.check_theta(theta) {
            return Some(Err(e));
        }
        match &self.kind {
            Kind::Linear(m) => Some(m.exact(theta)),
            Kind::Sir { .. } => None,
            Kind::Finance(c) => Some(c.exact(theta[0])),
            Kind::Health(h) => Some(h.exact(arm, theta)),
        }
    }

    /// Plain Monte Carlo estimate of `I_arm(theta)` with its standard error.
    pub fn mc_truth<R: Rng + ?Sized>(&self, arm: usize, theta: &[f64], draws: usize, rng: &mut R) -> Result<(f64, f64)> {
        if draws < 2 {
            return Err(Error::InvalidParameter("need at least two draws".into()));
        }
        let p = self.conditional_measure(theta)?;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..draws {
            let v = self.integrand(arm, &p.sample_one(rng), theta)?;
            sum += v;
            sq += v * v;
        }
        let n = draws as f64;
        let mean = sum / n;
        let var = (sq / n - mean * mean).max(0.0) * n / (n - 1.0);
        Ok((mean, (var / n).sqrt()))
    }

    pub fn as_linear(&self) -> Option<&LinearBayes> {
        match &self.kind {
            Kind::Linear(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_sir(&self) -> Option<(&SirConfig, f64)> {
        match &self.kind {
            Kind::Sir { config, rate } => Some((config, *rate)),
            _ => None,
        }
    }

    pub fn as_finance(&self) -> Option<&FinanceConfig> {
        match &self.kind {
            Kind::Finance(c) => Some(c),
            _ => None,
        }
    }

    pub fn as_health(&self) -> Option<&HealthModel> {
        match &self.kind {
            Kind::Health(h) => Some(h),
            _ => None,
        }
    }
}

/// Parameters, conditional laws, samples and integrand values of one experiment draw.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub thetas: Vec<Vec<f64>>,
    pub measures: Vec<Measure>,
    /// `samples[t][i]` is `x_i^t ~ P_{theta_t}`.
    pub samples: Vec<Vec<Vec<f64>>>,
    /// `values[arm][t][i] = f_arm(x_i^t, theta_t)`.
    pub values: Vec<Vec<Vec<f64>>>,
}

impl Dataset {
    pub fn t(&self) -> usize {
        self.thetas.len()
    }

    pub fn n(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn arms(&self) -> usize {
        self.values.len()
    }

    /// Per-parameter sample means of `f_arm`.
    pub fn mc_means(&self, arm: usize) -> Vec<f64> {
        self.values[arm].iter().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect()
    }

    /// The first `t` parameters and their samples.
    pub fn truncate(&self, t: usize) -> Dataset {
        Dataset {
            thetas: self.thetas[..t].to_vec(),
            measures: self.measures[..t].to_vec(),
            samples: self.samples[..t].to_vec(),
            values: self.values.iter().map(|v| v[..t].to_vec()).collect(),
        }
    }
}

impl ProblemSpec {
    /// Draw `theta_{1:T} ~ Q`, then `x_{1:N}^t ~ P_{theta_t}` for each `t` in order.
    pub fn draw_dataset<R: Rng + ?Sized>(&self, rng: &mut R, n: usize, t: usize) -> Result<Dataset> {
        if n == 0 || t == 0 {
            return Err(Error::EmptyInput);
        }
        let thetas = self.sample_theta(rng, t);
        let measures = thetas.iter().map(|th| self.conditional_measure(th)).collect::<Result<Vec<_>>>()?;
        let samples: Vec<Vec<Vec<f64>>> = measures.iter().map(|m| m.sample(rng, n)).collect();
        let values = (0..self.arms())
            .map(|arm| {
                thetas
                    .iter()
                    .zip(&samples)
                    .map(|(th, xs)| xs.iter().map(|x| self.integrand(arm, x, th)).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset { thetas, measures, samples, values })
    }
}
