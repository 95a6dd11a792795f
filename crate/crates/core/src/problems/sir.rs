//! Deterministic SIR epidemic model and its peak-infection integrand.

use crate::error::{Error, Result};

/// Model constants; `infection_rate` is supplied per solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirConfig {
    pub recovery_rate: f64,
    pub population: f64,
    pub initial_infected: f64,
    pub horizon_days: f64,
    pub dt: f64,
}

impl Default for SirConfig {
    fn default() -> Self {
        Self { recovery_rate: 0.05, population: 1e6, initial_infected: 10.0, horizon_days: 150.0, dt: 0.1 }
    }
}

/// Compartment sizes at one grid time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirState {
    pub time: f64,
    pub susceptible: f64,
    pub infected: f64,
    pub recovered: f64,
}

impl SirState {
    pub fn total(&self) -> f64 {
        self.susceptible + self.infected + self.recovered
    }
}

fn validate(x: f64, c: &SirConfig) -> Result<()> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::InvalidParameter(format!("infection rate {x}")));
    }
    if !(c.recovery_rate >= 0.0) || !(c.dt > 0.0) || !(c.horizon_days > 0.0) {
        return Err(Error::InvalidParameter(format!("SIR config {c:?}")));
    }
    if !(c.initial_infected > 0.0 && c.initial_infected < c.population) {
        return Err(Error::InvalidParameter(format!(
            "initial infected {} outside (0, {})",
            c.initial_infected, c.population
        )));
    }
    Ok(())
}

/// Right-hand side with mass-action incidence `x S I / population`.
fn rhs(x: f64, gamma: f64, pop: f64, s: f64, i: f64) -> [f64; 3] {
    let incidence = x * s * i / pop;
    [-incidence, incidence - gamma * i, gamma * i]
}

fn steps(c: &SirConfig) -> usize {
    (c.horizon_days / c.dt).round() as usize
}

/// Advance one classical RK4 step of size `dt`.
fn rk4_step(x: f64, c: &SirConfig, y: [f64; 3]) -> [f64; 3] {
    let (g, p, h) = (c.recovery_rate, c.population, c.dt);
    let k1 = rhs(x, g, p, y[0], y[1]);
    let k2 = rhs(x, g, p, y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]);
    let k3 = rhs(x, g, p, y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]);
    let k4 = rhs(x, g, p, y[0] + h * k3[0], y[1] + h * k3[1]);
    let mut out = [0.0; 3];
    for j in 0..3 {
        out[j] = y[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
    out
}

/// Fixed-step RK4 trajectory from `(S, I, R) = (population - I0, I0, 0)`.
pub fn sir_solve(x: f64, config: &SirConfig) -> Result<Vec<SirState>> {
    validate(x, config)?;
    let n = steps(config);
    let mut y = [config.population - config.initial_infected, config.initial_infected, 0.0];
    let mut out = Vec::with_capacity(n + 1);
    out.push(SirState { time: 0.0, susceptible: y[0], infected: y[1], recovered: y[2] });
    for k in 1..=n {
        y = rk4_step(x, config, y);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("SIR state at step {k}")));
        }
        out.push(SirState { time: k as f64 * config.dt, susceptible: y[0], infected: y[1], recovered: y[2] });
    }
    Ok(out)
}

/// Largest infected count on the grid.
pub fn sir_peak(trajectory: &[SirState]) -> f64 {
    trajectory.iter().map(|s| s.infected).fold(f64::NEG_INFINITY, f64::max)
}

/// Peak infections for rate `x` without storing the trajectory.
pub fn peak_infected(x: f64, config: &SirConfig) -> Result<f64> {
    validate(x, config)?;
    let mut y = [config.population - config.initial_infected, config.initial_infected, 0.0];
    let mut peak = y[1];
    for _ in 0..steps(config) {
        y = rk4_step(x, config, y);
        peak = peak.max(y[1]);
    }
    if peak.is_finite() {
        Ok(peak)
    } else {
        Err(Error::NonFinite("SIR peak".into()))
    }
}
