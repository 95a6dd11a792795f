//! Run configuration: a flat `key = value` file, command-line overrides, and the
//! problem / ground-truth resolution that turns it into an [`Experiment`].
//!
//! ```text
//! # linear-Bayes sweep
//! problem = linear
//! d = 2
//! n = 10, 50, 100
//! t = 10, 50, 100
//! methods = cbq, klsmc, lsmc, is
//! ```
//!
//! Lists are comma separated. `#` starts a comment line. Unknown keys are rejected.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::baselines::IsNormalization;
use crate::cache::{evppi_truth, load_or_build, mc_truth_rows, resolve_cache_dir, TruthTable};
use crate::error::{Error, Result};
use crate::evaluation::{check_methods, Axis, Experiment, Method, MethodOptions, MobqChoice, TruthSource};
use crate::pipeline::{CbqOptions, ThetaKernel, XKernel};
use crate::problems::{
    finance_problem, health_problem, linear_bayes_problem, sir_problem, FinanceConfig, LinearBayes, LinearIntegrand,
    ProblemId, ProblemSpec, SirConfig,
};

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("problem", "linear, sir, finance or health"),
    ("methods", "comma list of cbq, mc, is, lsmc, klsmc, mobq"),
    ("n", "comma list of samples per parameter"),
    ("t", "comma list of parameter counts"),
    ("d", "dimension of the linear-Bayes problem"),
    ("seeds", "repetitions per budget"),
    ("master_seed", "64-bit seed all cell streams derive from"),
    ("lambda_theta", "stage-2 regularizer, or auto"),
    ("x_kernel", "rbf, matern32, loggaussian, stein-rbf, stein-matern32, or auto"),
    ("theta_kernel", "rbf or matern32"),
    ("dt", "SIR integrator step in days"),
    ("sir_rate", "rate of the SIR Gamma prior on the infection rate"),
    ("integrand", "linear-Bayes integrand: second-moment or predictive-mean"),
    ("design_seed", "seed of the linear-Bayes regression data"),
    ("k1", "finance lower strike"),
    ("k2", "finance upper strike"),
    ("shock", "finance shock size s"),
    ("output", "output CSV path, or - for stdout"),
    ("cache_dir", "pseudo ground-truth cache directory"),
    ("threads", "worker threads, 0 for all cores"),
    ("t_test", "test parameters per cell"),
    ("timing", "record wall time (true) or write 0 (false)"),
    ("is_norm", "importance-sampling scaling: normalized or verbatim"),
    ("mobq_form", "auto, x or product"),
    ("mobq_cap", "largest N*T multi-output BQ will factorize"),
    ("truth_count", "size of the fixed SIR test set"),
    ("truth_draws", "Monte Carlo draws per SIR test parameter"),
    ("evppi_draws", "parameter draws behind the EVPPI reference value"),
    ("evppi_outer", "outer draws per EVPPI estimate"),
    ("truth_seed", "seed of the pseudo ground truth"),
    ("vary", "converge: budget that varies, n or t"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemId,
    pub methods: Vec<Method>,
    pub n: Vec<usize>,
    pub t: Vec<usize>,
    pub d: usize,
    pub seeds: usize,
    pub master_seed: u64,
    pub lambda_theta: Option<f64>,
    /// `None` picks the problem's default route.
    pub x_kernel: Option<XKernel>,
    pub theta_kernel: ThetaKernel,
    pub dt: f64,
    pub sir_rate: f64,
    pub integrand: LinearIntegrand,
    pub design_seed: u64,
    pub k1: f64,
    pub k2: f64,
    pub shock: f64,
    pub output: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub threads: usize,
    pub t_test: usize,
    pub timing: bool,
    pub is_norm: IsNormalization,
    pub mobq_form: MobqChoice,
    pub mobq_cap: usize,
    pub truth_count: usize,
    pub truth_draws: usize,
    pub evppi_draws: usize,
    pub evppi_outer: usize,
    pub truth_seed: u64,
    pub vary: Axis,
}

impl Default for RunConfig {
    fn default() -> Self {
        let fin = FinanceConfig::default();
        Self {
            problem: ProblemId::Linear,
            methods: vec![Method::Cbq],
            n: vec![10],
            t: vec![10],
            d: 1,
            seeds: 20,
            master_seed: 0,
            lambda_theta: None,
            x_kernel: None,
            theta_kernel: ThetaKernel::Matern32,
            dt: SirConfig::default().dt,
            sir_rate: 10.0,
            integrand: LinearIntegrand::SecondMoment,
            design_seed: 0,
            k1: fin.k1,
            k2: fin.k2,
            shock: fin.shock,
            output: None,
            cache_dir: None,
            threads: 0,
            t_test: 100,
            timing: false,
            is_norm: IsNormalization::Normalized,
            mobq_form: MobqChoice::Auto,
            mobq_cap: crate::baselines::MOBQ_CAP,
            truth_count: 100,
            truth_draws: 5000,
            evppi_draws: 1_000_000,
            evppi_outer: 10_000,
            truth_seed: 0,
            vary: Axis::N,
        }
    }
}

fn bad(key: &str, value: &str) -> Error {
    Error::Config(format!("invalid value '{value}' for '{key}'"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| bad(key, value))
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let v: Vec<T> = value.split(',').map(|s| num(key, s)).collect::<Result<_>>()?;
    if v.is_empty() {
        return Err(bad(key, value));
    }
    Ok(v)
}

fn positive_list(key: &str, value: &str) -> Result<Vec<usize>> {
    let v: Vec<usize> = list(key, value)?;
    if v.contains(&0) {
        return Err(bad(key, value));
    }
    Ok(v)
}

fn positive(key: &str, value: &str) -> Result<usize> {
    match num(key, value)? {
        0 => Err(bad(key, value)),
        v => Ok(v),
    }
}

fn real(key: &str, value: &str) -> Result<f64> {
    let v: f64 = num(key, value)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad(key, value))
    }
}

fn integrand_name(i: LinearIntegrand) -> &'static str {
    match i {
        LinearIntegrand::SecondMoment => "second-moment",
        LinearIntegrand::PredictiveMean => "predictive-mean",
    }
}

fn path_or_none(v: &Option<PathBuf>) -> String {
    v.as_ref().map_or_else(|| "-".to_string(), |p| p.display().to_string())
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "problem" => self.problem = v.parse()?,
            "methods" => {
                self.methods = v.split(',').map(|s| s.trim().parse()).collect::<Result<_>>()?;
                if self.methods.is_empty() {
                    return Err(bad(key, v));
                }
            }
            "n" => self.n = positive_list(key, v)?,
            "t" => self.t = positive_list(key, v)?,
            "d" => self.d = positive(key, v)?,
            "seeds" => self.seeds = positive(key, v)?,
            "master_seed" => self.master_seed = num(key, v)?,
            "lambda_theta" => {
                self.lambda_theta = match v {
                    "auto" => None,
                    _ => match real(key, v)? {
                        l if l > 0.0 => Some(l),
                        _ => return Err(bad(key, v)),
                    },
                }
            }
            "x_kernel" => self.x_kernel = if v == "auto" { None } else { Some(v.parse()?) },
            "theta_kernel" => self.theta_kernel = v.parse()?,
            "dt" => match real(key, v)? {
                x if x > 0.0 => self.dt = x,
                _ => return Err(bad(key, v)),
            },
            "sir_rate" => match real(key, v)? {
                x if x > 0.0 => self.sir_rate = x,
                _ => return Err(bad(key, v)),
            },
            "integrand" => {
                self.integrand = match v {
                    "second-moment" => LinearIntegrand::SecondMoment,
                    "predictive-mean" => LinearIntegrand::PredictiveMean,
                    _ => return Err(bad(key, v)),
                }
            }
            "design_seed" => self.design_seed = num(key, v)?,
            "k1" => self.k1 = real(key, v)?,
            "k2" => self.k2 = real(key, v)?,
            "shock" => self.shock = real(key, v)?,
            "output" => self.output = (v != "-").then(|| PathBuf::from(v)),
            "cache_dir" => self.cache_dir = (v != "-").then(|| PathBuf::from(v)),
            "threads" => self.threads = num(key, v)?,
            "t_test" => self.t_test = positive(key, v)?,
            "timing" => self.timing = num(key, v)?,
            "is_norm" => {
                self.is_norm = match v {
                    "normalized" => IsNormalization::Normalized,
                    "verbatim" => IsNormalization::Verbatim,
                    _ => return Err(bad(key, v)),
                }
            }
            "mobq_form" => self.mobq_form = v.parse()?,
            "mobq_cap" => self.mobq_cap = positive(key, v)?,
            "truth_count" => self.truth_count = positive(key, v)?,
            "truth_draws" => self.truth_draws = positive(key, v)?,
            "evppi_draws" => self.evppi_draws = positive(key, v)?,
            "evppi_outer" => self.evppi_outer = positive(key, v)?,
            "truth_seed" => self.truth_seed = num(key, v)?,
            "vary" => {
                self.vary = match v {
                    "n" => Axis::N,
                    "t" => Axis::T,
                    _ => return Err(bad(key, v)),
                }
            }
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Effective configuration in the file format; `parse_config(&c.dump(), &[])` gives `c` back.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("problem", self.problem.to_string());
        put("methods", join(&self.methods));
        put("n", join(&self.n));
        put("t", join(&self.t));
        put("d", self.d.to_string());
        put("seeds", self.seeds.to_string());
        put("master_seed", self.master_seed.to_string());
        put("lambda_theta", self.lambda_theta.map_or_else(|| "auto".into(), |l| format!("{l:?}")));
        put("x_kernel", self.x_kernel.map_or_else(|| "auto".into(), |k| k.to_string()));
        put("theta_kernel", self.theta_kernel.to_string());
        put("dt", format!("{:?}", self.dt));
        put("sir_rate", format!("{:?}", self.sir_rate));
        put("integrand", integrand_name(self.integrand).into());
        put("design_seed", self.design_seed.to_string());
        put("k1", format!("{:?}", self.k1));
        put("k2", format!("{:?}", self.k2));
        put("shock", format!("{:?}", self.shock));
        put("output", path_or_none(&self.output));
        put("cache_dir", path_or_none(&self.cache_dir));
        put("threads", self.threads.to_string());
        put("t_test", self.t_test.to_string());
        put("timing", self.timing.to_string());
        put("is_norm", if self.is_norm == IsNormalization::Normalized { "normalized" } else { "verbatim" }.into());
        put("mobq_form", self.mobq_form.to_string());
        put("mobq_cap", self.mobq_cap.to_string());
        put("truth_count", self.truth_count.to_string());
        put("truth_draws", self.truth_draws.to_string());
        put("evppi_draws", self.evppi_draws.to_string());
        put("evppi_outer", self.evppi_outer.to_string());
        put("truth_seed", self.truth_seed.to_string());
        put("vary", if self.vary == Axis::N { "n" } else { "t" }.into());
        s
    }

    /// Stage-1 route: the configured one, else the problem's default.
    pub fn resolved_x_kernel(&self) -> XKernel {
        self.x_kernel.unwrap_or(match self.problem {
            ProblemId::Linear => XKernel::Rbf,
            ProblemId::Sir => XKernel::SteinMatern32,
            ProblemId::Finance => XKernel::LogGaussian,
            ProblemId::Health => XKernel::Matern32,
        })
    }

    pub fn cbq_options(&self) -> CbqOptions {
        let mut o = CbqOptions::new(self.resolved_x_kernel(), self.theta_kernel);
        o.lambda_theta = self.lambda_theta;
        o
    }

    pub fn method_options(&self) -> MethodOptions {
        MethodOptions {
            cbq: self.cbq_options(),
            is_normalization: self.is_norm,
            mobq_form: self.mobq_form,
            mobq_cap: self.mobq_cap,
        }
    }

    pub fn build_problem(&self) -> Result<ProblemSpec> {
        match self.problem {
            ProblemId::Linear => linear_bayes_problem(LinearBayes::generate(self.d, self.design_seed, self.integrand)?),
            ProblemId::Sir => sir_problem(SirConfig { dt: self.dt, ..SirConfig::default() }, self.sir_rate),
            ProblemId::Finance => {
                finance_problem(FinanceConfig { k1: self.k1, k2: self.k2, shock: self.shock, ..FinanceConfig::default() })
            }
            ProblemId::Health => health_problem(),
        }
    }

    /// Canonical description of everything a pseudo ground truth depends on.
    pub fn truth_description(&self) -> Option<String> {
        match self.problem {
            ProblemId::Sir => Some(format!(
                "sir;dt={:?};rate={:?};count={};draws={};seed={}",
                self.dt, self.sir_rate, self.truth_count, self.truth_draws, self.truth_seed
            )),
            ProblemId::Health => Some(format!("health;evppi;draws={};seed={}", self.evppi_draws, self.truth_seed)),
            _ => None,
        }
    }

    pub fn cache_dir(&self) -> PathBuf {
        resolve_cache_dir(self.cache_dir.as_deref())
    }

    /// Load or build the cached pseudo ground truth; `None` for closed-form problems.
    pub fn ground_truth(&self, problem: &ProblemSpec) -> Result<Option<(TruthTable, bool, PathBuf)>> {
        let Some(desc) = self.truth_description() else {
            return Ok(None);
        };
        let dir = self.cache_dir();
        let name = self.problem.name();
        let (table, hit) = load_or_build(&dir, name, &desc, || match self.problem {
            ProblemId::Sir => mc_truth_rows(problem, 0, self.truth_count, self.truth_draws, self.truth_seed),
            _ => Ok(vec![(Vec::new(), evppi_truth(problem, self.evppi_draws, self.truth_seed)?)]),
        })?;
        let path = crate::cache::cache_path(&dir, name, &table.config_hash);
        Ok(Some((table, hit, path)))
    }

    pub fn truth_source(&self, problem: &ProblemSpec) -> Result<TruthSource> {
        Ok(match self.ground_truth(problem)? {
            None => TruthSource::Exact,
            Some((table, ..)) if self.problem == ProblemId::Health => {
                let value = table.rows.first().ok_or_else(|| Error::Io("empty EVPPI cache".into()))?.1;
                TruthSource::Evppi { value, outer: self.evppi_outer }
            }
            Some((table, ..)) => TruthSource::Fixed { thetas: table.thetas(), values: table.values() },
        })
    }

    pub fn experiment(&self) -> Result<Experiment> {
        let problem = self.build_problem()?;
        check_methods(&problem, &self.methods)?;
        let truth = self.truth_source(&problem)?;
        let mut exp = Experiment::new(problem, truth);
        exp.methods = self.methods.clone();
        exp.ns = self.n.clone();
        exp.ts = self.t.clone();
        exp.seeds = self.seeds;
        exp.master_seed = self.master_seed;
        exp.t_test = self.t_test;
        exp.threads = self.threads;
        exp.timing = self.timing;
        exp.options = self.method_options();
        exp.validate()?;
        Ok(exp)
    }
}

/// Apply `file_text` (if any), then `overrides` in order, to the defaults.
pub fn parse_config(file_text: Option<&str>, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut c = RunConfig::default();
    if let Some(text) = file_text {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", i + 1)))?;
            c.set(k.trim(), v)?;
        }
    }
    for (k, v) in overrides {
        c.set(k, v)?;
    }
    Ok(c)
}

pub fn read_config(path: &Path, overrides: &[(String, String)]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(Some(&text), overrides)
}
