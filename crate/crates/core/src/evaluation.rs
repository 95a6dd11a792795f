//! Experiment harness: RMSE sweeps, calibration coverage and log-log convergence slopes.
//!
//! Every `(N, T, seed)` data cell gets its own random stream: a ChaCha8 generator keyed by
//! the master seed with the stream id set to the data-cell index. The method is not part of
//! the index, so all methods in a cell see the same parameters, samples and test points.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::baselines::{is_estimate, klsmc_select, lsmc_select, mc_estimate, mobq_fit, mobq_select, IsNormalization, MobqForm, MOBQ_CAP};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::pipeline::{fit_cbq, CbqOptions, XKernel};
use crate::problems::health::evppi_from_values;
use crate::problems::{Dataset, ProblemSpec};

/// Estimators compared by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Cbq,
    Mc,
    Is,
    Lsmc,
    Klsmc,
    Mobq,
}

impl Method {
    pub const ALL: [Method; 6] = [Method::Cbq, Method::Mc, Method::Is, Method::Lsmc, Method::Klsmc, Method::Mobq];

    pub fn name(self) -> &'static str {
        match self {
            Method::Cbq => "cbq",
            Method::Mc => "mc",
            Method::Is => "is",
            Method::Lsmc => "lsmc",
            Method::Klsmc => "klsmc",
            Method::Mobq => "mobq",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

/// Which MOBQ form to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MobqChoice {
    /// x-only when the integrand ignores theta, product form otherwise.
    Auto,
    XOnly,
    Product,
}

impl FromStr for MobqChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(MobqChoice::Auto),
            "x" => Ok(MobqChoice::XOnly),
            "product" => Ok(MobqChoice::Product),
            _ => Err(Error::Config(format!("unknown mobq form '{s}'"))),
        }
    }
}

impl fmt::Display for MobqChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MobqChoice::Auto => "auto",
            MobqChoice::XOnly => "x",
            MobqChoice::Product => "product",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodOptions {
    pub cbq: CbqOptions,
    pub is_normalization: IsNormalization,
    pub mobq_form: MobqChoice,
    pub mobq_cap: usize,
}

impl Default for MethodOptions {
    fn default() -> Self {
        Self {
            cbq: CbqOptions::default(),
            is_normalization: IsNormalization::Normalized,
            mobq_form: MobqChoice::Auto,
            mobq_cap: MOBQ_CAP,
        }
    }
}

/// Reference values a cell is scored against.
#[derive(Debug, Clone, PartialEq)]
pub enum TruthSource {
    /// Fresh `theta* ~ Q` per cell, scored with the closed form.
    Exact,
    /// A fixed test set with precomputed values (pseudo ground truth).
    Fixed { thetas: Vec<Vec<f64>>, values: Vec<f64> },
    /// EVPPI: `outer` fresh `theta*` draws per cell, error `|EVPPI_est - value|`.
    Evppi { value: f64, outer: usize },
}

/// One output line of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub problem: String,
    pub method: Method,
    pub d: usize,
    pub n: usize,
    pub t: usize,
    pub seed: usize,
    /// `NaN` when the cell failed.
    pub rmse: f64,
    pub time_ms: f64,
    pub hypers: String,
    pub jitter_events: usize,
    pub error: Option<String>,
}

pub const CSV_HEADER: &str = "problem,method,d,N,T,seed,rmse,time_ms,hypers,jitter_events,error";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl ResultRow {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.problem,
            self.method,
            self.d,
            self.n,
            self.t,
            self.seed,
            self.rmse,
            self.time_ms,
            csv_field(&self.hypers),
            self.jitter_events,
            csv_field(self.error.as_deref().unwrap_or(""))
        )
    }
}

/// Header plus one line per row.
pub fn write_csv(rows: &[ResultRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.to_csv());
    }
    out
}

pub fn rmse(estimates: &[f64], truths: &[f64]) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::EmptyInput);
    }
    if estimates.len() != truths.len() {
        return Err(Error::DimensionMismatch { expected: truths.len(), got: estimates.len() });
    }
    let s: f64 = estimates.iter().zip(truths).map(|(e, t)| (e - t).powi(2)).sum();
    Ok((s / estimates.len() as f64).sqrt())
}

/// Fraction of central Gaussian credible intervals `mean +- z std` containing the truth, per level.
pub fn calibration_coverage(means: &[f64], stds: &[f64], truths: &[f64], levels: &[f64]) -> Result<Vec<f64>> {
    if means.is_empty() {
        return Err(Error::EmptyInput);
    }
    if stds.len() != means.len() || truths.len() != means.len() {
        return Err(Error::DimensionMismatch { expected: means.len(), got: stds.len().min(truths.len()) });
    }
    if let Some(s) = stds.iter().find(|s| !(**s >= 0.0)) {
        return Err(Error::InvalidParameter(format!("posterior std {s}")));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    levels
        .iter()
        .map(|&level| {
            if !(level > 0.0 && level < 1.0) {
                return Err(Error::InvalidParameter(format!("level {level} not in (0, 1)")));
            }
            let z = normal.inverse_cdf(0.5 * (1.0 + level));
            let hits = means
                .iter()
                .zip(stds)
                .zip(truths)
                .filter(|((m, s), t)| (*t - *m).abs() <= z * *s)
                .count();
            Ok(hits as f64 / means.len() as f64)
        })
        .collect()
}

/// Least-squares slope of `log rmse` against `log budget`.
pub fn convergence_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::InvalidParameter("need at least three points".into()));
    }
    if points.iter().any(|(b, r)| !(*b > 0.0) || !(*r > 0.0)) {
        return Err(Error::InvalidParameter("budgets and rmse values must be positive".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("budgets must not all be equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Median of the finite entries and the number of skipped (non-finite) ones.
pub fn median_finite(values: &[f64]) -> (Option<f64>, usize) {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    let skipped = values.len() - v.len();
    if v.is_empty() {
        return (None, skipped);
    }
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let m = v.len();
    let med = if m % 2 == 1 { v[m / 2] } else { 0.5 * (v[m / 2 - 1] + v[m / 2]) };
    (Some(med), skipped)
}

/// Median RMSE of the rows matching `(method, n, t)`, skipping failed cells.
pub fn median_rmse(rows: &[ResultRow], method: Method, n: usize, t: usize) -> (Option<f64>, usize) {
    let v: Vec<f64> = rows.iter().filter(|r| r.method == method && r.n == n && r.t == t).map(|r| r.rmse).collect();
    median_finite(&v)
}

/// The random stream of a data cell.
pub fn cell_rng(master_seed: u64, cell_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(cell_index);
    rng
}

/// A full sweep over `(N, T, seed, method)`.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub problem: ProblemSpec,
    /// Dimension reported in the `d` column.
    pub d: usize,
    pub truth: TruthSource,
    pub methods: Vec<Method>,
    pub ns: Vec<usize>,
    pub ts: Vec<usize>,
    pub seeds: usize,
    pub master_seed: u64,
    pub t_test: usize,
    /// Worker threads; 0 uses the rayon default.
    pub threads: usize,
    /// When false, `time_ms` is written as 0 so output is byte-reproducible.
    pub timing: bool,
    pub options: MethodOptions,
}

impl Experiment {
    pub fn new(problem: ProblemSpec, truth: TruthSource) -> Self {
        let d = problem.dim_x();
        Self {
            problem,
            d,
            truth,
            methods: vec![Method::Cbq],
            ns: vec![10],
            ts: vec![10],
            seeds: 1,
            master_seed: 0,
            t_test: 100,
            threads: 0,
            timing: true,
            options: MethodOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.ns.is_empty() || self.ts.is_empty() || self.seeds == 0 {
            return Err(Error::Config("methods, N, T and seeds must be nonempty".into()));
        }
        if self.ns.contains(&0) || self.ts.contains(&0) || self.t_test == 0 {
            return Err(Error::Config("budgets must be positive".into()));
        }
        if let TruthSource::Fixed { thetas, values } = &self.truth {
            if thetas.is_empty() || thetas.len() != values.len() {
                return Err(Error::Config("fixed truth set is empty or ragged".into()));
            }
        }
        if matches!(self.truth, TruthSource::Evppi { .. }) && self.problem.arms() < 2 {
            return Err(Error::Config("EVPPI needs a problem with two arms".into()));
        }
        check_methods(&self.problem, &self.methods)
    }
}

/// Reject method/problem pairs that cannot work in any cell.
pub fn check_methods(problem: &ProblemSpec, methods: &[Method]) -> Result<()> {
    if methods.contains(&Method::Is) && problem.theta_dependent() {
        return Err(Error::Config(format!(
            "importance sampling reweights samples across parameters and needs an integrand that does not depend on theta; {} does",
            problem.id()
        )));
    }
    Ok(())
}

/// Everything a method sees in one cell.
struct CellInput<'a> {
    problem: &'a ProblemSpec,
    data: &'a Dataset,
    test: &'a [Vec<f64>],
    options: &'a MethodOptions,
}

/// Estimates `est[arm][j]` at the test points, hyperparameter description, jitter count.
type Estimates = (Vec<Vec<f64>>, String, usize);

fn run_cbq(input: &CellInput) -> Result<Estimates> {
    let mut est = Vec::new();
    let mut hypers = Vec::new();
    let mut jitter = 0;
    for arm in 0..input.problem.arms() {
        let fit = fit_cbq(input.data, arm, &input.options.cbq)?;
        est.push(input.test.iter().map(|th| fit.model.predict_mean(th)).collect::<Result<Vec<_>>>()?);
        hypers.push(fit.describe());
        jitter += fit.jitter_events;
    }
    Ok((est, hypers.join("|"), jitter))
}

fn run_mc<R: Rng + ?Sized>(input: &CellInput, rng: &mut R) -> Result<Estimates> {
    let n = input.data.n();
    let arms = input.problem.arms();
    let mut est = vec![Vec::with_capacity(input.test.len()); arms];
    for th in input.test {
        let p = input.problem.conditional_measure(th)?;
        let xs = p.sample(rng, n);
        for (arm, e) in est.iter_mut().enumerate() {
            let f = xs.iter().map(|x| input.problem.integrand(arm, x, th)).collect::<Result<Vec<_>>>()?;
            e.push(mc_estimate(&f)?);
        }
    }
    Ok((est, String::new(), 0))
}

fn run_is(input: &CellInput) -> Result<Estimates> {
    let norm = input.options.is_normalization;
    let mut est = Vec::new();
    for arm in 0..input.problem.arms() {
        est.push(
            input
                .test
                .iter()
                .map(|th| is_estimate(input.problem, input.data, arm, th, norm))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let tag = match norm {
        IsNormalization::Verbatim => "norm=T",
        IsNormalization::Normalized => "norm=NT",
    };
    Ok((est, tag.into(), 0))
}

fn run_regression(input: &CellInput, kernel: bool) -> Result<Estimates> {
    let mut est = Vec::new();
    let mut hypers = Vec::new();
    let mut jitter = 0;
    for arm in 0..input.problem.arms() {
        let means = input.data.mc_means(arm);
        let model = if kernel {
            klsmc_select(&input.data.thetas, &means, &input.options.cbq.theta_kernel.template(), &input.options.cbq.grid)?
        } else {
            lsmc_select(&input.data.thetas, &means)?
        };
        if let crate::baselines::RegressionModel::KernelRidge(m) = &model {
            jitter += usize::from(m.jitter() > 0.0);
        }
        est.push(input.test.iter().map(|th| model.predict(th)).collect::<Result<Vec<_>>>()?);
        hypers.push(model.describe());
    }
    Ok((est, hypers.join("|"), jitter))
}

fn run_mobq(input: &CellInput) -> Result<Estimates> {
    let opts = &input.options.cbq;
    let x_kernel = match opts.x_kernel {
        XKernel::Rbf | XKernel::LogGaussian => opts.x_kernel,
        other => {
            return Err(Error::UnsupportedPair(format!(
                "multi-output BQ needs a theta-independent embedding route, not {other}"
            )))
        }
    };
    let product = match input.options.mobq_form {
        MobqChoice::Auto => input.problem.theta_dependent(),
        MobqChoice::XOnly => false,
        MobqChoice::Product => true,
    };
    let mut est = Vec::new();
    let mut hypers = Vec::new();
    let mut jitter = 0;
    let x_template = match x_kernel {
        XKernel::Rbf => KernelSpec::rbf(1.0, 1.0)?,
        _ => KernelSpec::log_gaussian(1.0, 1.0)?,
    };
    let theta_template = opts.theta_kernel.template();
    for arm in 0..input.problem.arms() {
        let (kx, form) = mobq_select(
            input.data,
            arm,
            &x_template,
            product.then_some(&theta_template),
            &opts.grid,
            input.options.mobq_cap,
        )?;
        hypers.push(match &form {
            MobqForm::XOnly => format!("lx={};ax={};form=x", kx.lengthscale(), kx.amplitude()),
            MobqForm::Product(k) => {
                format!("lx={};ax={};lt={};form=product", kx.lengthscale(), kx.amplitude(), k.lengthscale())
            }
        });
        let model = mobq_fit(input.data, arm, &kx, form, 0.0, input.options.mobq_cap)?;
        jitter += usize::from(model.jitter() > 0.0);
        let e = input
            .test
            .iter()
            .map(|th| model.predict(th, &input.problem.conditional_measure(th)?))
            .collect::<Result<Vec<_>>>()?;
        est.push(e);
    }
    Ok((est, hypers.join("|"), jitter))
}

fn score(problem: &ProblemSpec, truth: &TruthSource, test: &[Vec<f64>], est: &[Vec<f64>]) -> Result<f64> {
    match truth {
        TruthSource::Exact => {
            let t = test
                .iter()
                .map(|th| problem.exact_truth(0, th).unwrap_or_else(|| Err(Error::NotApplicable("no closed-form truth".into()))))
                .collect::<Result<Vec<_>>>()?;
            rmse(&est[0], &t)
        }
        TruthSource::Fixed { values, .. } => rmse(&est[0], values),
        TruthSource::Evppi { value, .. } => Ok((evppi_from_values(est)? - value).abs()),
    }
}

struct DataCell {
    n: usize,
    t: usize,
    seed: usize,
    index: u64,
}

fn data_cells(exp: &Experiment) -> Vec<DataCell> {
    let mut out = Vec::new();
    for &n in &exp.ns {
        for &t in &exp.ts {
            for seed in 0..exp.seeds {
                out.push(DataCell { n, t, seed, index: out.len() as u64 });
            }
        }
    }
    out
}

fn run_cell(exp: &Experiment, cell: &DataCell) -> Vec<ResultRow> {
    let row = |method: Method| ResultRow {
        problem: exp.problem.id().to_string(),
        method,
        d: exp.d,
        n: cell.n,
        t: cell.t,
        seed: cell.seed,
        rmse: f64::NAN,
        time_ms: 0.0,
        hypers: String::new(),
        jitter_events: 0,
        error: None,
    };
    let mut rng = cell_rng(exp.master_seed, cell.index);
    let prepared = exp.problem.draw_dataset(&mut rng, cell.n, cell.t).and_then(|data| {
        let test = match &exp.truth {
            TruthSource::Exact => exp.problem.sample_theta(&mut rng, exp.t_test),
            TruthSource::Fixed { thetas, .. } => thetas.clone(),
            TruthSource::Evppi { outer, .. } => exp.problem.sample_theta(&mut rng, *outer),
        };
        Ok((data, test))
    });
    let (data, test) = match prepared {
        Ok(v) => v,
        Err(e) => {
            return exp
                .methods
                .iter()
                .map(|&m| ResultRow { error: Some(e.to_string()), ..row(m) })
                .collect()
        }
    };
    let input = CellInput { problem: &exp.problem, data: &data, test: &test, options: &exp.options };
    exp.methods
        .iter()
        .map(|&method| {
            // The MC baseline draws fresh samples; give it its own copy of the stream state.
            let mut mc_rng = rng.clone();
            let start = Instant::now();
            let out = match method {
                Method::Cbq => run_cbq(&input),
                Method::Mc => run_mc(&input, &mut mc_rng),
                Method::Is => run_is(&input),
                Method::Lsmc => run_regression(&input, false),
                Method::Klsmc => run_regression(&input, true),
                Method::Mobq => run_mobq(&input),
            };
            let elapsed = start.elapsed().as_secs_f64() * 1e3;
            let time_ms = if exp.timing { elapsed.max(1e-6) } else { 0.0 };
            match out.and_then(|(est, hypers, jitter)| Ok((score(&exp.problem, &exp.truth, &test, &est)?, hypers, jitter))) {
                Ok((rmse, hypers, jitter_events)) => ResultRow { rmse, time_ms, hypers, jitter_events, ..row(method) },
                Err(e) => ResultRow { time_ms, error: Some(e.to_string()), ..row(method) },
            }
        })
        .collect()
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if threads > 0 {
        b = b.num_threads(threads);
    }
    let pool = b.build().map_err(|e| Error::Config(e.to_string()))?;
    Ok(pool.install(f))
}

/// Run every cell; rows come back in `(N, T, seed, method)` order whatever the thread count.
pub fn run_experiment(exp: &Experiment) -> Result<Vec<ResultRow>> {
    exp.validate()?;
    let cells = data_cells(exp);
    let rows: Vec<Vec<ResultRow>> = with_pool(exp.threads, || cells.par_iter().map(|c| run_cell(exp, c)).collect())?;
    Ok(rows.into_iter().flatten().collect())
}

/// Per-budget median RMSE of one method and the log-log slope through them.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub budgets: Vec<usize>,
    pub medians: Vec<f64>,
    pub slope: f64,
}

/// Which budget varies in a convergence table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    N,
    T,
}

pub fn convergence_table(rows: &[ResultRow], method: Method, axis: Axis) -> Result<ConvergenceTable> {
    let mut budgets: Vec<usize> = rows
        .iter()
        .filter(|r| r.method == method)
        .map(|r| if axis == Axis::N { r.n } else { r.t })
        .collect();
    budgets.sort_unstable();
    budgets.dedup();
    let mut medians = Vec::new();
    for &b in &budgets {
        let v: Vec<f64> = rows
            .iter()
            .filter(|r| r.method == method && (if axis == Axis::N { r.n } else { r.t }) == b)
            .map(|r| r.rmse)
            .collect();
        medians.push(median_finite(&v).0.ok_or(Error::NonFinite(format!("every cell failed at budget {b}")))?);
    }
    let pts: Vec<(f64, f64)> = budgets.iter().zip(&medians).map(|(&b, &m)| (b as f64, m)).collect();
    let slope = convergence_slope(&pts)?;
    Ok(ConvergenceTable { budgets, medians, slope })
}

pub fn convergence_csv(table: &ConvergenceTable) -> String {
    let mut out = String::from("budget,median_rmse,slope\n");
    for (b, m) in table.budgets.iter().zip(&table.medians) {
        let _ = writeln!(out, "{b},{m},{}", table.slope);
    }
    out
}

/// Default credible levels for calibration curves.
pub fn default_levels() -> Vec<f64> {
    (1..20).map(|i| i as f64 * 0.05).collect()
}

/// CBQ coverage per level, pooled over `reps` repetitions and `t_test` test points each.
#[allow(clippy::too_many_arguments)]
pub fn run_calibration(
    problem: &ProblemSpec,
    truth: &TruthSource,
    n: usize,
    t: usize,
    reps: usize,
    master_seed: u64,
    t_test: usize,
    levels: &[f64],
    options: &CbqOptions,
    threads: usize,
) -> Result<Vec<f64>> {
    if reps == 0 || n == 0 || t == 0 || t_test == 0 {
        return Err(Error::Config("calibration budgets must be positive".into()));
    }
    let per_rep: Vec<Result<Vec<(f64, f64, f64)>>> = with_pool(threads, || {
        (0..reps as u64)
            .into_par_iter()
            .map(|rep| {
                let mut rng = cell_rng(master_seed, rep);
                let data = problem.draw_dataset(&mut rng, n, t)?;
                let (test, truths) = match truth {
                    TruthSource::Exact => {
                        let th = problem.sample_theta(&mut rng, t_test);
                        let tr = th
                            .iter()
                            .map(|x| problem.exact_truth(0, x).unwrap_or_else(|| Err(Error::NotApplicable("no closed-form truth".into()))))
                            .collect::<Result<Vec<_>>>()?;
                        (th, tr)
                    }
                    TruthSource::Fixed { thetas, values } => (thetas.clone(), values.clone()),
                    TruthSource::Evppi { .. } => {
                        return Err(Error::NotApplicable("calibration of EVPPI is not supported".into()))
                    }
                };
                let fit = fit_cbq(&data, 0, options)?;
                test.iter()
                    .zip(&truths)
                    .map(|(th, tr)| fit.predict(th).map(|(m, v)| (m, v.sqrt(), *tr)))
                    .collect()
            })
            .collect()
    })?;
    let mut means = Vec::new();
    let mut stds = Vec::new();
    let mut truths = Vec::new();
    for r in per_rep {
        for (m, s, t) in r? {
            means.push(m);
            stds.push(s);
            truths.push(t);
        }
    }
    calibration_coverage(&means, &stds, &truths, levels)
}

pub fn calibration_csv(levels: &[f64], coverage: &[f64]) -> String {
    let mut out = String::from("level,coverage\n");
    for (l, c) in levels.iter().zip(coverage) {
        let _ = writeln!(out, "{l},{c}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{linear_bayes_problem, LinearBayes, LinearIntegrand};
    use rand_distr::StandardNormal;

    fn linear(d: usize) -> ProblemSpec {
        linear_bayes_problem(LinearBayes::generate(d, 11, LinearIntegrand::SecondMoment).unwrap()).unwrap()
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[3.0, 4.0], &[0.0, 0.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn coverage_edge_cases() {
        let c = calibration_coverage(&[0.0; 3], &[0.0; 3], &[1.0; 3], &[0.1, 0.5, 0.9]).unwrap();
        assert_eq!(c, vec![0.0; 3]);
        let c = calibration_coverage(&[0.0, 0.0], &[1.0, 1.0], &[0.5, 3.0], &[1e-9]).unwrap();
        assert_eq!(c, vec![0.0]);
        assert!(calibration_coverage(&[0.0], &[1.0], &[0.0], &[1.0]).is_err());
    }

    #[test]
    fn coverage_self_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 2000;
        let means: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let stds: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..3.0)).collect();
        let truths: Vec<f64> = means.iter().zip(&stds).map(|(m, s)| m + s * rng.sample::<f64, _>(StandardNormal)).collect();
        let levels = default_levels();
        let cov = calibration_coverage(&means, &stds, &truths, &levels).unwrap();
        for (l, c) in levels.iter().zip(&cov) {
            assert!((l - c).abs() <= 0.05, "{l}: {c}");
        }
        assert!(cov.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn slope_examples() {
        let pts: Vec<(f64, f64)> = [10.0, 20.0, 50.0, 100.0].iter().map(|&n| (n, 3.0 / n)).collect();
        assert!((convergence_slope(&pts).unwrap() + 1.0).abs() < 1e-10);
        let flat: Vec<(f64, f64)> = [1.0, 2.0, 3.0].iter().map(|&n| (n, 0.7)).collect();
        assert!(convergence_slope(&flat).unwrap().abs() < 1e-12);
        assert!(convergence_slope(&pts[..2]).is_err());
    }

    #[test]
    fn medians_skip_failures() {
        assert_eq!(median_finite(&[3.0, f64::NAN, 1.0, 2.0]), (Some(2.0), 1));
        assert_eq!(median_finite(&[1.0, 2.0]), (Some(1.5), 0));
        assert_eq!(median_finite(&[f64::NAN]), (None, 1));
    }

    #[test]
    fn csv_quoting() {
        let r = ResultRow {
            problem: "linear".into(),
            method: Method::Mc,
            d: 1,
            n: 2,
            t: 3,
            seed: 0,
            rmse: 0.5,
            time_ms: 0.0,
            hypers: String::new(),
            jitter_events: 0,
            error: Some("a, b".into()),
        };
        assert_eq!(r.to_csv(), "linear,mc,1,2,3,0,0.5,0,,0,\"a, b\"");
    }

    #[test]
    fn one_cell_one_row() {
        let mut exp = Experiment::new(linear(1), TruthSource::Exact);
        exp.methods = vec![Method::Mc];
        let rows = run_experiment(&exp).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].rmse >= 0.0 && rows[0].time_ms > 0.0);
    }

    #[test]
    fn all_methods_run_on_linear() {
        let mut exp = Experiment::new(linear(2), TruthSource::Exact);
        exp.methods = Method::ALL.to_vec();
        exp.ns = vec![8];
        exp.ts = vec![12];
        exp.t_test = 20;
        let rows = run_experiment(&exp).unwrap();
        assert_eq!(rows.len(), 6);
        for r in &rows {
            assert!(r.error.is_none(), "{r:?}");
            assert!(r.rmse.is_finite());
        }
    }

    #[test]
    fn exact_estimator_scores_zero() {
        let p = linear(1);
        let th = p.sample_theta(&mut ChaCha8Rng::seed_from_u64(1), 5);
        let est: Vec<f64> = th.iter().map(|t| p.exact_truth(0, t).unwrap().unwrap()).collect();
        assert_eq!(score(&p, &TruthSource::Exact, &th, &[est]).unwrap(), 0.0);
    }

    #[test]
    fn determinism_across_threads() {
        let mut exp = Experiment::new(linear(1), TruthSource::Exact);
        exp.methods = vec![Method::Cbq, Method::Mc, Method::Lsmc];
        exp.ns = vec![5, 10];
        exp.seeds = 2;
        exp.timing = false;
        exp.threads = 1;
        let a = write_csv(&run_experiment(&exp).unwrap());
        exp.threads = 3;
        let b = write_csv(&run_experiment(&exp).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn health_is_rejected_up_front() {
        let p = crate::problems::health_problem().unwrap();
        let mut exp = Experiment::new(p, TruthSource::Evppi { value: 0.0, outer: 50 });
        exp.methods = vec![Method::Is];
        exp.ns = vec![3];
        exp.ts = vec![4];
        let err = run_experiment(&exp).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn convergence_table_from_rows() {
        let mk = |n, rmse| ResultRow {
            problem: "linear".into(),
            method: Method::Cbq,
            d: 1,
            n,
            t: 5,
            seed: 0,
            rmse,
            time_ms: 0.0,
            hypers: String::new(),
            jitter_events: 0,
            error: None,
        };
        let rows = vec![mk(10, 0.1), mk(20, 0.05), mk(40, 0.025), mk(40, f64::NAN)];
        let t = convergence_table(&rows, Method::Cbq, Axis::N).unwrap();
        assert_eq!(t.budgets, vec![10, 20, 40]);
        assert!((t.slope + 1.0).abs() < 1e-12);
        assert!(convergence_csv(&t).starts_with("budget,median_rmse,slope\n10,0.1,"));
    }
}
