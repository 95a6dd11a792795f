//! End-to-end CBQ fit on a [`Dataset`]: stage-1 hyperparameters, one BQ posterior per
//! parameter, stage-2 empirical Bayes, and the fitted [`CbqModel`].

use std::fmt;
use std::str::FromStr;

use crate::bq::{bq_fit, BqPosterior};
use crate::cbq::{CbqModel, Standardization};
use crate::embeddings::EmbeddingPair;
use crate::error::{Error, Result};
use crate::hyperopt::{grid_search_stage1, grid_search_stage2, is_degenerate, mean_std, stein_c_descent, DescentOptions, HyperGrid, Stage2Choice};
use crate::kernels::{KernelSpec, ScoreFn};
use crate::measure::Measure;
use crate::problems::Dataset;

/// Stage-1 kernel family together with the embedding route it implies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XKernel {
    /// Gaussian RBF against a Gaussian `P_theta`.
    Rbf,
    /// Tensor Matérn-3/2 on whitened samples `u = L^{-1}(x - m)` against `N(0, Id)`.
    Matern32,
    /// Log-Gaussian kernel against a lognormal `P_theta`.
    LogGaussian,
    /// Stein kernel built on an RBF base and the score of `P_theta`.
    SteinRbf,
    /// Stein kernel built on a Matérn-3/2 base and the score of `P_theta`.
    SteinMatern32,
}

impl XKernel {
    pub const ALL: [XKernel; 5] = [XKernel::Rbf, XKernel::Matern32, XKernel::LogGaussian, XKernel::SteinRbf, XKernel::SteinMatern32];

    pub fn name(self) -> &'static str {
        match self {
            XKernel::Rbf => "rbf",
            XKernel::Matern32 => "matern32",
            XKernel::LogGaussian => "loggaussian",
            XKernel::SteinRbf => "stein-rbf",
            XKernel::SteinMatern32 => "stein-matern32",
        }
    }

    pub fn is_stein(self) -> bool {
        matches!(self, XKernel::SteinRbf | XKernel::SteinMatern32)
    }

    /// Kernel with unit hyperparameters and, for Stein variants, `c = 0`.
    fn template(self, measure: &Measure) -> Result<KernelSpec> {
        match self {
            XKernel::Rbf => KernelSpec::rbf(1.0, 1.0),
            XKernel::Matern32 => KernelSpec::matern32_tensor(1.0, 1.0),
            XKernel::LogGaussian => KernelSpec::log_gaussian(1.0, 1.0),
            XKernel::SteinRbf => KernelSpec::stein(KernelSpec::rbf(1.0, 1.0)?, ScoreFn::of(measure.clone()), 0.0),
            XKernel::SteinMatern32 => {
                KernelSpec::stein(KernelSpec::matern32(1.0, 1.0)?, ScoreFn::of(measure.clone()), 0.0)
            }
        }
    }
}

impl fmt::Display for XKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for XKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        XKernel::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown x kernel '{s}'")))
    }
}

/// Stage-2 kernel family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThetaKernel {
    Rbf,
    Matern32,
}

impl ThetaKernel {
    pub fn name(self) -> &'static str {
        match self {
            ThetaKernel::Rbf => "rbf",
            ThetaKernel::Matern32 => "matern32",
        }
    }

    pub fn template(self) -> KernelSpec {
        match self {
            ThetaKernel::Rbf => KernelSpec::rbf(1.0, 1.0).expect("unit parameters"),
            ThetaKernel::Matern32 => KernelSpec::matern32(1.0, 1.0).expect("unit parameters"),
        }
    }
}

impl fmt::Display for ThetaKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ThetaKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rbf" => Ok(ThetaKernel::Rbf),
            "matern32" => Ok(ThetaKernel::Matern32),
            _ => Err(Error::Config(format!("unknown theta kernel '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CbqOptions {
    pub x_kernel: XKernel,
    pub theta_kernel: ThetaKernel,
    pub lambda_x: f64,
    /// Fixed stage-2 regularizer; `None` selects it by empirical Bayes.
    pub lambda_theta: Option<f64>,
    pub grid: HyperGrid,
    pub descent: DescentOptions,
}

impl Default for CbqOptions {
    fn default() -> Self {
        Self {
            x_kernel: XKernel::Rbf,
            theta_kernel: ThetaKernel::Matern32,
            lambda_x: 0.0,
            lambda_theta: None,
            grid: HyperGrid::default(),
            descent: DescentOptions::default(),
        }
    }
}

impl CbqOptions {
    pub fn new(x_kernel: XKernel, theta_kernel: ThetaKernel) -> Self {
        Self { x_kernel, theta_kernel, ..Self::default() }
    }
}

/// Stage-1 hyperparameters shared by all `T` integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XParams {
    pub lengthscale: f64,
    pub amplitude: f64,
    pub stein_constant: Option<f64>,
}

/// Output of [`fit_cbq`].
#[derive(Debug, Clone)]
pub struct CbqFit {
    pub model: CbqModel,
    pub x_params: XParams,
    pub stage2: Stage2Choice,
    pub posteriors: Vec<BqPosterior>,
    /// Number of factorizations (stage 1 and stage 2) that needed jitter.
    pub jitter_events: usize,
}

impl CbqFit {
    pub fn predict(&self, theta: &[f64]) -> Result<(f64, f64)> {
        self.model.predict(theta)
    }

    /// Hyperparameters as `key=value` pairs joined by `;`.
    pub fn describe(&self) -> String {
        let mut s = format!("lx={};ax={}", self.x_params.lengthscale, self.x_params.amplitude);
        if let Some(c) = self.x_params.stein_constant {
            s.push_str(&format!(";c={c:.4}"));
        }
        s.push_str(&format!(
            ";lt={};at={};lam={}",
            self.stage2.lengthscale, self.stage2.amplitude, self.stage2.lambda_theta
        ));
        s
    }
}

/// Embedding pair and transformed samples for one stage-1 integral.
fn stage1_inputs(family: XKernel, params: XParams, measure: &Measure, samples: &[Vec<f64>]) -> Result<(EmbeddingPair, Vec<Vec<f64>>)> {
    let mut kernel = family.template(measure)?.with_params(params.lengthscale, params.amplitude)?;
    if let Some(c) = params.stein_constant {
        kernel = kernel.with_stein_constant(c)?;
    }
    match family {
        XKernel::Matern32 => {
            let Measure::Gaussian(g) = measure else {
                return Err(Error::UnsupportedPair("Matérn stage 1 needs a Gaussian P_theta".into()));
            };
            let u = samples.iter().map(|x| g.whiten(x).as_slice().to_vec()).collect();
            Ok((EmbeddingPair::new(kernel, Measure::Gaussian(crate::measure::Gaussian::standard(g.dim())))?, u))
        }
        _ => Ok((EmbeddingPair::new(kernel, measure.clone())?, samples.to_vec())),
    }
}

fn standardize_or_unit(values: &[f64]) -> (Standardization, Vec<f64>) {
    let st = Standardization::from_values(values);
    (st, values.iter().map(|v| (v - st.shift) / st.scale).collect())
}

/// Select stage-1 hyperparameters on the first parameter whose values are not constant.
///
/// Falls back to `l = A = 1` (and `c = 0`) when every integrand sample set is constant.
pub fn select_x_params(data: &Dataset, arm: usize, options: &CbqOptions) -> Result<XParams> {
    let default = XParams {
        lengthscale: 1.0,
        amplitude: 1.0,
        stein_constant: options.x_kernel.is_stein().then_some(0.0),
    };
    let Some(t) = (0..data.t()).find(|&t| {
        let (m, s) = mean_std(&data.values[arm][t]);
        data.n() >= 2 && !is_degenerate(m, s)
    }) else {
        return Ok(default);
    };
    let (pair, xs) = stage1_inputs(options.x_kernel, default, &data.measures[t], &data.samples[t])?;
    let (_, f) = standardize_or_unit(&data.values[arm][t]);
    let grid = grid_search_stage1(pair.kernel(), &xs, &f, options.lambda_x, &options.grid)?;
    if !options.x_kernel.is_stein() {
        return Ok(XParams { lengthscale: grid.lengthscale, amplitude: grid.amplitude, stein_constant: None });
    }
    let start = pair.kernel().with_params(grid.lengthscale, grid.amplitude)?;
    let d = stein_c_descent(&start, &xs, &f, options.lambda_x, options.descent)?;
    Ok(XParams { lengthscale: d.lengthscale, amplitude: d.amplitude, stein_constant: Some(d.constant) })
}

/// Stage-1 posteriors in the original units of `f`, one per parameter.
pub fn stage1_posteriors(data: &Dataset, arm: usize, options: &CbqOptions, params: XParams) -> Result<Vec<BqPosterior>> {
    if arm >= data.arms() {
        return Err(Error::InvalidParameter(format!("arm {arm} of {}", data.arms())));
    }
    (0..data.t())
        .map(|t| {
            let (pair, xs) = stage1_inputs(options.x_kernel, params, &data.measures[t], &data.samples[t])?;
            let (st, f) = standardize_or_unit(&data.values[arm][t]);
            let mut post = bq_fit(&pair, &xs, &f, options.lambda_x)?;
            post.mean = st.shift + st.scale * post.mean;
            post.variance *= st.scale * st.scale;
            Ok(post)
        })
        .collect()
}

/// Stage 2 on given stage-1 posteriors.
pub fn fit_stage2(thetas: &[Vec<f64>], posteriors: &[BqPosterior], options: &CbqOptions) -> Result<(CbqModel, Stage2Choice)> {
    let means: Vec<f64> = posteriors.iter().map(|p| p.mean).collect();
    let vars: Vec<f64> = posteriors.iter().map(|p| p.variance).collect();
    let st = Standardization::from_values(&means);
    let y: Vec<f64> = means.iter().map(|m| (m - st.shift) / st.scale).collect();
    let v: Vec<f64> = vars.iter().map(|s| s / (st.scale * st.scale)).collect();
    let family = options.theta_kernel.template();
    let mut grid = options.grid.clone();
    if let Some(lam) = options.lambda_theta {
        grid.lambdas_theta = vec![lam];
    }
    let choice = match grid_search_stage2(&family, thetas, &y, &v, &grid) {
        Ok(c) => c,
        Err(Error::DegenerateTargets) => Stage2Choice {
            lengthscale: 1.0,
            amplitude: 1.0,
            lambda_theta: grid.lambdas_theta[0],
            log_marginal: f64::NAN,
        },
        Err(e) => return Err(e),
    };
    let kernel = family.with_params(choice.lengthscale, choice.amplitude)?;
    let model = CbqModel::fit(thetas, &means, &vars, &kernel, choice.lambda_theta, st)?;
    Ok((model, choice))
}

/// Run both CBQ stages on arm `arm` of `data`.
pub fn fit_cbq(data: &Dataset, arm: usize, options: &CbqOptions) -> Result<CbqFit> {
    let x_params = select_x_params(data, arm, options)?;
    let posteriors = stage1_posteriors(data, arm, options, x_params)?;
    let (model, stage2) = fit_stage2(&data.thetas, &posteriors, options)?;
    let jitter_events = posteriors.iter().filter(|p| p.jitter > 0.0).count() + usize::from(model.jitter() > 0.0);
    Ok(CbqFit { model, x_params, stage2, posteriors, jitter_events })
}
