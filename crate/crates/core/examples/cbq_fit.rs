//! Fit conditional BQ on the Bayesian linear-regression problem and compare with
//! the closed form at a few new parameters.

use cbq::pipeline::{fit_cbq, CbqOptions, ThetaKernel, XKernel};
use cbq::problems::{linear_bayes_problem, LinearBayes, LinearIntegrand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> cbq::Result<()> {
    let problem = linear_bayes_problem(LinearBayes::generate(2, 0, LinearIntegrand::SecondMoment)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let data = problem.draw_dataset(&mut rng, 20, 20)?;

    let fit = fit_cbq(&data, 0, &CbqOptions::new(XKernel::Rbf, ThetaKernel::Matern32))?;
    println!("hyperparameters: {}", fit.describe());
    println!("jitter events: {}", fit.jitter_events);

    for theta in problem.sample_theta(&mut rng, 5) {
        let (mean, var) = fit.predict(&theta)?;
        let exact = problem.exact_truth(0, &theta).expect("closed form")?;
        println!("theta = [{:+.2}, {:+.2}]  cbq {mean:.4} +- {:.4}  exact {exact:.4}", theta[0], theta[1], var.sqrt());
    }
    Ok(())
}
