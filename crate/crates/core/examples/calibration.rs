//! Coverage of CBQ credible intervals against nominal level.

use cbq::evaluation::{default_levels, run_calibration, TruthSource};
use cbq::pipeline::CbqOptions;
use cbq::problems::{linear_bayes_problem, LinearBayes, LinearIntegrand};

fn main() -> cbq::Result<()> {
    let problem = linear_bayes_problem(LinearBayes::generate(2, 0, LinearIntegrand::SecondMoment)?)?;
    let levels = default_levels();
    for (n, t) in [(10, 10), (50, 50)] {
        let cov = run_calibration(&problem, &TruthSource::Exact, n, t, 10, 0, 100, &levels, &CbqOptions::default(), 0)?;
        println!("N = T = {n}");
        for (l, c) in levels.iter().zip(&cov) {
            println!("  {l:.2} -> {c:.3}");
        }
    }
    Ok(())
}
