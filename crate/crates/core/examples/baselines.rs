//! All estimators on one linear-Bayes sweep, printed as median RMSE per method.

use cbq::evaluation::{median_rmse, run_experiment, Experiment, Method, TruthSource};
use cbq::problems::{linear_bayes_problem, LinearBayes, LinearIntegrand};

fn main() -> cbq::Result<()> {
    let problem = linear_bayes_problem(LinearBayes::generate(2, 0, LinearIntegrand::SecondMoment)?)?;
    let mut exp = Experiment::new(problem, TruthSource::Exact);
    exp.methods = vec![Method::Cbq, Method::Mc, Method::Is, Method::Lsmc, Method::Klsmc, Method::Mobq];
    exp.ns = vec![10];
    exp.ts = vec![20];
    exp.seeds = 5;
    let rows = run_experiment(&exp)?;
    for m in &exp.methods {
        let (med, failed) = median_rmse(&rows, *m, 10, 20);
        match med {
            Some(v) => println!("{:6} {v:.3e}  ({failed} failed)", m.name()),
            None => println!("{:6} no finite cells", m.name()),
        }
    }
    Ok(())
}
