//! Median RMSE as T grows at fixed N, with the fitted log-log slope.

use cbq::evaluation::{convergence_table, run_experiment, Axis, Experiment, Method, TruthSource};
use cbq::problems::{linear_bayes_problem, LinearBayes, LinearIntegrand};

fn main() -> cbq::Result<()> {
    let problem = linear_bayes_problem(LinearBayes::generate(1, 0, LinearIntegrand::SecondMoment)?)?;
    let mut exp = Experiment::new(problem, TruthSource::Exact);
    exp.methods = vec![Method::Cbq, Method::Mc];
    exp.ns = vec![20];
    exp.ts = vec![5, 10, 20, 40];
    exp.seeds = 8;
    let rows = run_experiment(&exp)?;
    for m in [Method::Cbq, Method::Mc] {
        let table = convergence_table(&rows, m, Axis::T)?;
        println!("{m}: slope {:.2}", table.slope);
        for (b, r) in table.budgets.iter().zip(&table.medians) {
            println!("  T={b:3}  {r:.3e}");
        }
    }
    Ok(())
}
