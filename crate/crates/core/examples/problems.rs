//! The benchmark problems: SIR peak, the shocked butterfly option and the
//! two-arm health-economics model.

use cbq::problems::{finance_problem, health_problem, peak_infected, sir_problem, FinanceConfig, SirConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> cbq::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);

    let sir = SirConfig::default();
    for beta in [0.1, 0.2, 0.4] {
        println!("SIR beta = {beta}: peak infected {:.1}", peak_infected(beta, &sir)?);
    }
    let p = sir_problem(sir, 10.0)?;
    let theta = p.sample_theta(&mut rng, 1).remove(0);
    let (m, se) = p.mc_truth(0, &theta, 2000, &mut rng)?;
    println!("SIR expected peak at theta = {:.3}: {m:.1} +- {se:.1}", theta[0]);

    let fin = finance_problem(FinanceConfig::default())?;
    for s in [60.0, 100.0, 140.0] {
        let exact = fin.exact_truth(0, &[s]).expect("closed form")?;
        let (mc, se) = fin.mc_truth(0, &[s], 100_000, &mut rng)?;
        println!("butterfly at S = {s}: {exact:.4}  (mc {mc:.4} +- {se:.4})");
    }

    let health = health_problem()?;
    let model = health.as_health().expect("health problem");
    let theta = health.sample_theta(&mut rng, 1).remove(0);
    println!(
        "health arms at a sampled theta: {:.0} and {:.0}",
        model.exact(0, &theta)?,
        model.exact(1, &theta)?
    );
    Ok(())
}
