//! One Bayesian quadrature integral: weights, posterior mean and variance.

use cbq::bq::{bq_fit, bq_rule};
use cbq::embeddings::EmbeddingPair;
use cbq::kernels::KernelSpec;
use cbq::measure::Measure;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> cbq::Result<()> {
    let p = Measure::gaussian(vec![0.0], nalgebra::DMatrix::from_element(1, 1, 1.0))?;
    let pair = EmbeddingPair::new(KernelSpec::matern32(1.0, 1.0)?, p.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);

    // E[x^2] = 1 under N(0, 1)
    for n in [5, 10, 20, 40] {
        let xs = p.sample(&mut rng, n);
        let f: Vec<f64> = xs.iter().map(|x| x[0] * x[0]).collect();
        let post = bq_fit(&pair, &xs, &f, 0.0)?;
        let mc = f.iter().sum::<f64>() / n as f64;
        let rule = bq_rule(&pair, &xs, 0.0)?;
        println!(
            "N={n:3}  bq {:.4} (sd {:.3})  mc {mc:.4}  sum w = {:.3}  cond {:.1e}",
            post.mean,
            post.variance.sqrt(),
            rule.weights.sum(),
            post.condition_estimate
        );
    }
    Ok(())
}
