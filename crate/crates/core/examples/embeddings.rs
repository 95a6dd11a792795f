//! Closed-form kernel mean embeddings next to a Monte Carlo check.

use cbq::embeddings::{numeric_kme_oracle_mc, EmbeddingPair};
use cbq::kernels::KernelSpec;
use cbq::measure::Measure;
use nalgebra::DMatrix;

fn main() -> cbq::Result<()> {
    let measure = Measure::gaussian(vec![0.5, -1.0], DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]))?;
    let kernel = KernelSpec::rbf(0.8, 2.0)?;
    let pair = EmbeddingPair::new(kernel.clone(), measure.clone())?;

    for x in [[0.0, 0.0], [1.0, -1.0], [3.0, 2.0]] {
        let exact = pair.kme(&x)?;
        let mc = numeric_kme_oracle_mc(&kernel, &measure, &x, 200_000, 1)?;
        println!("mu({x:?}) = {exact:.6}   mc {:.6} +- {:.1e}", mc.value, mc.error);
    }
    println!("initial error E k(X, X') = {:.6}", pair.initial_error()?);

    let ln = Measure::lognormal(0.1, 0.09)?;
    let pair = EmbeddingPair::new(KernelSpec::log_gaussian(0.5, 1.0)?, ln)?;
    println!("log-Gaussian on lognormal: mu(1.2) = {:.6}", pair.kme(&[1.2])?);
    Ok(())
}
