//! Build a Monte Carlo ground truth once, then reuse it from the cache.

use cbq::cache::{config_hash, load_or_build, mc_truth_rows};
use cbq::problems::{sir_problem, SirConfig};

fn main() -> cbq::Result<()> {
    let dir = std::env::temp_dir().join("cbq-example-cache");
    let problem = sir_problem(SirConfig::default(), 10.0)?;
    let description = "sir rate=10 count=5 draws=200 seed=7";
    println!("key {}", config_hash(description));

    for _ in 0..2 {
        let (table, hit) = load_or_build(&dir, "sir", description, || mc_truth_rows(&problem, 0, 5, 200, 7))?;
        println!("{} {} rows, first value {:.2}", if hit { "hit" } else { "built" }, table.rows.len(), table.rows[0].1);
    }
    Ok(())
}
