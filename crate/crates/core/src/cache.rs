//! Pseudo ground truths and their on-disk cache.
//!
//! A cache file is plain text:
//!
//! ```text
//! # problem=sir
//! # config_hash=<64 hex digits>
//! theta,truth
//! <theta_1;...;theta_p>,<value>
//! ```
//!
//! Values are written with `{:.17e}` so they read back bit-exactly. A scalar quantity such
//! as an EVPPI uses an empty `theta` field.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evaluation::cell_rng;
use crate::problems::{evppi_from_values, ProblemSpec};

/// Environment variable that overrides the cache directory.
pub const CACHE_ENV: &str = "CBQ_CACHE_DIR";

#[derive(Debug, Clone, PartialEq)]
pub struct TruthTable {
    pub problem: String,
    pub config_hash: String,
    pub rows: Vec<(Vec<f64>, f64)>,
}

impl TruthTable {
    pub fn thetas(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.0.clone()).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.1).collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("# problem={}\n# config_hash={}\ntheta,truth\n", self.problem, self.config_hash);
        for (th, v) in &self.rows {
            let th: Vec<String> = th.iter().map(|x| format!("{x:.17e}")).collect();
            s.push_str(&format!("{},{v:.17e}\n", th.join(";")));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Io(format!("malformed cache file: {m}"));
        let mut lines = text.lines();
        let problem = lines
            .next()
            .and_then(|l| l.strip_prefix("# problem="))
            .ok_or_else(|| bad("missing problem line"))?
            .to_string();
        let config_hash = lines
            .next()
            .and_then(|l| l.strip_prefix("# config_hash="))
            .ok_or_else(|| bad("missing config_hash line"))?
            .to_string();
        if lines.next() != Some("theta,truth") {
            return Err(bad("missing header"));
        }
        let mut rows = Vec::new();
        for line in lines.filter(|l| !l.is_empty()) {
            let (th, v) = line.split_once(',').ok_or_else(|| bad(line))?;
            let theta = if th.is_empty() {
                Vec::new()
            } else {
                th.split(';').map(|x| x.parse::<f64>().map_err(|_| bad(line))).collect::<Result<Vec<_>>>()?
            };
            rows.push((theta, v.parse::<f64>().map_err(|_| bad(line))?));
        }
        Ok(Self { problem, config_hash, rows })
    }
}

/// SHA-256 of a canonical configuration description, hex encoded.
pub fn config_hash(description: &str) -> String {
    hex::encode(Sha256::digest(description.as_bytes()))
}

/// `CBQ_CACHE_DIR` if set, else `configured`, else `.cbq-cache`.
pub fn resolve_cache_dir(configured: Option<&Path>) -> PathBuf {
    if let Some(dir) = std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(dir);
    }
    configured.map_or_else(|| PathBuf::from(".cbq-cache"), Path::to_path_buf)
}

pub fn cache_path(dir: &Path, problem: &str, hash: &str) -> PathBuf {
    dir.join(format!("{problem}-{}.csv", &hash[..16]))
}

/// Load the table for `description`, building and storing it on a miss.
///
/// Returns the table and whether it was a cache hit.
pub fn load_or_build<F>(dir: &Path, problem: &str, description: &str, build: F) -> Result<(TruthTable, bool)>
where
    F: FnOnce() -> Result<Vec<(Vec<f64>, f64)>>,
{
    let hash = config_hash(description);
    let path = cache_path(dir, problem, &hash);
    if let Ok(text) = fs::read_to_string(&path) {
        if let Ok(t) = TruthTable::parse(&text) {
            if t.config_hash == hash && t.problem == problem {
                return Ok((t, true));
            }
        }
    }
    let table = TruthTable { problem: problem.to_string(), config_hash: hash, rows: build()? };
    fs::create_dir_all(dir)?;
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, table.to_text())?;
    fs::rename(&tmp, &path)?;
    Ok((table, false))
}

/// `count` seed-pinned test parameters, each with a `draws`-sample Monte Carlo value.
pub fn mc_truth_rows(problem: &ProblemSpec, arm: usize, count: usize, draws: usize, seed: u64) -> Result<Vec<(Vec<f64>, f64)>> {
    let thetas = problem.sample_theta(&mut cell_rng(seed, 0), count);
    thetas
        .into_par_iter()
        .enumerate()
        .map(|(j, th)| {
            let mut rng = cell_rng(seed, 1 + j as u64);
            let (m, _) = problem.mc_truth(arm, &th, draws, &mut rng)?;
            Ok((th, m))
        })
        .collect()
}

/// EVPPI from `draws` parameter draws with the closed-form `I_c(theta)`.
pub fn evppi_truth(problem: &ProblemSpec, draws: usize, seed: u64) -> Result<f64> {
    let thetas = problem.sample_theta(&mut cell_rng(seed, 0), draws);
    let values = (0..problem.arms())
        .map(|arm| {
            thetas
                .iter()
                .map(|th| problem.exact_truth(arm, th).unwrap_or_else(|| Err(Error::NotApplicable("no closed form".into()))))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    evppi_from_values(&values)
}
