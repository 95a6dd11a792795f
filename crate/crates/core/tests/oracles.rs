//! Library routes checked against oracles written here.

use cbq::baselines::lsmc_fit;
use cbq::problems::{
    finance_problem, health_problem, linear_bayes_problem, peak_infected, sir_problem, FinanceConfig, LinearBayes,
    LinearIntegrand, ProblemSpec, SirConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn agrees_with_closed_form(p: &ProblemSpec, arm: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for theta in p.sample_theta(&mut rng, 4) {
        let exact = p.exact_truth(arm, &theta).expect("closed form").unwrap();
        let (m, se) = p.mc_truth(arm, &theta, 40_000, &mut rng).unwrap();
        assert!((m - exact).abs() < 4.5 * se, "{:?} arm {arm}: mc {m} +- {se}, exact {exact}", p.id());
    }
}

#[test]
fn monte_carlo_matches_closed_forms() {
    let lin = linear_bayes_problem(LinearBayes::generate(2, 3, LinearIntegrand::SecondMoment).unwrap()).unwrap();
    agrees_with_closed_form(&lin, 0, 1);
    agrees_with_closed_form(&finance_problem(FinanceConfig::default()).unwrap(), 0, 2);
    let health = health_problem().unwrap();
    agrees_with_closed_form(&health, 0, 3);
    agrees_with_closed_form(&health, 1, 4);
}

fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

// Simpson rule for E[peak(X)], X ~ Gamma(shape, rate)
fn sir_quadrature(shape: f64, rate: f64, config: &SirConfig) -> f64 {
    let dens = |x: f64| {
        if x <= 0.0 {
            return 0.0;
        }
        (shape * rate.ln() + (shape - 1.0) * x.ln() - rate * x - ln_gamma(shape)).exp()
    };
    let (a, b, n) = (0.0, 3.0, 600);
    let h = (b - a) / n as f64;
    let mut s = 0.0;
    for i in 0..=n {
        let x = a + i as f64 * h;
        let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        let d = dens(x);
        if d > 0.0 {
            s += w * d * peak_infected(x, config).unwrap();
        }
    }
    s * h / 3.0
}

#[test]
fn sir_monte_carlo_matches_quadrature() {
    let config = SirConfig::default();
    let p = sir_problem(config, 10.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for shape in [2.5, 6.0] {
        let q = sir_quadrature(shape, 10.0, &config);
        let (m, se) = p.mc_truth(0, &[shape], 3000, &mut rng).unwrap();
        assert!((m - q).abs() < 4.5 * se, "shape {shape}: mc {m} +- {se}, quadrature {q}");
    }
}

// Gaussian elimination with partial pivoting
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap()).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

#[test]
fn linear_lsmc_is_ordinary_least_squares() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let thetas: Vec<Vec<f64>> = (0..25).map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(0.0..5.0)]).collect();
    let y: Vec<f64> = thetas.iter().map(|t| 1.5 - t[0] + 0.3 * t[1] * t[1] + rng.gen_range(-0.2..0.2)).collect();

    // normal equations on [1, t0, t1]
    let rows: Vec<[f64; 3]> = thetas.iter().map(|t| [1.0, t[0], t[1]]).collect();
    let mut xtx = vec![vec![0.0; 3]; 3];
    let mut xty = vec![0.0; 3];
    for (r, yi) in rows.iter().zip(&y) {
        for i in 0..3 {
            xty[i] += r[i] * yi;
            for j in 0..3 {
                xtx[i][j] += r[i] * r[j];
            }
        }
    }
    let beta = solve(xtx, xty);

    let model = lsmc_fit(&thetas, &y, 1, 0.0).unwrap();
    for probe in [[0.0, 0.0], [1.0, 2.0], [-1.5, 4.5]] {
        let want = beta[0] + beta[1] * probe[0] + beta[2] * probe[1];
        let got = model.predict(&probe).unwrap();
        assert!((got - want).abs() < 1e-9 * (1.0 + want.abs()), "{got} vs {want}");
    }
}
