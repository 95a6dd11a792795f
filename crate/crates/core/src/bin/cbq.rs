use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgMatches, Command};

use cbq::config::{read_config, parse_config, RunConfig, KEYS};
use cbq::evaluation::{
    calibration_csv, convergence_csv, convergence_table, default_levels, run_calibration, run_experiment, write_csv,
    Axis, TruthSource,
};
use cbq::Error;

const CONFIG_ERROR: u8 = 1;
const PARTIAL_FAILURE: u8 = 2;

fn with_keys(cmd: Command) -> Command {
    let cmd = cmd.arg(Arg::new("config").long("config").value_name("FILE").help("flat key = value config file"));
    KEYS.iter().fold(cmd, |c, (key, help)| {
        c.arg(Arg::new(*key).long(key.replace('_', "-")).value_name("VALUE").help(*help))
    })
}

fn cli() -> Command {
    Command::new("cbq")
        .about("Conditional Bayesian quadrature experiments")
        .subcommand_required(true)
        .subcommand(with_keys(Command::new("run").about("RMSE sweep over (N, T, seed, method); writes result rows")))
        .subcommand(with_keys(Command::new("calibrate").about("CBQ credible-interval coverage; writes level,coverage")))
        .subcommand(with_keys(Command::new("converge").about("median RMSE against one budget with its log-log slope")))
        .subcommand(with_keys(Command::new("ground-truth").about("build or reuse the cached pseudo ground truth")))
}

fn load(m: &ArgMatches) -> cbq::Result<RunConfig> {
    let overrides: Vec<(String, String)> = KEYS
        .iter()
        .filter_map(|(k, _)| m.get_one::<String>(k).map(|v| (k.to_string(), v.clone())))
        .collect();
    match m.get_one::<String>("config") {
        Some(path) => read_config(&PathBuf::from(path), &overrides),
        None => parse_config(None, &overrides),
    }
}

fn emit(cfg: &RunConfig, text: &str) -> cbq::Result<()> {
    match &cfg.output {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cfg: &RunConfig) -> cbq::Result<u8> {
    let rows = run_experiment(&cfg.experiment()?)?;
    emit(cfg, &write_csv(&rows))?;
    let failed = rows.iter().filter(|r| r.failed()).count();
    if failed > 0 {
        eprintln!("{failed} of {} cells failed", rows.len());
        return Ok(PARTIAL_FAILURE);
    }
    Ok(0)
}

fn single(name: &str, v: &[usize]) -> cbq::Result<usize> {
    match v {
        [x] => Ok(*x),
        _ => Err(Error::Config(format!("{name} takes a single value here"))),
    }
}

fn calibrate(cfg: &RunConfig) -> cbq::Result<u8> {
    let n = single("n", &cfg.n)?;
    let t = single("t", &cfg.t)?;
    let problem = cfg.build_problem()?;
    let truth = cfg.truth_source(&problem)?;
    if matches!(truth, TruthSource::Evppi { .. }) {
        return Err(Error::Config(format!("calibration needs per-parameter truths; {} only has an EVPPI", cfg.problem)));
    }
    let levels = default_levels();
    let cov = run_calibration(
        &problem,
        &truth,
        n,
        t,
        cfg.seeds,
        cfg.master_seed,
        cfg.t_test,
        &levels,
        &cfg.cbq_options(),
        cfg.threads,
    )?;
    emit(cfg, &calibration_csv(&levels, &cov))?;
    Ok(0)
}

fn converge(cfg: &RunConfig) -> cbq::Result<u8> {
    let [method] = cfg.methods[..] else {
        return Err(Error::Config("converge takes exactly one method".into()));
    };
    match cfg.vary {
        Axis::N => single("t", &cfg.t)?,
        Axis::T => single("n", &cfg.n)?,
    };
    let rows = run_experiment(&cfg.experiment()?)?;
    let table = convergence_table(&rows, method, cfg.vary)?;
    emit(cfg, &convergence_csv(&table))?;
    let failed = rows.iter().filter(|r| r.failed()).count();
    if failed > 0 {
        eprintln!("{failed} of {} cells failed and were skipped", rows.len());
        return Ok(PARTIAL_FAILURE);
    }
    Ok(0)
}

fn ground_truth(cfg: &RunConfig) -> cbq::Result<u8> {
    let problem = cfg.build_problem()?;
    match cfg.ground_truth(&problem)? {
        None => eprintln!("{} has a closed-form ground truth; nothing to cache", cfg.problem),
        Some((table, hit, path)) => {
            let state = if hit { "hit" } else { "built" };
            eprintln!("{state} {} ({} rows)", path.display(), table.rows.len());
        }
    }
    Ok(0)
}

fn dispatch(name: &str, m: &ArgMatches) -> cbq::Result<u8> {
    let cfg = load(m)?;
    match name {
        "run" => run(&cfg),
        "calibrate" => calibrate(&cfg),
        "converge" => converge(&cfg),
        _ => ground_truth(&cfg),
    }
}

fn main() -> ExitCode {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { CONFIG_ERROR } else { 0 });
        }
    };
    let Some((name, sub)) = matches.subcommand() else {
        return ExitCode::from(CONFIG_ERROR);
    };
    match dispatch(name, sub) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(CONFIG_ERROR)
        }
    }
}
