use std::path::Path;
use std::process::{Command, Output};

fn cbq(args: &[&str], cache: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cbq"))
        .args(args)
        .env("CBQ_CACHE_DIR", cache)
        .output()
        .expect("spawn cbq")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn missing_subcommand_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&cbq(&[], dir.path())), 1);
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = cbq(&["run", "--help"], dir.path());
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("--master-seed"));
}

#[test]
fn unknown_flag_and_bad_value() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&cbq(&["run", "--colour", "red"], dir.path())), 1);
    let o = cbq(&["run", "--n", "ten"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
}

#[test]
fn unknown_key_in_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.cfg");
    std::fs::write(&file, "problem = linear\nflavour = mint\n").unwrap();
    let o = cbq(&["run", "--config", file.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("flavour"));
}

#[test]
fn importance_sampling_on_health_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = cbq(&["run", "--problem", "health", "--methods", "is"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("importance"));
    // rejected before any ground truth is built
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn small_run_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rows.csv");
    let o = cbq(
        &["run", "--n", "5,8", "--t", "6", "--seeds", "2", "--methods", "cbq,mc", "--output", out.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 2);
    assert!(text.lines().next().unwrap().starts_with("problem,method"));
}

#[test]
fn failed_cells_give_partial_failure() {
    // MOBQ with a tiny cap fails every cell with CapExceeded
    let dir = tempfile::tempdir().unwrap();
    let o = cbq(&["run", "--n", "5", "--t", "5", "--seeds", "2", "--methods", "mobq", "--mobq-cap", "10"], dir.path());
    assert_eq!(code(&o), 2);
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().skip(1).all(|l| l.contains("NaN")));
}

#[test]
fn converge_needs_one_method() {
    let dir = tempfile::tempdir().unwrap();
    let o = cbq(&["converge", "--methods", "cbq,mc", "--n", "5,10"], dir.path());
    assert_eq!(code(&o), 1);
    let o = cbq(&["converge", "--methods", "mc", "--n", "5,10,20", "--t", "5", "--seeds", "3"], dir.path());
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.lines().next().unwrap(), "budget,median_rmse,slope");
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn calibrate_writes_level_coverage() {
    let dir = tempfile::tempdir().unwrap();
    let o = cbq(&["calibrate", "--n", "6", "--t", "6", "--seeds", "2", "--t-test", "10"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.lines().next().unwrap(), "level,coverage");
    for line in text.lines().skip(1) {
        let (_, c) = line.split_once(',').unwrap();
        let c: f64 = c.parse().unwrap();
        assert!((0.0..=1.0).contains(&c));
    }
}

#[test]
fn ground_truth_is_cached() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["ground-truth", "--problem", "sir", "--truth-count", "3", "--truth-draws", "20"];
    let first = cbq(&args, dir.path());
    assert_eq!(code(&first), 0);
    assert!(String::from_utf8_lossy(&first.stderr).starts_with("built"));
    let files: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(files.len(), 1);
    let name = files[0].file_name().unwrap().to_string_lossy().to_string();
    assert!(name.starts_with("sir-") && name.ends_with(".csv"));
    let before = std::fs::read(&files[0]).unwrap();

    let second = cbq(&args, dir.path());
    assert_eq!(code(&second), 0);
    assert!(String::from_utf8_lossy(&second.stderr).starts_with("hit"));
    assert_eq!(std::fs::read(&files[0]).unwrap(), before);

    // a different configuration gets its own file
    let third = cbq(&["ground-truth", "--problem", "sir", "--truth-count", "4", "--truth-draws", "20"], dir.path());
    assert_eq!(code(&third), 0);
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
}
