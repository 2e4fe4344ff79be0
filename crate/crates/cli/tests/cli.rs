use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"seed = 3
trials = 200

[system]
mu = [1.0, 1.0]
mode = "continuous"
step = 0.01
delta = 1.0

[calibration]
alpha = 0.05
beta = 0.05
n_mc = 10000
n_trials = 1000
"#;

fn dsprt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsprt")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn simulate_writes_one_row_per_trial() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("trials.csv");
    let o = dsprt(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap(), "--trials", "50"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("fusion thresholds"));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "seed,decision,stop_time,u_at_stop,u_tilde_at_stop,msg_count_total");
    assert_eq!(lines.count(), 50);
}

#[test]
fn seed_flag_overrides_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CONFIG.replace("delta = 1.0", "delta = 1.0\na_tilde = 3.0\nb_tilde = 3.0"));
    let run = |seed: &str| dsprt(&["simulate", "--config", &cfg, "--seed", seed, "--trials", "20"]).stdout;
    assert_eq!(run("1"), run("1"));
    assert_ne!(run("1"), run("2"));
}

#[test]
fn calibrate_reports_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let o = dsprt(&["calibrate", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("sensor,delta_lo,delta_hi,lambda_lo,lambda_hi"));
}

#[test]
fn usage_and_config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(dsprt(&["simulate"]).status.code(), Some(1));
    assert_eq!(dsprt(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(dsprt(&["simulate", "--seed", "x"]).status.code(), Some(1));
    let cfg = write_config(dir.path(), &format!("{CONFIG}colour = \"red\"\n"));
    let o = dsprt(&["simulate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
    let missing = dir.path().join("nope.toml");
    assert_eq!(dsprt(&["check", "--config", missing.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn calibration_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CONFIG.replace("alpha = 0.05\nbeta = 0.05", "alpha = 0.001\nbeta = 0.001"));
    let o = dsprt(&["simulate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn help_exits_0() {
    assert_eq!(dsprt(&["--help"]).status.code(), Some(0));
}
