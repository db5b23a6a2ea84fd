use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn islt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_islt"))
        .args(args)
        .arg("--out")
        .arg(dir.join("results"))
        .env("ISLT_CACHE_DIR", dir.join("cache"))
        .output()
        .expect("islt runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn manifest(dir: &Path, run_id: &str) -> Value {
    let text = fs::read_to_string(dir.join("results").join(run_id).join("manifest.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

const SMALL_SIM: &[&str] = &[
    "--k", "1", "--d", "1", "--delta", "0.1", "--radius", "1", "--steps", "32",
];

#[test]
fn help_exits_zero() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&islt(tmp.path(), &["--help"])), 0);
}

#[test]
fn decimal_beta_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let out = islt(tmp.path(), &["kernel", "--beta", "0.5"]);
    assert_eq!(code(&out), 64);
    assert!(String::from_utf8_lossy(&out.stderr).contains("1/2^k"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&islt(tmp.path(), &["simulate", "--bogus"])), 64);
}

#[test]
fn holder_refuses_small_ensembles() {
    let tmp = TempDir::new().unwrap();
    let out = islt(tmp.path(), &["holder", "--k", "1", "--d", "1", "--replicas", "50"]);
    assert_eq!(code(&out), 64);
    assert!(!tmp.path().join("results").exists() || fs::read_dir(tmp.path().join("results")).unwrap().next().is_none());
}

#[test]
fn oversized_kernel_table_is_refused() {
    let tmp = TempDir::new().unwrap();
    let out = islt(tmp.path(), &["kernel", "--beta", "1/8", "--d", "3", "--budget", "1000"]);
    assert_eq!(code(&out), 64);
}

#[test]
fn kernel_cache_is_reused() {
    let tmp = TempDir::new().unwrap();
    let args = ["kernel", "--beta", "1/2", "--d", "1", "--delta", "0.1", "--times", "0.5,1"];
    let first = islt(tmp.path(), &[&args[..], &["--run-id", "a"]].concat());
    let second = islt(tmp.path(), &[&args[..], &["--run-id", "b"]].concat());
    assert_eq!(code(&first), 0);
    assert_eq!(code(&second), 0);
    let (a, b) = (manifest(tmp.path(), "a"), manifest(tmp.path(), "b"));
    assert_eq!(a["kernel_cache_hit"], false);
    assert_eq!(b["kernel_cache_hit"], true);
    assert_eq!(a["kernel_cache_hash"], b["kernel_cache_hash"]);
    let slice = fs::read_to_string(tmp.path().join("results/a/kernel_slice.csv")).unwrap();
    assert!(slice.starts_with("t,x,value"));
}

#[test]
fn simulate_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let mut args = vec!["simulate", "--seed", "7", "--replicas", "16", "--save-fields", "2"];
    args.extend_from_slice(SMALL_SIM);
    assert_eq!(code(&islt(tmp.path(), &[&args[..], &["--run-id", "a"]].concat())), 0);
    assert_eq!(code(&islt(tmp.path(), &[&args[..], &["--run-id", "b"]].concat())), 0);
    for file in ["moments.csv", "field_r0.csv", "field_r1.csv", "variance.json"] {
        let a = fs::read(tmp.path().join("results/a").join(file)).unwrap();
        let b = fs::read(tmp.path().join("results/b").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
}

#[test]
fn zero_diffusion_reduction_passes() {
    let tmp = TempDir::new().unwrap();
    let mut args = vec!["simulate", "--a", "zero", "--replicas", "4", "--run-id", "z"];
    args.extend_from_slice(SMALL_SIM);
    assert_eq!(code(&islt(tmp.path(), &args)), 0);
    let text = fs::read_to_string(tmp.path().join("results/z/zero_reduction.json")).unwrap();
    let z: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(z["pass"], true);
    assert_eq!(z["max_abs_random"], 0.0);
}

#[test]
fn config_file_values_apply_under_flags() {
    let tmp = TempDir::new().unwrap();
    let config = tmp.path().join("run.toml");
    fs::write(
        &config,
        "[model]\nbeta = \"1/2\"\nd = 1\n\n[sie]\ndelta = 0.1\nradius = 1.0\nsteps = 24\nreplicas = 6\nseed = 11\na = \"sin:0.5\"\n",
    )
    .unwrap();
    let config = config.to_str().unwrap();
    let args = ["simulate", "--config", config, "--steps", "16", "--run-id", "c"];
    assert_eq!(code(&islt(tmp.path(), &args)), 0);
    let m = manifest(tmp.path(), "c");
    assert_eq!(m["seed"], 11);
    assert_eq!(m["config"]["sie"]["steps"], 16);
    assert_eq!(m["config"]["sie"]["replicas"], 6);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let config = tmp.path().join("bad.toml");
    fs::write(&config, "[sie]\nstep = 10\n").unwrap();
    let out = islt(tmp.path(), &["simulate", "--config", config.to_str().unwrap()]);
    assert_eq!(code(&out), 64);
}

#[test]
fn divergence_suite_passes() {
    let tmp = TempDir::new().unwrap();
    let out = islt(tmp.path(), &["verify", "divergence", "--k", "1", "--run-id", "v"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    assert!(tmp.path().join("results/v/manifest.json").exists());
}
