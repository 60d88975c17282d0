//! End-to-end runs of the `perqwalk` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use perqwalk::cli::output::{from_csv, meta_path, Metadata, ResultFile};
use serde_json::Value;

const STRIPE_INITIAL: &str = "7,7:L=0.7071067811865476,D=0.7071067811865476";
const PEAK_INITIAL: &str = "7,7:L=0.5,D=0.5,U=0.5,R=0.5";

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_perqwalk")).args(args).output().expect("binary runs")
}

/// Runs a whitespace-separated command line followed by `extra`.
fn sh(line: &str, extra: &[&str]) -> Output {
    let args: Vec<&str> = line.split_whitespace().chain(extra.iter().copied()).collect();
    run(&args)
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn golden() -> Value {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/hadamard_stripes.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn monte_carlo_output_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let files: Vec<PathBuf> = (0..3).map(|k| dir.path().join(format!("mc{k}.csv"))).collect();
    let line = "evolve --size 3x3 --coin hadamard2d --mode mc --steps 20 --trials 3000 --seed 42 \
                --initial 1,1:L=0.5,D=0.5,U=0.5,R=0.5 --out";
    assert_eq!(code(&sh(line, &[path_str(&files[0])])), 0);
    assert_eq!(code(&sh(line, &[path_str(&files[1])])), 0);
    let args: Vec<&str> = line.split_whitespace().chain([path_str(&files[2])]).collect();
    let single = Command::new(env!("CARGO_BIN_EXE_perqwalk")).args(&args).env("PERQWALK_THREADS", "1").output();
    assert_eq!(code(&single.unwrap()), 0);
    let bytes: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(f).unwrap()).collect();
    assert_eq!(bytes[0], bytes[1]);
    assert_eq!(bytes[0], bytes[2]);
    let (dist, stderr) = from_csv(std::str::from_utf8(&bytes[0]).unwrap()).unwrap();
    assert!((dist.total() - 1.0).abs() < 1e-12);
    assert!(stderr.unwrap().iter().all(|&e| e > 0.0));
    let meta: Metadata = serde_json::from_str(&std::fs::read_to_string(meta_path(&files[0])).unwrap()).unwrap();
    assert_eq!(meta.seed, Some(42));
    assert_eq!(meta.trials, Some(3000));
    assert_eq!(meta.mode.as_deref(), Some("mc"));
}

#[test]
fn bad_configuration_exits_2() {
    for args in [
        vec!["evolve", "--size", "3y3", "--initial", "0,0:L=1"],
        vec!["evolve", "--size", "3x3", "--initial", "0,0:L=0.5"],
        vec!["evolve", "--size", "3x3", "--initial", "5,0:L=1"],
        vec!["evolve", "--size", "3x3", "--coin", "nope", "--initial", "0,0:L=1"],
        vec!["evolve", "--size", "3x3", "--p", "1.5", "--initial", "0,0:L=1"],
        vec!["asymptotic", "--size", "3x3", "--p", "0", "--initial", "0,0:L=1"],
        vec!["evolve", "--size", "3x3", "--bogus"],
    ] {
        let out = run(&args);
        assert_eq!(code(&out), 2, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn exact_mode_guard_exits_3() {
    let out = run(&["evolve", "--size", "33x33", "--mode", "exact", "--steps", "1", "--initial", "0,0:L=1"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("exact evolution"));
}

#[test]
fn forced_fastpath_without_certificate_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let coin = dir.path().join("coin.json");
    let grover = perqwalk::CoinOperator::grover().with_global_phase(perqwalk::linalg::I);
    std::fs::write(&coin, grover.to_json().to_string()).unwrap();
    let base =
        ["asymptotic", "--size", "5x5", "--coin", "custom", "--coin-file", path_str(&coin), "--initial", "2,2:L=1"];
    let forced: Vec<&str> = base.iter().copied().chain(["--method", "fastpath"]).collect();
    assert_eq!(code(&run(&forced)), 4);
    let out = run(&base);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn zero_probability_leaves_the_marginal_in_place() {
    for coin in ["hadamard2d", "grover", "fourier"] {
        let line = format!("evolve --size 4x3 --coin {coin} --p 0 --mode exact --steps 10");
        let out = sh(&line, &["--initial", "2,1:L=0.5,D=0.5i,U=-0.5,R=0.5"]);
        assert_eq!(code(&out), 0);
        let (dist, _) = from_csv(&String::from_utf8(out.stdout).unwrap()).unwrap();
        for s in 0..4 {
            for t in 0..3 {
                let expect = if (s, t) == (2, 1) { 1.0 } else { 0.0 };
                assert!((dist.get(s, t) - expect).abs() < 1e-12, "{coin} ({s},{t})");
            }
        }
    }
}

#[test]
fn fourier_torus_is_uniform() {
    let out =
        run(&["asymptotic", "--size", "3x3", "--coin", "fourier", "--initial", "1,2:L=0.6,R=0.8i", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let file: ResultFile = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(file.metadata.attractor_dimension, Some(1));
    assert!(file.distribution.p.iter().all(|&x| (x - 1.0 / 9.0).abs() < 1e-12));
}

#[test]
fn hadamard_torus_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("stripes.json");
    let line = format!("asymptotic --size 15x16 --coin hadamard2d --initial {STRIPE_INITIAL} --format json --out");
    let status = sh(&line, &[path_str(&out)]);
    assert_eq!(code(&status), 0);
    let file = ResultFile::read(&out).unwrap();
    assert_eq!(file.metadata.method.as_deref(), Some("fastpath"));
    assert_eq!(file.metadata.completeness.as_deref(), Some("analytic"));
    assert_eq!(file.metadata.attractor_dimension, Some(1 + 31 * 31));
    let want: Vec<f64> = golden()["torus_15x16"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let diff = want.iter().zip(&file.distribution.p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-10, "{diff:e}");
}

#[test]
fn asymptotic_methods_agree_when_certified() {
    let mut results = Vec::new();
    for method in ["eq5", "fastpath"] {
        let out = sh("asymptotic --size 3x4 --coin grover --initial 0,1:U=1 --format json --method", &[method]);
        assert_eq!(code(&out), 0);
        let file: ResultFile = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(file.metadata.completeness.as_deref(), Some("certified"));
        results.push(file.distribution().unwrap());
    }
    assert!(results[0].l1_distance(&results[1]) < 1e-10);
}

#[test]
fn unitary_grover_walk_localizes() {
    let out = sh("evolve --size 15x15 --coin grover --mode unitary --steps 1000 --initial", &[PEAK_INITIAL]);
    assert_eq!(code(&out), 0);
    let (dist, _) = from_csv(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(dist.argmax(), perqwalk::Site::new(7, 7));
    assert!(dist.get(7, 7) > 1.0 / 225.0);
}

#[test]
fn attractor_report_lists_counts() {
    let out = run(&["attractors", "--size", "3x4", "--coin", "hadamard2d"]);
    assert_eq!(code(&out), 0);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["numeric_count"], 50);
    assert_eq!(report["analytic_count"], 50);
    assert_eq!(report["match"], true);
    assert_eq!(report["eigenvalues"].as_array().unwrap().len(), 50);
}

#[test]
fn validate_suite_passes() {
    let out = run(&["validate", "--suite", "oracle"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], true);
    assert!(!report["checks"].as_array().unwrap().is_empty());
}
