use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn run(args: &[&str], out: &Path) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_moire-spectra"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
        .status
        .code()
        .expect("exit code")
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

/// Data rows of a provenance-headed CSV, header dropped.
fn rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn single_rung_ladder_is_insufficient() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["dos-convergence", "--L", "40"], dir.path()), 0);
    assert_eq!(summary(dir.path())["verdict"], "insufficient ladder");
    for f in ["spectra.csv", "dos.csv", "curve.csv", "limiting.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn decoupled_chain_matches_free_law() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "dos-convergence",
        "--set",
        "model=coupled",
        "--set",
        "amplitude=0",
        "--L",
        "25,50,100,200",
        "--nodes",
        "2",
    ];
    run(&args, dir.path());
    let s = summary(dir.path());
    let last = s["ks_free"]
        .as_array()
        .unwrap()
        .last()
        .unwrap()
        .as_f64()
        .unwrap();
    assert!(last <= 0.05, "{last}");
}

#[test]
fn free_butterfly_columns_agree() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "butterfly",
        "--lambda",
        "0",
        "--L",
        "10",
        "--set",
        "alphas=5",
    ];
    assert_eq!(run(&args, dir.path()), 0);
    let r = rows(&dir.path().join("spectra.csv"));
    assert_eq!(r.len(), 5 * 21);
    let cols: Vec<&[Vec<String>]> = r.chunks(21).collect();
    for c in &cols[1..] {
        for (a, b) in c.iter().zip(cols[0]) {
            assert!((num(&a[1]) - num(&b[1])).abs() < 1e-12);
        }
    }
}

#[test]
fn one_sample_ensemble_is_its_own_mixture() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["disorder-ensemble", "--L", "20,40", "--set", "samples=1"];
    assert_eq!(run(&args, dir.path()), 0);
    assert!(rows(&dir.path().join("ks.csv"))
        .iter()
        .all(|r| num(&r[2]) == 0.0));
}

#[test]
fn zero_disorder_is_the_free_chain() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "disorder-ensemble",
        "--L",
        "10",
        "--set",
        "samples=3",
        "--set",
        "disorder_low=0",
        "--set",
        "disorder_high=0",
    ];
    run(&args, dir.path());
    let atoms = rows(&dir.path().join("dos.csv"));
    assert_eq!(atoms.len(), 3 * 21);
    for (k, a) in atoms.iter().enumerate() {
        let j = (k / 3 + 1) as f64;
        let exact = -2.0 * (j * std::f64::consts::PI / 22.0).cos();
        assert!((num(&a[1]) - exact).abs() < 1e-12);
        assert!((num(&a[2]) - 1.0 / 63.0).abs() < 1e-15);
    }
}

#[test]
fn failed_verdict_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    // ε(20) = ε(20.5): not strictly decreasing
    assert_eq!(run(&["trace-defect", "--L", "20,20.5"], dir.path()), 2);
    assert_eq!(summary(dir.path())["verdict"], "fail");
}

#[test]
fn bad_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["butterfly", "--set", "lamda=1"], dir.path()), 1);
    assert_eq!(run(&["dos-convergence", "--nodes", "0"], dir.path()), 1);
    assert!(!dir.path().join("summary.json").exists());
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# audit\nL = 12\nmax_shift = 2\nalpha = 0.3\n").unwrap();
    let out = dir.path().join("out");
    let args = [
        "covariance-audit",
        "--config",
        cfg.to_str().unwrap(),
        "--L",
        "14",
    ];
    assert_eq!(run(&args, &out), 0);
    let s = summary(&out);
    assert_eq!(s["L"][0], 14.0);
    assert_eq!(s["max_shift"], 2);

    std::fs::write(&cfg, "[section]\nL = 12\n").unwrap();
    assert_eq!(run(&args, &out), 1);
}

#[test]
fn every_file_carries_provenance() {
    let dir = tempfile::tempdir().unwrap();
    run(&["birkhoff-rates"], dir.path());
    let csv = std::fs::read_to_string(dir.path().join("birkhoff.csv")).unwrap();
    let s = summary(dir.path());
    let hash = s["provenance"]["config_hash"].as_str().unwrap();
    assert!(csv.contains(&format!("# config_hash={hash}\r\n")));
    assert!(csv.lines().any(|l| l.starts_with("# content_hash=")));
    assert_eq!(s["verdict"], "pass");
}
