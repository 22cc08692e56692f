use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn cpsc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpsc"))
        .args(args)
        .current_dir(dir)
        .env("CPSC_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn preset(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("presets").join(format!("{name}.json")).display().to_string()
}

fn small(dir: &Path) -> String {
    let path = dir.join("small.json");
    std::fs::write(
        &path,
        r#"{
  "m": 16, "grid": {"n1": 3, "n2": 3, "w1": 2.0, "w2": 2.0}, "u": 4, "k": 3,
  "snr_db": 10.0, "rice_factor": 0.1, "trials": 200, "seed": 5,
  "scheme": "bs_random_codeword", "collision_policy": "deferral",
  "sweep": {"param": "m", "values": [8, 16, 32]}
}"#,
    )
    .unwrap();
    path.display().to_string()
}

#[test]
fn sweep_validate_plot_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let out = cpsc(&["sweep", "--config", &cfg, "--out", "res"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = dir.path().join("res/small.csv");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.starts_with("sweep_param,value,mean_rate_per_user,ci95,mean_sum_rate,sum_ci95,collision_rate,trials,seed\n"));

    let v = cpsc(&["validate", "res/small.csv", "--config", &cfg], dir.path());
    assert_eq!(v.status.code(), Some(0), "{}", String::from_utf8_lossy(&v.stdout));
    assert_eq!(String::from_utf8_lossy(&v.stdout).matches("PASS").count(), 3);

    let p = cpsc(&["plot", "res/small.csv", "--config", &cfg, "--out", "svg"], dir.path());
    assert!(p.status.success());
    let svg = std::fs::read_to_string(dir.path().join("svg/small_collision.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
}

#[test]
fn run_applies_overrides_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let out = cpsc(&["run", "--config", &cfg, "--set", "u=2", "--set", "m=4", "--trials", "30", "--seed", "8", "--out", "."], dir.path());
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("small.csv")).unwrap();
    let row = text.lines().nth(1).unwrap();
    assert!(row.starts_with("none,0,"));
    assert!(row.ends_with(",30,8"));
}

#[test]
fn sweeps_are_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let status = Command::new(env!("CARGO_BIN_EXE_cpsc"))
            .args(["sweep", "--config", &cfg, "--trials", "60", "--out", threads])
            .current_dir(dir.path())
            .env("CPSC_THREADS", threads)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(std::fs::read(dir.path().join(threads).join("small.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn usage_and_schema_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    for args in [
        vec!["run"],
        vec!["run", "--config", "missing.json"],
        vec!["run", "--config", cfg.as_str(), "--set", "nonsense=3"],
        vec!["run", "--config", cfg.as_str(), "--set", "u=0"],
        vec!["validate", "--suite", "nope"],
        vec!["validate", "whatever.csv"],
    ] {
        assert_eq!(cpsc(&args, dir.path()).status.code(), Some(2), "{args:?}");
    }

    std::fs::write(dir.path().join("empty.csv"), "").unwrap();
    std::fs::write(dir.path().join("bad.csv"), "a,b\n1,2\n").unwrap();
    for csv in ["empty.csv", "bad.csv"] {
        let out = cpsc(&["plot", csv, "--out", "never"], dir.path());
        assert_eq!(out.status.code(), Some(2));
        assert!(!dir.path().join("never").exists());
    }

    let bad_threads = Command::new(env!("CARGO_BIN_EXE_cpsc"))
        .args(["run", "--config", &cfg, "--trials", "5"])
        .current_dir(dir.path())
        .env("CPSC_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad_threads.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_1() {
    // N = 144 with K = 12 needs far more subsets than the exhaustive budget allows
    let dir = tempfile::tempdir().unwrap();
    let out = cpsc(
        &["run", "--config", &preset("fig3"), "--set", "scheme=cpsc_exhaustive", "--set", "k=12", "--set", "grid.n1=12", "--set", "grid.n2=12", "--trials", "2"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trial 0"));
}

#[test]
fn single_suite_and_codebook_export() {
    let dir = tempfile::tempdir().unwrap();
    let out = cpsc(&["validate", "--suite", "fft"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().count(), 1);
    assert!(stdout.starts_with("fft"));

    let out = cpsc(&["export-codebook", "--config", &preset("fig7"), "--set", "m=8", "--out", "cb"], dir.path());
    assert!(out.status.success());
    let book = cpsc_fama::codebook::Codebook::read_csv(std::fs::File::open(dir.path().join("cb/codebook_m8.csv")).unwrap()).unwrap();
    assert_eq!(book.size(), 8);
}

#[test]
fn every_preset_loads() {
    for i in 3..=11 {
        let cfg = cpsc_fama::config::ExperimentConfig::load(Path::new(&preset(&format!("fig{i}")))).unwrap();
        assert!(cfg.sweep.is_some());
        assert!(cfg.points().unwrap().len() >= 5);
    }
}
