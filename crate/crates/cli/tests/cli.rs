use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const POTTS2: &str = "[model]\nkind = \"potts\"\nq = 2\nd = 2\nbeta = 2.0\n\n[run]\nseed = 7\nsamples = 1000\ndepth = 3\n";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cayley-gibbs"))
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin()
        .env_remove("CAYLEY_GIBBS_OUT")
        .args(args)
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn chain_info_reports_ising_flip_probability() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), POTTS2);
    let out = run(&["chain-info", "--config", s(&cfg)]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let p1 = v["result"]["bounds"]["p1"].as_f64().unwrap();
    let e2 = std::f64::consts::E.powi(2);
    assert!((p1 - 1.0 / (e2 + 1.0)).abs() < 1e-12, "{p1}");
    assert_eq!(v["schema_version"], 1);
}

#[test]
fn malformed_config_exits_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "[model]\nkind = \"potts\"\nq = two\n");
    let out = run(&["bounds", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    let missing_seed = write_config(
        dir.path(),
        "[model]\nkind = \"potts\"\nq = 2\nd = 2\nbeta = 1.0\n",
    );
    let out = run(&["estimate", "qea", "--config", s(&missing_seed)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn oversized_ball_trips_guard() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), POTTS2);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "estimate",
        "qea",
        "--config",
        s(&cfg),
        "--depth",
        "80",
        "--out-dir",
        s(&out_dir),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

fn estimate(kind: &str, cfg: &Path, out_dir: &Path, extra: &[&str]) -> String {
    let mut args = vec![
        "estimate",
        kind,
        "--config",
        s(cfg),
        "--out-dir",
        s(out_dir),
    ];
    args.extend_from_slice(extra);
    let out = run(&args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    fs::read_to_string(out_dir.join(format!("{kind}.jsonl"))).unwrap()
}

#[test]
fn qea_emits_a_record_per_depth_and_a_sweep() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), POTTS2);
    let text = estimate("qea", &cfg, &dir.path().join("o"), &["--depths", "1,2,3"]);
    let records: Vec<Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(records.len(), 4);
    for (r, n) in records.iter().zip([1, 2, 3]) {
        assert_eq!(r["record"], "qea");
        assert_eq!(r["result"]["depth"], n);
        assert_eq!(r["result"]["seed"], 7);
        assert_eq!(r["result"]["samples"], 1000);
        assert!(r["result"]["stderr"].as_f64().unwrap() > 0.0);
    }
    assert_eq!(records[3]["record"], "sweep");
    assert!(dir.path().join("o/qea_sweep.csv").exists());
}

#[test]
fn reruns_and_worker_counts_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), POTTS2);
    for kind in ["reconstruction", "qea", "overlap", "bad-rate", "cov-decay"] {
        let extra: &[&str] = match kind {
            "cov-decay" => &[
                "--ray-depth",
                "6",
                "--distances",
                "1,2",
                "--truncation",
                "2",
            ],
            "bad-rate" => &["--truncation", "2"],
            _ => &[],
        };
        let mut runs = Vec::new();
        for (tag, workers) in [("a", "1"), ("b", "1"), ("c", "4")] {
            let mut args = extra.to_vec();
            args.extend_from_slice(&["--workers", workers]);
            runs.push(estimate(
                kind,
                &cfg,
                &dir.path().join(format!("{kind}-{tag}")),
                &args,
            ));
        }
        assert_eq!(runs[0], runs[1], "{kind} rerun");
        assert_eq!(runs[0], runs[2], "{kind} workers 1 vs 4");
    }
}

#[test]
fn overlap_csv_has_expected_columns() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), POTTS2);
    let out_dir = dir.path().join("o");
    estimate("overlap", &cfg, &out_dir, &["--depth", "4"]);
    let csv = fs::read_to_string(out_dir.join("overlap.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    for col in ["m", "matched", "mismatched", "gap", "gap_stderr"] {
        assert!(header.split(',').any(|c| c == col), "{header}");
    }
    assert!(csv.lines().count() > 1);
}

#[test]
fn environment_sets_output_directory() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), POTTS2);
    let target = dir.path().join("from-env");
    let out = bin()
        .env("CAYLEY_GIBBS_OUT", &target)
        .args(["estimate", "reconstruction", "--config", s(&cfg)])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(target.join("reconstruction.jsonl").exists());
}

#[test]
fn verify_passes_and_catches_injected_fault() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("verify.json");
    let out = run(&["verify", "--out", s(&report)]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["result"]["passed"], true);

    let out = run(&["verify", "--inject-fault", "flip-pair-sign"]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        stdout.lines().any(|l| l.starts_with("FAIL oracle/q=")),
        "{stdout}"
    );
}

#[test]
fn field_free_clock_has_uniform_marginal() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "[model]\nkind = \"clock\"\nq = 5\nd = 2\nbeta = 1.3\nprofile = [1.0, 1.7]\n",
    );
    let out_file = dir.path().join("info.json");
    let out = run(&["chain-info", "--config", s(&cfg), "--out", s(&out_file)]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&fs::read_to_string(&out_file).unwrap()).unwrap();
    for m in v["result"]["kernel"]["marginal"].as_array().unwrap() {
        assert!((m.as_f64().unwrap() - 0.2).abs() < 1e-12);
    }
}
