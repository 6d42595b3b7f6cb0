//! End-to-end tests of the `tcmatch` binary.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tcmatch"))
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

const DEMO_REPORT: &str = "t=8 seq=8 match=1:7,2:8,3:5,4:4,5:3,6:1";

#[test]
fn run_reports_the_demo_match() {
    let out = bin()
        .args(["run"])
        .arg(data("demo.stream"))
        .arg(data("demo.query"))
        .args(["--window", "9"])
        .output()
        .expect("spawn");
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.trim(), DEMO_REPORT);
}

#[test]
fn threaded_run_reports_the_same_match() {
    let out = bin()
        .args(["run"])
        .arg(data("demo.stream"))
        .arg(data("demo.query"))
        .args(["--window", "9", "--threads", "4"])
        .env("TCMATCH_CHECKS", "1")
        .output()
        .expect("spawn");
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.trim(), DEMO_REPORT);
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("0 wait-list order violations"));
}

#[test]
fn trace_file_records_lock_accesses() {
    let dir = std::env::temp_dir().join(format!("tcmatch-trace-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let trace = dir.join("trace.tsv");
    let out = bin()
        .args(["run"])
        .arg(data("demo.stream"))
        .arg(data("demo.query"))
        .args(["--window", "9", "--threads", "2"])
        .env("TCMATCH_TRACE", &trace)
        .output()
        .expect("spawn");
    assert!(out.status.success());
    let text = std::fs::read_to_string(&trace).unwrap();
    let mut acquires = 0;
    for line in text.lines() {
        let fields: Vec<&str> = line.split('\t').collect();
        assert_eq!(fields.len(), 4, "bad trace line {line}");
        assert!(fields[1].starts_with('L'));
        assert!(fields[2] == "S" || fields[2] == "X");
        assert!(fields[3] == "acquire" || fields[3] == "release");
        if fields[3] == "acquire" {
            acquires += 1;
        }
    }
    assert!(acquires > 0);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn plan_prints_decomposition_and_cost() {
    let out = bin().arg("plan").arg(data("demo.query")).output().expect("spawn");
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("tcsub_count: 10"));
    assert!(stdout.contains("k: 3"));
    assert!(stdout.contains("Q1: {e6,e5,e4}"));
    assert!(stdout.contains("Q2: {e3,e1}"));
    assert!(stdout.contains("Q3: {e2}"));
}

#[test]
fn check_passes_on_the_demo() {
    let out = bin()
        .arg("check")
        .arg(data("demo.stream"))
        .arg(data("demo.query"))
        .args(["--window", "9"])
        .output()
        .expect("spawn");
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("check: OK"));
}

#[test]
fn gen_is_deterministic_and_checkable() {
    let run_gen = || {
        let out = bin()
            .arg("gen")
            .arg(data("demo.stream"))
            .args(["--size", "3", "--mode", "random", "--seed", "11"])
            .output()
            .expect("spawn");
        assert!(out.status.success());
        String::from_utf8(out.stdout).unwrap()
    };
    let a = run_gen();
    assert_eq!(a, run_gen(), "same seed must reproduce the query");
    // The generated query round-trips through check against its own stream.
    let dir = std::env::temp_dir().join(format!("tcmatch-gen-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let qpath = dir.join("gen.query");
    std::fs::write(&qpath, &a).unwrap();
    let out = bin()
        .arg("check")
        .arg(data("demo.stream"))
        .arg(&qpath)
        .args(["--window", "20"])
        .output()
        .expect("spawn");
    assert!(out.status.success());
    std::fs::remove_dir_all(&dir).ok();
}

/// Twenty generated instances (sizes x modes x seeds) all pass `check`
/// against the stream they were drawn from.
#[test]
fn check_twenty_generated_instances() {
    let dir = std::env::temp_dir().join(format!("tcmatch-check20-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut ran = 0;
    'outer: for size in [2usize, 3] {
        for mode in ["full", "empty", "random"] {
            for seed in 0..4u64 {
                if ran == 20 {
                    break 'outer;
                }
                let qpath = dir.join(format!("q-{size}-{mode}-{seed}.query"));
                let gen = bin()
                    .arg("gen")
                    .arg(data("demo.stream"))
                    .args(["--size", &size.to_string(), "--mode", mode, "--seed"])
                    .arg(seed.to_string())
                    .arg("--out")
                    .arg(&qpath)
                    .output()
                    .expect("spawn gen");
                assert!(gen.status.success(), "gen {size} {mode} {seed}");
                for window in [9u64, 20] {
                    if ran == 20 {
                        break 'outer;
                    }
                    let out = bin()
                        .arg("check")
                        .arg(data("demo.stream"))
                        .arg(&qpath)
                        .args(["--window", &window.to_string()])
                        .output()
                        .expect("spawn check");
                    assert!(
                        out.status.success(),
                        "check failed for size {} mode {} seed {} window {}: {}",
                        size,
                        mode,
                        seed,
                        window,
                        String::from_utf8_lossy(&out.stderr)
                    );
                    ran += 1;
                }
            }
        }
    }
    assert_eq!(ran, 20);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn metrics_file_has_the_expected_keys() {
    let dir = std::env::temp_dir().join(format!("tcmatch-metrics-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mpath = dir.join("metrics.txt");
    let out = bin()
        .args(["run"])
        .arg(data("demo.stream"))
        .arg(data("demo.query"))
        .args(["--window", "9", "--metrics"])
        .arg(&mpath)
        .output()
        .expect("spawn");
    assert!(out.status.success());
    let text = std::fs::read_to_string(&mpath).unwrap();
    for key in [
        "edges_ingested=10",
        "edges_discarded=2",
        "reports_emitted=1",
        "peak_partial_matches=",
        "peak_msnode_count=",
        "throughput=",
    ] {
        assert!(text.contains(key), "metrics missing `{key}`:\n{text}");
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn usage_errors_exit_two() {
    let out = bin()
        .args(["run"])
        .arg(data("demo.stream"))
        .arg(data("demo.query"))
        .output()
        .expect("spawn");
    assert_eq!(out.status.code(), Some(2), "missing --window is a usage error");

    let out = bin()
        .args(["run"])
        .arg(data("demo.stream"))
        .arg(data("demo.query"))
        .args(["--window", "9", "--flat", "--threads", "2"])
        .output()
        .expect("spawn");
    assert_eq!(out.status.code(), Some(2), "--flat with threads is a usage error");
}

#[test]
fn oracle_prints_live_match_sets() {
    let out = bin()
        .arg("oracle")
        .arg(data("demo.stream"))
        .arg(data("demo.query"))
        .args(["--window", "9"])
        .output()
        .expect("spawn");
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    // The match is live at t=8 and t=9, gone at t=10.
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("t=8 seq=8"));
    assert!(lines[1].starts_with("t=9 seq=9"));
    assert!(lines.iter().all(|l| l.contains("match=1:7,2:8,3:5,4:4,5:3,6:1")));
}
