mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ldpc_floor::cli::{
    CalibrationArtifact, EnumerationArtifact, TrappingSetArtifact, EXIT_BUDGET, EXIT_USAGE,
    EXIT_VALIDATION,
};
use ldpc_floor::code::random_regular;
use ldpc_floor::estimation::Estimator;
use ldpc_floor::{DecoderConfig, TannerGraph};
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ldpc-floor"))
        .args(args)
        .env_remove("LDPC_FLOOR_WORKERS")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert_eq!(
        code(&out),
        0,
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_code(dir: &Path, name: &str, g: &TannerGraph) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, g.to_alist()).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read<T: serde::de::DeserializeOwned>(p: &Path) -> T {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn hamming_enumeration_matches_oracle() {
    let dir = TempDir::new().unwrap();
    let g = common::hamming15();
    let code_path = write_code(dir.path(), "h.alist", &g);
    let out = dir.path().join("e.json");
    ok(&[
        "enumerate",
        "--code",
        s(&code_path),
        "--max-weight",
        "3",
        "--out",
        s(&out),
    ]);
    let art: EnumerationArtifact = read(&out);
    let (j, count, classes) = common::naive_oracle(&g, &DecoderConfig::gallager_a(&g), 3);
    assert_eq!(art.result.j_min, j);
    assert_eq!(art.result.e_j_count, count);
    assert_eq!(art.result.failures_by_class, classes);
    assert!(!dir.path().join("e.json.ckpt").exists());
}

#[test]
fn ga_and_order_zero_agree() {
    let dir = TempDir::new().unwrap();
    let g = random_regular(20, 3, 5, false, 0).unwrap();
    let c = write_code(dir.path(), "c.alist", &g);
    let (ga, mb) = (dir.path().join("ga.json"), dir.path().join("mb.json"));
    ok(&[
        "enumerate",
        "--code",
        s(&c),
        "--max-weight",
        "3",
        "--out",
        s(&ga),
    ]);
    ok(&[
        "enumerate",
        "--code",
        s(&c),
        "--decoder",
        "mb",
        "--omega",
        "0",
        "--max-weight",
        "3",
        "--out",
        s(&mb),
    ]);
    let (a, b): (EnumerationArtifact, EnumerationArtifact) = (read(&ga), read(&mb));
    assert_eq!(a.result.j_min, b.result.j_min);
    assert_eq!(a.result.e_j_count, b.result.e_j_count);
    assert_eq!(a.result.failures_by_class, b.result.failures_by_class);
    assert_eq!(a.result.failing_patterns, b.result.failing_patterns);
}

#[test]
fn interrupted_run_resumes_to_identical_output() {
    let dir = TempDir::new().unwrap();
    let g = random_regular(20, 3, 5, false, 0).unwrap();
    let c = write_code(dir.path(), "c.alist", &g);
    let (full, part) = (dir.path().join("full.json"), dir.path().join("part.json"));
    ok(&[
        "enumerate",
        "--code",
        s(&c),
        "--max-weight",
        "3",
        "--out",
        s(&full),
    ]);
    let ckpt = dir.path().join("part.json.ckpt");
    let stopped = run(&[
        "enumerate",
        "--code",
        s(&c),
        "--max-weight",
        "3",
        "--out",
        s(&part),
        "--checkpoint-interval",
        "10",
        "--stop-after",
        "50",
    ]);
    assert_eq!(code(&stopped), EXIT_BUDGET as i32);
    assert!(ckpt.exists() && !part.exists());
    let mut rounds = 0;
    while !part.exists() {
        let r = run(&[
            "enumerate",
            "--code",
            s(&c),
            "--max-weight",
            "3",
            "--out",
            s(&part),
            "--checkpoint-interval",
            "10",
            "--stop-after",
            "50",
            "--resume",
            s(&ckpt),
        ]);
        rounds += 1;
        assert!(rounds < 100);
        assert!([0, EXIT_BUDGET as i32].contains(&code(&r)));
    }
    assert!(rounds > 1);
    assert_eq!(fs::read(&full).unwrap(), fs::read(&part).unwrap());
    assert!(!ckpt.exists());
}

#[test]
fn small_weight_budget_exits_4_with_output() {
    let dir = TempDir::new().unwrap();
    let g = random_regular(20, 3, 5, false, 0).unwrap();
    let c = write_code(dir.path(), "c.alist", &g);
    let out = dir.path().join("e.json");
    let r = run(&[
        "enumerate",
        "--code",
        s(&c),
        "--max-weight",
        "1",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&r), EXIT_BUDGET as i32);
    let art: EnumerationArtifact = read(&out);
    assert_eq!(art.result.j_min, None);
    assert_eq!(art.result.tested_per_weight[&1], 20);
}

fn enumerated(dir: &Path) -> (PathBuf, PathBuf) {
    let g = random_regular(20, 3, 5, false, 0).unwrap();
    let c = write_code(dir, "c.alist", &g);
    let e = dir.join("e.json");
    ok(&[
        "enumerate",
        "--code",
        s(&c),
        "--max-weight",
        "3",
        "--out",
        s(&e),
    ]);
    (c, e)
}

#[test]
fn estimate_csv() {
    let dir = TempDir::new().unwrap();
    let (_, e) = enumerated(dir.path());
    let out = ok(&[
        "estimate",
        "--from",
        s(&e),
        "--n0",
        "6",
        "--m-avg",
        "4",
        "--eps",
        "1e-4:1e-1:5",
        "--n-list",
        "n",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("epsilon,p_j,fer_lower,fer_upper,ber_estimate")
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 5);
    for r in &rows {
        assert!((r[2] - r[3]).abs() <= 1e-12 * r[3], "{r:?}");
    }

    let base = dir.path().join("fer.csv");
    ok(&[
        "estimate",
        "--from",
        s(&e),
        "--n0",
        "6",
        "--m-avg",
        "4",
        "--eps",
        "1e-4:1e-1:5,lin",
        "--n-list",
        "2,6,n",
        "--out",
        s(&base),
    ]);
    for cap in [2, 6, 20] {
        let p = dir.path().join(format!("fer_N{cap}.csv"));
        assert_eq!(fs::read_to_string(p).unwrap().lines().count(), 6);
    }

    let r = run(&[
        "estimate",
        "--from",
        s(&e),
        "--n0",
        "6",
        "--m-avg",
        "4",
        "--eps",
        "0:1e-1:5",
    ]);
    assert_eq!(code(&r), EXIT_VALIDATION as i32);
}

#[test]
fn check_ts_on_six_cycle() {
    let dir = TempDir::new().unwrap();
    let c = write_code(dir.path(), "six.alist", &common::six_cycle_graph());
    let out = dir.path().join("ts.json");
    ok(&[
        "check-ts",
        "--code",
        s(&c),
        "--set",
        "3,17,42",
        "--out",
        s(&out),
    ]);
    let art: TrappingSetArtifact = read(&out);
    assert!(art.report.condition_holds);
    assert_eq!(art.certified, Some(true));
    ok(&["check-ts", "--code", s(&c), "--set", "3", "--out", s(&out)]);
    let art: TrappingSetArtifact = read(&out);
    assert!(!art.report.condition_holds);
    assert_eq!(art.certified, None);
}

#[test]
fn calibration_recovers_planted_cap() {
    let dir = TempDir::new().unwrap();
    let (_, e) = enumerated(dir.path());
    let art: EnumerationArtifact = read(&e);
    let est = Estimator::new(20, art.result.j_min.unwrap(), art.result.e_j_count).unwrap();
    let points: Vec<String> = [0.01, 0.015, 0.02, 0.03]
        .iter()
        .map(|&eps| format!("{eps}:{}", est.fer_upper(6, eps).unwrap()))
        .collect();
    let out = dir.path().join("cal.json");
    ok(&[
        "calibrate-n0",
        "--from",
        s(&e),
        "--points",
        &points.join(","),
        "--out",
        s(&out),
    ]);
    let cal: CalibrationArtifact = read(&out);
    assert_eq!(cal.n0, 6);
    assert!(cal.used_points.len() >= 2);
}

#[test]
fn simulate_reaches_error_target() {
    let dir = TempDir::new().unwrap();
    let g = random_regular(200, 3, 6, true, 3).unwrap();
    let c = write_code(dir.path(), "c.alist", &g);
    let out = ok(&[
        "simulate",
        "--code",
        s(&c),
        "--eps",
        "0.03,0.04",
        "--min-frame-errors",
        "100",
        "--seed",
        "1",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("epsilon,frames,frame_errors,fer,fer_ci_low,fer_ci_high,ber\n"));
    for line in text.lines().skip(1) {
        let errors: u64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert!(errors >= 100);
    }
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(
        code(&run(&["enumerate", "--no-such-flag"])),
        EXIT_USAGE as i32
    );
    assert_eq!(
        code(&run(&["estimate", "--from", "x.json"])),
        EXIT_USAGE as i32
    );
}

#[test]
fn artifacts_from_another_code_are_rejected() {
    let dir = TempDir::new().unwrap();
    let (_, e) = enumerated(dir.path());
    let other = write_code(
        dir.path(),
        "other.alist",
        &random_regular(20, 3, 5, false, 5).unwrap(),
    );
    let cal = dir.path().join("cal.json");
    let r = run(&[
        "calibrate-n0",
        "--from",
        s(&e),
        "--code",
        s(&other),
        "--eps",
        "0.05",
        "--out",
        s(&cal),
    ]);
    assert_eq!(code(&r), EXIT_VALIDATION as i32);

    let m = dir.path().join("m.json");
    ok(&[
        "estimate-m",
        "--code",
        s(&other),
        "--n0",
        "6",
        "--trials",
        "200",
        "--out",
        s(&m),
    ]);
    let r = run(&[
        "estimate",
        "--from",
        s(&e),
        "--n0",
        "6",
        "--m-from",
        s(&m),
        "--eps",
        "1e-3:1e-2:3",
    ]);
    assert_eq!(code(&r), EXIT_VALIDATION as i32);
    assert!(!cal.exists());
}

#[test]
fn manifest_fails_closed() {
    let dir = TempDir::new().unwrap();
    let (c, _) = enumerated(dir.path());
    let manifest = dir.path().join("run.json");
    let m = dir.path().join("m.json");
    ok(&[
        "--manifest",
        s(&manifest),
        "estimate-m",
        "--code",
        s(&c),
        "--n0",
        "6",
        "--trials",
        "200",
        "--out",
        s(&m),
    ]);
    let r = run(&[
        "--manifest",
        s(&manifest),
        "estimate-m",
        "--code",
        s(&c),
        "--decoder",
        "mb",
        "--omega",
        "0",
        "--n0",
        "6",
        "--trials",
        "200",
    ]);
    assert_eq!(code(&r), EXIT_VALIDATION as i32);
    let other = write_code(
        dir.path(),
        "other.alist",
        &random_regular(20, 3, 5, false, 5).unwrap(),
    );
    let r = run(&[
        "--manifest",
        s(&manifest),
        "estimate-m",
        "--code",
        s(&other),
        "--n0",
        "6",
        "--trials",
        "200",
    ]);
    assert_eq!(code(&r), EXIT_VALIDATION as i32);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let (c, e) = enumerated(dir.path());
    let first = fs::read(&e).unwrap();
    let (m, cal, csv) = (
        dir.path().join("m.json"),
        dir.path().join("cal.json"),
        dir.path().join("sim.csv"),
    );
    let steps: Vec<Vec<&str>> = vec![
        vec![
            "enumerate",
            "--code",
            s(&c),
            "--max-weight",
            "3",
            "--out",
            s(&e),
        ],
        vec![
            "calibrate-n0",
            "--from",
            s(&e),
            "--code",
            s(&c),
            "--eps",
            "0.03,0.05",
            "--seed",
            "2",
            "--out",
            s(&cal),
        ],
        vec![
            "estimate-m",
            "--code",
            s(&c),
            "--calibration",
            s(&cal),
            "--trials",
            "500",
            "--seed",
            "3",
            "--out",
            s(&m),
        ],
        vec![
            "simulate",
            "--code",
            s(&c),
            "--eps",
            "0.05",
            "--seed",
            "4",
            "--out",
            s(&csv),
        ],
    ];
    let mut snapshots = Vec::new();
    for step in &steps {
        ok(step);
    }
    for p in [&e, &cal, &m, &csv] {
        snapshots.push(fs::read(p).unwrap());
    }
    for step in &steps {
        ok(step);
    }
    for (p, before) in [&e, &cal, &m, &csv].iter().zip(&snapshots) {
        assert_eq!(&fs::read(p).unwrap(), before, "{}", p.display());
    }
    assert_eq!(snapshots[0], first);
}
