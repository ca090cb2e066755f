//! End-to-end tests of the binary: exit codes, file formats, determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hypoprop"))
}

fn write_system(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

fn kolmogorov(dir: &Path) -> String {
    write_system(
        dir,
        "kolmogorov.json",
        r#"{"m":2,"Q":[[1.0,0.0],[0.0,0.0]],"B":[[0.0,0.0],[1.0,0.0]]}"#,
    )
}

fn free1(dir: &Path) -> String {
    write_system(dir, "free1.json", r#"{"m":1,"Q":[[1.0]],"B":[[0.0]]}"#)
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn check_reports_rank_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let kol = kolmogorov(dir.path());
    let out = bin().args(["check", "--system", &kol]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["kalman_rank"], 2);
    assert_eq!(report["hypoelliptic"], true);

    let degen = write_system(
        dir.path(),
        "degen.json",
        r#"{"m":2,"Q":[[1.0,0.0],[0.0,0.0]],"B":[[0.0,0.0],[0.0,0.0]]}"#,
    );
    let out = bin().args(["check", "--system", &degen]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["kalman_rank"], 1);

    let out = bin()
        .args(["check", "--system", "/nonexistent/system.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    let bad = write_system(dir.path(), "bad.json", "{not json");
    let out = bin().args(["check", "--system", &bad]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn covariance_matches_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    let kol = kolmogorov(dir.path());
    let out = bin()
        .args(["covariance", "--system", &kol, "--t-range", "0.5:2.0:4"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,det,lambda_min,q_1_1,q_1_2,q_2_1,q_2_2");
    for line in lines {
        let cols: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        let (t, det) = (cols[0], cols[1]);
        assert!((det / (t.powi(4) / 12.0) - 1.0).abs() <= 1e-9, "det at t = {t}");
    }

    // a single-point range emits exactly one data row
    let out = bin()
        .args(["covariance", "--system", &kol, "--t-range", "1:1:1"])
        .output()
        .unwrap();
    assert_eq!(stdout(&out).lines().count(), 2);
}

#[test]
fn covariance_output_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let kol = kolmogorov(dir.path());
    let run = || {
        stdout(
            &bin()
                .args(["covariance", "--system", &kol, "--t-range", "0.1:10:25"])
                .output()
                .unwrap(),
        )
    };
    assert_eq!(run(), run());
}

#[test]
fn propagate_exact_echoes_input_at_t_zero() {
    let dir = tempfile::tempdir().unwrap();
    let free = free1(dir.path());
    let out = bin()
        .args([
            "propagate",
            "--system",
            &free,
            "--t",
            "0",
            "--backend",
            "exact",
            "--grid-l",
            "8",
            "--grid-n",
            "32",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x1,re,im");
    for line in lines {
        let cols: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        let expected = (-cols[0] * cols[0]).exp();
        assert!((cols[1] - expected).abs() <= 1e-14);
        assert_eq!(cols[2], 0.0);
    }
}

#[test]
fn propagate_grid_tracks_exact_backend() {
    let dir = tempfile::tempdir().unwrap();
    let free = free1(dir.path());
    let args_common = [
        "propagate",
        "--system",
        &free,
        "--t",
        "0.25",
        "--grid-l",
        "10",
        "--grid-n",
        "128",
    ];
    let exact = bin()
        .args(args_common)
        .args(["--backend", "exact"])
        .output()
        .unwrap();
    let grid = bin()
        .args(args_common)
        .args(["--backend", "grid", "--no-guard", "--margin", "1"])
        .output()
        .unwrap();
    assert_eq!(grid.status.code(), Some(0));
    let parse = |o: &Output| -> Vec<(f64, f64)> {
        stdout(o)
            .lines()
            .skip(1)
            .map(|l| {
                let c: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
                (c[1], c[2])
            })
            .collect()
    };
    let (e, g) = (parse(&exact), parse(&grid));
    assert_eq!(e.len(), g.len());
    let mut num = 0.0;
    let mut den = 0.0;
    for ((er, ei), (gr, gi)) in e.iter().zip(&g) {
        num += (er - gr).powi(2) + (ei - gi).powi(2);
        den += er.powi(2) + ei.powi(2);
    }
    assert!((num / den).sqrt() <= 1e-5, "backends differ by {:.3e}", (num / den).sqrt());
}

#[test]
fn propagate_guard_failure_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let free = free1(dir.path());
    let out = bin()
        .args([
            "propagate",
            "--system",
            &free,
            "--t",
            "4",
            "--backend",
            "grid",
            "--grid-l",
            "8",
            "--grid-n",
            "1024",
            "--margin",
            "1",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("chirp"));
}

#[test]
fn verify_suites_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let kol = kolmogorov(dir.path());
    let out = bin()
        .args(["verify", "--system", &kol, "--suite", "covariance"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).lines().all(|l| l.starts_with("PASS")));

    let out = bin()
        .args(["verify", "--system", &kol, "--suite", "nonsense"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn dispersion_slope_for_kolmogorov_endpoint() {
    let dir = tempfile::tempdir().unwrap();
    let kol = kolmogorov(dir.path());
    let csv_path = dir.path().join("dispersion.csv");
    let out = bin()
        .args([
            "dispersion",
            "--system",
            &kol,
            "--p",
            "1",
            "--t-range",
            "10:1000:12",
            "--out",
            csv_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let slope_line = stdout(&out);
    let slope: f64 = slope_line
        .trim()
        .strip_prefix("slope,")
        .unwrap()
        .parse()
        .unwrap();
    assert!((slope + 2.0).abs() <= 0.05, "slope {slope}");

    let csv = fs::read_to_string(&csv_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,p,p_conj,lhs,bound,ratio");
    for line in lines {
        let ratio: f64 = line.split(',').next_back().unwrap().parse().unwrap();
        assert!(ratio <= 1.0 + 1e-6);
    }
}

#[test]
fn hardy_sweep_stays_below_pi_squared() {
    let dir = tempfile::tempdir().unwrap();
    let free = free1(dir.path());
    let out = bin()
        .args(["hardy", "--system", &free, "--a", "1", "--s-range", "0.2:2:10"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "s,a,b,product,pi_sq_ratio");
    for line in lines {
        let cols: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        assert!(cols[4] < 1.0, "pi_sq_ratio must stay below one");
    }
}
