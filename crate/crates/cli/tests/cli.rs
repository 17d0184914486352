use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_schwinger-grec"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            out.extend(csv_files(&p));
        } else if p.extension().is_some_and(|e| e == "csv") {
            out.push(p);
        }
    }
    out.sort();
    out
}

#[test]
fn small_all_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        let start = Instant::now();
        let out = run(&["all", "--preset", "small", "--out-dir", dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(start.elapsed() < Duration::from_secs(60));
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(text.contains("best grec"));
    }
    let fa = csv_files(a.path());
    let fb = csv_files(b.path());
    assert!(fa.len() >= 4);
    assert_eq!(fa.len(), fb.len());
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(x.strip_prefix(a.path()).unwrap(), y.strip_prefix(b.path()).unwrap());
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
    }
}

#[test]
fn report_reuses_energy_lines() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let first = run(&["all", "--preset", "small", "--out-dir", d]);
    assert!(first.status.success());
    let metrics = csv_files(dir.path()).into_iter().find(|p| p.ends_with("metrics.csv")).unwrap();
    let before = fs::read(&metrics).unwrap();
    fs::remove_file(&metrics).unwrap();
    let out = bin()
        .args(["report", "--preset", "small", "--out-dir", d])
        .env("RUST_LOG", "info")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("reusing"));
    assert_eq!(fs::read(&metrics).unwrap(), before);
}

#[test]
fn invalid_n_train_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["grec", "--preset", "small", "--n-train", "1", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_train"));
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "preset = \"small\"\nbogus = 3\n").unwrap();
    let out = run(&["spectrum", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn config_file_is_applied() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, format!("preset = \"small\"\nseed = 7\nout_dir = {:?}\n", dir.path().to_str().unwrap())).unwrap();
    let out = run(&["evolve", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("N4_mg0_seed7").join("energy_lines.csv").exists());
}

#[test]
fn spectrum_mg10_reports_crossing() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["spectrum", "--mg", "10", "--out-dir", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let l0: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("crossing at l0 = "))
        .expect("a crossing line")
        .trim()
        .parse()
        .unwrap();
    assert!((l0 - 1.833466).abs() < 2e-4, "{l0}");
}
