use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn run(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dirac-front"))
        .args(args)
        .env("DIRAC_FRONT_OUTPUT", root)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn only_run_dir(root: &Path) -> PathBuf {
    let dirs: Vec<PathBuf> = fs::read_dir(root).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs.into_iter().next().unwrap()
}

fn data_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(String::from)
        .collect()
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(tmp.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(run(tmp.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(tmp.path(), &["pde", "--no-such-flag", "1"]).status.code(), Some(2));
    assert_eq!(run(tmp.path(), &["pde", "--eps", "abc"]).status.code(), Some(2));
    let bad = tmp.path().join("bad.ini");
    fs::write(&bad, "[model]\nwidth = 1\n").unwrap();
    assert_eq!(
        run(tmp.path(), &["validate", "--config", bad.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    // a numerical failure names the module and leaves no run directory
    let out = run(tmp.path(), &["pde", "--eps", "0.1", "--mu", "-1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("core_model"));
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 1); // bad.ini only
}

#[test]
fn validate_on_the_step_preset() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), &["validate", "--preset", "step", "--eps", "0.1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = only_run_dir(tmp.path());
    assert!(!data_lines(&dir.join("validation.csv")).is_empty());
    let manifest = fs::read_to_string(dir.join("manifest.ini")).unwrap();
    for f in ["validation.csv", "initial.csv"] {
        assert!(manifest.contains(f), "{manifest}");
    }
    assert!(manifest.contains("config_hash="));
}

#[test]
fn every_written_file_is_in_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        tmp.path(),
        &[
            "pde",
            "--eps",
            "0.1",
            "--t-end",
            "0.5",
            "--snapshots",
            "5",
            "--x-min",
            "-3",
            "--x-max",
            "3",
        ],
    );
    assert!(out.status.success());
    let dir = only_run_dir(tmp.path());
    let manifest = ini::Ini::load_from_file(dir.join("manifest.ini")).unwrap();
    let listed: Vec<String> = manifest
        .section(Some("files"))
        .unwrap()
        .iter()
        .map(|(k, _)| k.to_string())
        .collect();
    let mut on_disk = Vec::new();
    let mut stack = vec![dir.clone()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "manifest.ini" {
                on_disk.push(p.strip_prefix(&dir).unwrap().display().to_string());
            }
        }
    }
    for f in &on_disk {
        assert!(listed.contains(f), "{f} missing from {listed:?}");
    }
}

#[test]
fn sweep_writes_one_row_per_eps() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        tmp.path(),
        &[
            "sweep",
            "--eps-list",
            "0.1,0.05,0.025",
            "--x-min",
            "-4",
            "--x-max",
            "6",
            "--t-end",
            "1",
            "--snapshots",
            "20",
            "--analyses",
            "jump_times,lp",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = only_run_dir(tmp.path());
    assert_eq!(data_lines(&dir.join("convergence.csv")).len(), 3);
    assert!(!dir.join("estimates.csv").exists());
}

#[test]
fn wave_reports_the_minimal_speed_and_a_close_empirical_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        tmp.path(),
        &[
            "wave",
            "--mu",
            "1",
            "--v-plus",
            "2",
            "--wave-t-end",
            "4",
            "--wave-window",
            "2,4",
            "--wave-cells-per-eps",
            "4",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = only_run_dir(tmp.path());
    let value = |key: &str| -> f64 {
        data_lines(&dir.join("speed.csv"))
            .iter()
            .find_map(|l| l.strip_prefix(&format!("{key},")).map(|v| v.parse().unwrap()))
            .unwrap()
    };
    assert_eq!(value("minimal_speed"), 2.0);
    assert!((value("empirical_speed") - 2.0).abs() / 2.0 < 0.1);
    for f in ["profile.csv", "speed_scan.csv", "front.csv"] {
        assert!(dir.join(f).exists());
    }
}

#[test]
fn identical_configs_give_identical_files() {
    let cfg_dir = tempfile::tempdir().unwrap();
    let cfg = cfg_dir.path().join("run.ini");
    fs::write(
        &cfg,
        "[model]\neps = 0.1\n[domain]\nx_min = -3\nx_max = 5\nt_end = 1\nsnapshots = 10\n[initial]\npreset = step\n",
    )
    .unwrap();
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let tmp = tempfile::tempdir().unwrap();
        assert!(run(tmp.path(), &["ode", "--config", cfg.to_str().unwrap()])
            .status
            .success());
        let dir = only_run_dir(tmp.path());
        let manifest = ini::Ini::load_from_file(dir.join("manifest.ini")).unwrap();
        let files: Vec<(String, String)> = manifest
            .section(Some("files"))
            .unwrap()
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        let hash = manifest.get_from(Some("run"), "config_hash").unwrap().to_string();
        outputs.push((files, hash));
    }
    assert!(!outputs[0].0.is_empty());
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn help_lists_every_flag_with_its_default() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), &["wave", "--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    for flag in [
        "--v-plus <VALUE>",
        "--eikonal-convention",
        "--bvp-cells-per-eps",
        "--wave-window",
    ] {
        assert!(text.contains(flag), "{flag} in {text}");
    }
    let flags = text
        .lines()
        .filter(|l| l.trim_start().starts_with("--") && l.contains("<VALUE>"))
        .count();
    let defaults = text.matches("[default: ").count();
    assert!(flags > 10 && flags == defaults, "{flags} flags, {defaults} defaults");
}
