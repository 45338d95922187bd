//! End-to-end runs of the `critnls` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const WELL: &str = include_str!("../../../configs/well.toml");

fn critnls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_critnls")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

/// The stock well config, edited by plain line substitution, written to `dir`.
fn config(dir: &Path, edits: &[(&str, &str)]) -> PathBuf {
    let mut text = WELL.replace("n = 4096", "n = 2048");
    for (from, to) in edits {
        assert!(text.contains(from), "{from} not in the config");
        text = text.replace(from, to);
    }
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn report(out: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn eig_reports_a_negative_eigenvalue() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), &[]);
    let out = tmp.path().join("eig");
    let run = critnls(&["eig", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let r = report(&out);
    assert_eq!(r["subcommand"], "eig");
    assert!(r["certificates"]["eigenvalue"].as_f64().unwrap() < 0.0, "{r}");
    assert!(out.join("psi.csv").exists() && out.join("config.toml").exists());
}

#[test]
fn verify_replays_and_detects_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), &[]);
    let out = tmp.path().join("min");
    let o = out.to_str().unwrap();
    assert_eq!(code(&critnls(&["minimize", "--config", cfg.to_str().unwrap(), "--out", o])), 0);
    let replay = critnls(&["verify", "--out", o]);
    assert_eq!(code(&replay), 0, "{}", String::from_utf8_lossy(&replay.stdout));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("verify.json")).unwrap()).unwrap();
    assert_eq!(v["identical"], true);

    // Nudge one value of the dumped minimizer.
    let dump = out.join("u.csv");
    let text = fs::read_to_string(&dump).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
    let (r, value) = lines[100].split_once(',').unwrap();
    let nudged: f64 = value.parse::<f64>().unwrap() * (1.0 + 1e-6);
    lines[100] = format!("{r},{nudged:.16e}");
    fs::write(&dump, lines.join("\n") + "\n").unwrap();
    assert_eq!(code(&critnls(&["verify", "--out", o])), 4);
}

#[test]
fn same_seed_gives_identical_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), &[]);
    let mut bytes = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        let run = critnls(&["saddle", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "3", "--threads", "2"]);
        assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
        bytes.push(fs::read(out.join("report.json")).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn saddle_outside_the_smallness_regime_fails_its_certificate() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), &[("mu = 0.05", "mu = 0.2")]);
    let out = tmp.path().join("big");
    assert_eq!(code(&critnls(&["saddle", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])), 4);
    assert_eq!(report(&out)["passes"], false);
}

#[test]
fn configuration_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    let o = out.to_str().unwrap();
    assert_eq!(code(&critnls(&["eig", "--config", "/nonexistent.toml", "--out", o])), 2);
    for edit in [("dim = 3", "dim = 2"), ("n = 2048", "n = 3"), ("family = \"well\"", "family = \"harmonic\""), ("delta = 0.1", "delta = 0.1\nbogus = 1")] {
        let cfg = config(tmp.path(), &[edit]);
        assert_eq!(code(&critnls(&["eig", "--config", cfg.to_str().unwrap(), "--out", o])), 2, "{edit:?}");
    }
    assert_eq!(code(&critnls(&["verify", "--out", tmp.path().join("missing").to_str().unwrap()])), 2);
}

#[test]
fn tabulated_potential_resolves_relative_to_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let sub = tmp.path().join("cfg");
    fs::create_dir(&sub).unwrap();
    let mut table = String::from("r,value\n");
    for k in 0..=400 {
        let r = 0.05 * k as f64;
        table.push_str(&format!("{r},{}\n", -10.0 / (1.0 + r * r).powi(2)));
    }
    fs::write(sub.join("v.csv"), table).unwrap();
    let cfg = config(&sub, &[("family = \"well\"\ndepth = 7.0\nradius = 1.0", "family = \"table\"\ncsv = \"v.csv\"")]);
    let out = tmp.path().join("tab");
    let run = critnls(&["eig", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    assert!(report(&out)["certificates"]["eigenvalue"].as_f64().unwrap() < 0.0);
}
