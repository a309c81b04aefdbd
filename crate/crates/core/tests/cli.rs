use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("config.toml");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_levy-coupling"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .env("LEVYHAM_WORKERS", "1")
        .output()
        .unwrap()
}

fn out_arg(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

#[test]
fn unknown_key_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), "[sim]\nbogus = 1\n", &["constants", "--out", &out_arg(&dir, "o")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn zero_lipschitz_constant_is_flagged_degenerate() {
    let dir = TempDir::new().unwrap();
    let o = out_arg(&dir, "o");
    let out = run(dir.path(), "[constants]\nlambda_star_r0 = 0.0\n", &["constants", "--out", &o]);
    assert_eq!(out.status.code(), Some(2));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(Path::new(&o).join("constants.json")).unwrap()).unwrap();
    assert_eq!(report["degenerate"], true);
}

#[test]
fn broken_certificate_fails_b1_with_negative_slack() {
    let dir = TempDir::new().unwrap();
    let o = out_arg(&dir, "o");
    let cfg = "[certificate]\nlambda1 = 50.0\nlambda2 = 0.0\nlambda3 = 0.0\nlambda4 = 0.0\nlambda5 = 0.0\n";
    let out = run(dir.path(), cfg, &["verify", "--which", "B1", "--out", &o]);
    assert_eq!(out.status.code(), Some(2));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("FAIL B1 radial inequality"), "{stdout}");
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(Path::new(&o).join("verify.json")).unwrap()).unwrap();
    let slack = report[0]["worst_slack"].as_f64().unwrap();
    assert!(slack < 0.0, "{report}");
}

#[test]
fn identities_pass_on_the_diagonal() {
    let dir = TempDir::new().unwrap();
    let cfg = "[checks]\ndiagonal = true\nstates = 5\n";
    let out = run(dir.path(), cfg, &["verify", "--which", "operator-identities", "--out", &out_arg(&dir, "o")]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn zero_horizon_has_no_decay_window() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), "[sim]\nhorizon = 0.0\nreplicas = 4\n", &["rate", "--out", &out_arg(&dir, "o")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn same_seed_gives_identical_trajectories() {
    let dir = TempDir::new().unwrap();
    let cfg = "[sim]\nhorizon = 1.0\nreplicas = 3\nh = 0.05\n";
    let (a, b) = (out_arg(&dir, "a"), out_arg(&dir, "b"));
    for o in [&a, &b] {
        let out = run(dir.path(), cfg, &["couple", "--seed", "11", "--out", o]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for i in 0..3 {
        let name = format!("trajectories/replica_{i:05}.csv");
        let (x, y) = (fs::read(Path::new(&a).join(&name)).unwrap(), fs::read(Path::new(&b).join(&name)).unwrap());
        assert!(!x.is_empty());
        assert_eq!(x, y, "{name}");
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(Path::new(&a).join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 11);
    assert_eq!(manifest["exit_code"], 0);
}
