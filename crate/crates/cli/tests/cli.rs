use std::fs;
use std::process::Command;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_pruefer-lab"));
    c.env_remove("PRUEFER_LAB_WORKERS");
    c
}

#[test]
fn constants_without_config() {
    let out = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["constants", "--check", "--out"])
        .arg(out.path())
        .status()
        .unwrap();
    assert!(status.success());
    let json = fs::read_to_string(out.path().join("constants.json")).unwrap();
    assert!(json.contains("\"C_E\""));
}

#[test]
fn flags_override_config_and_env_sets_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("spectrum.toml");
    fs::write(
        &cfg,
        "kind = \"spectrum\"\n[decay]\nalpha = 0.9\namplitude = 0.0\n[numerics]\nh = 0.05\n\
         [experiment]\ne0 = 1.0\nlength = 50.0\n[run]\nreplicas = 2\n",
    )
    .unwrap();
    let out = dir.path().join("run");
    let status = bin()
        .env("PRUEFER_LAB_WORKERS", "3")
        .args(["spectrum", "--seed", "9", "--replicas", "4", "--check", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seeds"].as_array().unwrap().len(), 4);
    assert_eq!(manifest["config"]["run"]["master_seed"], 9);
    assert_eq!(manifest["workers"], 3);

    let report = dir.path().join("report");
    let status = bin()
        .args(["report", "--check", "--out"])
        .arg(&report)
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(report.join("report.csv").exists());
    assert!(report.join("ecdf_gap.csv").exists());
}

#[test]
fn invalid_config_lists_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(
        &cfg,
        "kind = \"spectrum\"\n[decay]\nalpha = -1.0\n[experiment]\ne0 = 1.0\nlength = 10.0\n[run]\nreplicas = 0\n",
    )
    .unwrap();
    let out = bin().arg("spectrum").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("decay.alpha") && err.contains("run.replicas"), "{err}");
}

#[test]
fn kind_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "kind = \"constants\"\n").unwrap();
    let out = bin().arg("clock").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failed_check_sets_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("psi.toml");
    fs::write(
        &cfg,
        "kind = \"psi_sde\"\n[numerics]\npsi_steps = 3\npsi_max_refinements = 0\nt0 = 0.1\n\
         [experiment]\ne0 = 0.05\ncs = [-3.0, -1.0, 0.0, 0.01, 0.02, 1.0, 3.0]\n[run]\nreplicas = 40\n",
    )
    .unwrap();
    let out = dir.path().join("run");
    let status = bin()
        .arg("psi-sde")
        .arg("--check")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    assert!(out.join("manifest.json").exists());
}
