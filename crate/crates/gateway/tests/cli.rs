use std::path::Path;
use std::process::Command;

use latentforge_gateway::cli::{dispatch, EXIT_OK, EXIT_PIPELINE, EXIT_USAGE};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_latentforge"))
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("config.json");
    let cfg = serde_json::json!({
        "identities": 2, "samples-per-identity": 8, "epochs": 3, "batch-size": 4, "steps": 3,
    });
    std::fs::write(&path, cfg.to_string()).unwrap();
    path
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_USAGE as i32));
    assert!(!out.stderr.is_empty());
    assert_eq!(dispatch(["latentforge", "sweep", "--steps", "many"]), EXIT_USAGE);
    assert_eq!(dispatch(["latentforge", "--help"]), EXIT_OK);
}

#[test]
fn missing_artifacts_are_a_pipeline_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["pca", "--workspace"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_PIPELINE as i32));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("manifest.json"), "{stderr}");
}

#[test]
fn gen_accepts_short_sample_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["gen", "--identities", "2", "--samples", "3", "--side", "64", "--seed", "7", "--workspace"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let pgms = std::fs::read_dir(dir.path().join("dataset"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "pgm"))
        .count();
    assert_eq!(pgms, 6);
    assert!(dir.path().join("dataset/manifest.json").exists());
}

#[test]
fn bad_config_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"epochz": 3}"#).unwrap();
    let ws = dir.path().join("ws");
    let code =
        dispatch(["latentforge", "gen", "--workspace", ws.to_str().unwrap(), "--config", path.to_str().unwrap()]);
    assert_eq!(code, EXIT_PIPELINE);
}

#[test]
fn small_pipeline_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path().join("ws");
    let cfg = small_config(dir.path());
    let run = |args: &[&str]| {
        let out = bin()
            .args(args)
            .arg("--workspace")
            .arg(&ws)
            .arg("--config")
            .arg(&cfg)
            .args(["--seed", "3"])
            .output()
            .unwrap();
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    };
    let gen: serde_json::Value = serde_json::from_str(&run(&["gen"])).unwrap();
    assert_eq!(gen["samples"], 16);
    run(&["train", "--epochs", "2"]);
    let training: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.join("models/training.json")).unwrap()).unwrap();
    assert_eq!(training["loss_history"].as_array().unwrap().len(), 2, "flag overrides config");
    run(&["pca"]);
    run(&["enroll"]);

    let sweep: serde_json::Value = serde_json::from_str(&run(&["sweep", "--indices", "0,1"])).unwrap();
    assert_eq!(sweep["summary"]["candidates"], 9);
    assert_eq!(sweep["consistent"], true);
    let transition: serde_json::Value = serde_json::from_str(&run(&["transition"])).unwrap();
    assert_eq!(transition["summary"]["candidates"], 3);
    let swaps: serde_json::Value =
        serde_json::from_str(&run(&["swaps", "--sample", "id00-000", "--reference-label", "id01"])).unwrap();
    assert_eq!(swaps["summary"]["candidates"], 64);

    let all: serde_json::Value = serde_json::from_str(&run(&["report"])).unwrap();
    assert_eq!(all.as_array().unwrap().len(), 3);
    let one: serde_json::Value = serde_json::from_str(&run(&["report", sweep["run_id"].as_str().unwrap()])).unwrap();
    assert_eq!(one[0]["run_id"], sweep["run_id"]);

    let explicit: serde_json::Value =
        serde_json::from_str(&run(&["sweep", "--indices", "3", "--ranges=-0.5:0.5", "--steps", "2"])).unwrap();
    assert_eq!(explicit["summary"]["candidates"], 2);
}
