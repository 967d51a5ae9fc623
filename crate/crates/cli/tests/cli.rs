use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn aimguard(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aimguard"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

const TINY: &str = r#"{
  "inspector": {
    "detector_training": {"epochs": 2, "samples_per_epoch": 1500, "max_val_samples": 300},
    "aggregator_training": {"epochs": 4, "batch_size": 32},
    "forest": {"n_trees": 8},
    "background_size": 6
  }
}"#;

#[test]
fn usage_errors_exit_2_and_help_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let help = aimguard(&["--help"], dir.path());
    assert_eq!(help.status.code(), Some(0));
    let text = String::from_utf8(help.stdout).unwrap();
    for sub in ["simulate", "extract", "train", "predict", "explain", "eval", "render", "serve"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
    assert_eq!(aimguard(&["simulate", "--out", "x", "--bogus"], dir.path()).status.code(), Some(2));
    assert_eq!(aimguard(&["launch"], dir.path()).status.code(), Some(2));
    assert_eq!(aimguard(&["train", "--mode", "z", "--train", "a", "--val", "b", "--out", "c"], dir.path()).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1_with_stage_context() {
    let dir = tempfile::tempdir().unwrap();
    let out = aimguard(&["predict", "--model", "missing.json", "--ticks", "t.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("loading model missing.json"));
    let out = aimguard(&["simulate", "--out", "d", "--profile-mix", "aimbot=x"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = aimguard(&["simulate", "--out", "d", "--cheater-frac", "1.5"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cheater_frac"));
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("sim.json"), r#"{"matches": 2, "players": 4, "seed": 9}"#).unwrap();
    ok(aimguard(
        &["simulate", "--matches", "7", "--players", "3", "--out", "d", "--config", "sim.json"],
        dir.path(),
    ));
    let manifest = read_json(&dir.path().join("d/manifest.json"));
    assert_eq!(manifest["config"]["matches"], 2);
    assert_eq!(manifest["config"]["players"], 4);
    assert_eq!(manifest["notes"]["players"], 8);

    std::fs::write(dir.path().join("bad.json"), r#"{"matchez": 2}"#).unwrap();
    let out = aimguard(&["simulate", "--out", "e", "--config", "bad.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("matchez"));
    assert!(!dir.path().join("e").exists(), "config is validated before any work");
}

#[test]
fn manifests_record_inputs_outputs_and_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    ok(aimguard(&["simulate", "--matches", "2", "--out", "a", "--seed", "3"], dir.path()));
    ok(aimguard(&["simulate", "--matches", "2", "--out", "b", "--seed", "3"], dir.path()));
    let (a, b) = (read_json(&dir.path().join("a/manifest.json")), read_json(&dir.path().join("b/manifest.json")));
    assert_eq!(a["command"], "simulate");
    assert_eq!(a["version"], env!("CARGO_PKG_VERSION"));
    assert!(a["wall_seconds"].as_f64().unwrap() >= 0.0);
    let hashes = |m: &Value| -> Vec<String> {
        m["outputs"].as_array().unwrap().iter().map(|o| o["sha256"].as_str().unwrap().to_string()).collect()
    };
    assert_eq!(hashes(&a).len(), 3);
    assert_eq!(hashes(&a), hashes(&b), "same seed, same dataset bytes");
    assert_ne!(a["config_sha256"], b["config_sha256"], "output paths are part of the config");

    ok(aimguard(&["extract", "--ticks", "a", "--out", "feat"], dir.path()));
    let m = read_json(&dir.path().join("feat/manifest.json"));
    assert_eq!(m["inputs"][0]["path"], "a/ticks.csv");
    assert_eq!(m["inputs"][0]["sha256"], a["outputs"][0]["sha256"]);
    let cleansing = read_json(&dir.path().join("feat/cleansing.json"));
    let total = &cleansing["total"];
    assert_eq!(total["accepted"].as_u64().unwrap() as usize, m["notes"]["windows"].as_u64().unwrap() as usize);
    let features = std::fs::read_to_string(dir.path().join("feat/features.csv")).unwrap();
    assert_eq!(features.lines().count(), 1 + 96 * total["accepted"].as_u64().unwrap() as usize);
}

#[test]
fn pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("tiny.json"), TINY).unwrap();
    for (name, first, n) in [("train", "0", "8"), ("val", "8", "3"), ("test", "11", "2")] {
        ok(aimguard(
            &["simulate", "--matches", n, "--first-match", first, "--cheater-frac", "0.3", "--seed", "5", "--out", name],
            d,
        ));
    }
    ok(aimguard(
        &["train", "--train", "train", "--val", "val", "--test", "test", "--config", "tiny.json", "--out", "model", "--w", "4"],
        d,
    ));
    let bundle = read_json(&d.join("model/model.json"));
    assert_eq!(bundle["window"]["w"], 4);
    assert_eq!(bundle["history"]["detector"]["epochs"].as_array().unwrap().len(), 2);
    let report = read_json(&d.join("model/test_report.json"));
    assert_eq!(report["players"], 20);

    ok(aimguard(&["predict", "--model", "model/model.json", "--ticks", "test", "--out", "out/verdicts.jsonl"], d));
    let verdicts = std::fs::read_to_string(d.join("out/verdicts.jsonl")).unwrap();
    assert_eq!(verdicts.lines().count(), 20);
    assert_eq!(verdicts, std::fs::read_to_string(d.join("model/test_verdicts.jsonl")).unwrap());
    let first: Value = serde_json::from_str(verdicts.lines().next().unwrap()).unwrap();
    for key in ["match_id", "player_id", "verdict", "probability", "elimination_scores", "threshold"] {
        assert!(first.get(key).is_some(), "verdict line lacks {key}");
    }
    assert!(d.join("out/verdicts.jsonl.manifest.json").is_file());

    ok(aimguard(
        &[
            "explain", "--model", "model/model.json", "--ticks", "test", "--match", "m00011", "--player", "p00",
            "--samples", "20", "--out", "exp",
        ],
        d,
    ));
    let docs: Vec<_> = std::fs::read_dir(d.join("exp"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .collect();
    assert!(!docs.is_empty());
    let doc = read_json(&docs[0]);
    assert_eq!(doc["ticks"].as_array().unwrap().len(), 96);
    assert_eq!(doc["player_id"], "p00");
    let shapley = doc["match"]["shapley"].as_object().unwrap();
    let total: f64 = shapley.values().map(|v| v.as_f64().unwrap()).sum();
    let (pred, base) = (doc["match"]["prediction"].as_f64().unwrap(), doc["match"]["baseline"].as_f64().unwrap());
    assert!((total - (pred - base)).abs() < 1e-9);
    let stem = docs[0].file_stem().unwrap().to_str().unwrap().to_string();
    assert_eq!(stem, doc["elimination_id"].as_str().unwrap().replace('/', "_"));

    ok(aimguard(&["eval", "--verdicts", "out/verdicts.jsonl", "--labels", "test", "--ticks", "test", "--compare", "model/test_verdicts.jsonl", "--out", "report.json"], d));
    let r = read_json(&d.join("report.json"));
    assert_eq!(r["players"], 20);
    assert_eq!(r["metrics"]["weighted"]["accuracy"], r["metrics"]["weighted"]["recall"]);
    assert_eq!(r["significance"]["fisher_p"], 1.0);
    assert!(r["baselines"]["th_acc_a"]["f1"].is_number());

    ok(aimguard(&["render", "--explanation", docs[0].to_str().unwrap(), "--feature", "v_x", "--out", "traj.svg"], d));
    let svg = std::fs::read_to_string(d.join("traj.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<line").count(), 95);
    let bad = aimguard(&["render", "--explanation", docs[0].to_str().unwrap(), "--feature", "speed", "--out", "x.svg"], d);
    assert_eq!(bad.status.code(), Some(1));
}
