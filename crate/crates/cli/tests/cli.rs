use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rosgas_cli::commands::AblationRow;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rosgas"))
}

/// A small, fast configuration writing into `out`.
fn write_config(dir: &Path, out: &Path, variant: &str) -> PathBuf {
    let cfg = serde_json::json!({
        "synth": { "n_users": 300, "labeled_fraction": 0.2, "seed": 4 },
        "train": {
            "variant": variant,
            "hidden": 8,
            "classifier_hidden": 4,
            "batch_size": 8,
            "episodes": 2,
            "steps_per_episode": 5,
            "epochs": 3
        },
        "split": { "folds": 5 },
        "ablate": { "variants": ["FULL", "BASELINE"], "seeds": [0], "cross_validate": false },
        "probe": { "targets": 4, "runs": 2 },
        "paths": { "graph_in": dir.join("graph.jsonl"), "out_dir": out }
    });
    let path = dir.join(format!("{variant}.json"));
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn run(cmd: &str, config: &Path, extra: &[&str]) -> Output {
    bin()
        .arg(cmd)
        .arg("--config")
        .arg(config)
        .args(extra)
        .output()
        .unwrap()
}

fn generated(dir: &Path) -> PathBuf {
    let cfg = write_config(dir, dir, "FULL");
    let out = run("gen", &cfg, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    cfg
}

#[test]
fn gen_writes_graph_and_truth_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), dir.path(), "FULL");
    let out = run("gen", &cfg, &[]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("labeled 60"), "{stdout}");
    let graph = fs::read(dir.path().join("graph.jsonl")).unwrap();
    let truth = fs::read(dir.path().join("truth.json")).unwrap();
    let truth_json: serde_json::Value = serde_json::from_slice(&truth).unwrap();
    assert_eq!(truth_json.as_array().unwrap().len(), 300);

    let again = run("gen", &cfg, &[]);
    assert!(again.status.success());
    assert_eq!(fs::read(dir.path().join("graph.jsonl")).unwrap(), graph);
    assert_eq!(fs::read(dir.path().join("truth.json")).unwrap(), truth);

    let reseeded = run("gen", &cfg, &["--seed", "5"]);
    assert!(reseeded.status.success());
    assert_ne!(fs::read(dir.path().join("graph.jsonl")).unwrap(), graph);
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{ \"synth\": ").unwrap();
    let out = run("gen", &path, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    fs::write(&path, "{ \"synth\": { \"n_userz\": 10 } }").unwrap();
    assert_eq!(run("gen", &path, &[]).status.code(), Some(2));

    let good = write_config(dir.path(), dir.path(), "FULL");
    assert_eq!(run("gen", &good, &["--set", "train.bogus=1"]).status.code(), Some(2));
}

#[test]
fn train_is_reproducible_and_gated() {
    let dir = tempfile::tempdir().unwrap();
    generated(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let cfg = write_config(dir.path(), out, "FULL");
        let o = run("train", &cfg, &[]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["summary.json", "metrics.jsonl", "gnn.ckpt", "agent1.ckpt", "agent2.ckpt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let timing: serde_json::Value =
        serde_json::from_slice(&fs::read(a.join("timing.json")).unwrap()).unwrap();
    assert!(timing["runtime_seconds"].as_f64().unwrap() > 0.0);

    let base = dir.path().join("base");
    let cfg = write_config(dir.path(), &base, "BASELINE");
    assert!(run("train", &cfg, &[]).status.success());
    assert!(base.join("gnn.ckpt").exists());
    assert!(!base.join("agent1.ckpt").exists());
    assert!(!base.join("agent2.ckpt").exists());
    let metrics = fs::read_to_string(base.join("metrics.jsonl")).unwrap();
    assert!(metrics.lines().all(|l| l.contains("\"kind\":\"epoch\"")));

    let k_only = dir.path().join("k");
    let cfg = write_config(dir.path(), &k_only, "K");
    assert!(run("train", &cfg, &[]).status.success());
    assert!(k_only.join("agent1.ckpt").exists());
    assert!(!k_only.join("agent2.ckpt").exists());
}

#[test]
fn infeasible_training_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = generated(dir.path());
    let out = run("train", &cfg, &["--set", "train.agent.k_max=1"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn missing_graph_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), dir.path(), "FULL");
    assert_eq!(run("train", &cfg, &[]).status.code(), Some(2));
}

#[test]
fn cross_validation_writes_every_fold() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = generated(dir.path());
    let out = run("train", &cfg, &["--cross-validate", "--set", "train.variant=BASELINE"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in 0..5 {
        assert!(dir.path().join(format!("fold_{f:02}/summary.json")).exists());
    }
    let agg: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("aggregate.json")).unwrap()).unwrap();
    assert_eq!(agg["test_accuracy"].as_array().unwrap().len(), 5);
    assert!(agg["std"].as_f64().unwrap() >= 0.0);
}

#[test]
fn ablate_table_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = generated(dir.path());
    let out = bin()
        .env("ROSGAS_THREADS", "2")
        .args(["ablate", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(dir.path().join("ablation.csv")).unwrap();
    let rows: Vec<AblationRow> = reader.deserialize().collect::<Result<_, _>>().unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows.iter().filter(|r| r.seed == "mean").count(), 2);
    assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.test_accuracy)));
}

#[test]
fn bad_thread_count_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = generated(dir.path());
    let out = bin()
        .env("ROSGAS_THREADS", "zero")
        .args(["ablate", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn probe_table_has_expected_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = generated(dir.path());
    let out = run("probe", &cfg, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(dir.path().join("probe.csv")).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        ["target_id", "ratio_l1", "ratio_l2", "ratio_l3", "agent_choice", "match"]
    );
    let records: Vec<csv::StringRecord> = reader.records().collect::<Result<_, _>>().unwrap();
    assert_eq!(records.len(), 4);
    for r in &records {
        for i in 1..=3 {
            let v: f64 = r[i].parse().unwrap();
            assert!([0.0, 0.5, 1.0].contains(&v));
        }
    }
}

#[test]
fn export_embeddings_and_reject_bad_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = generated(dir.path());
    assert!(run("train", &cfg, &[]).status.success());
    let out = run("export-emb", &cfg, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("homogeneity"));
    let text = fs::read_to_string(dir.path().join("embeddings.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 2 + 8);
    assert_eq!(header[..3], ["target_id", "label", "z_1"]);
    assert_eq!(lines.count(), 60);
    let first = fs::read(dir.path().join("embeddings.csv")).unwrap();
    assert!(run("export-emb", &cfg, &[]).status.success());
    assert_eq!(fs::read(dir.path().join("embeddings.csv")).unwrap(), first);

    let ckpt = dir.path().join("gnn.ckpt");
    let mut value: serde_json::Value = serde_json::from_slice(&fs::read(&ckpt).unwrap()).unwrap();
    value["params"]["residual.weight"]["shape"] = serde_json::json!([3, 3]);
    fs::write(&ckpt, serde_json::to_string(&value).unwrap()).unwrap();
    assert_eq!(run("export-emb", &cfg, &[]).status.code(), Some(4));
}
