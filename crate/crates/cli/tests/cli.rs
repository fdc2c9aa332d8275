use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn genrefuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_genrefuse"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn genrefuse")
}

fn ok(args: &[&str]) -> String {
    let out = genrefuse(args);
    assert!(
        out.status.success(),
        "genrefuse {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A model small enough to train in a couple of seconds.
fn tiny_config(dir: &Path, data: &Path) -> std::path::PathBuf {
    let config = json!({
        "seed": 3,
        "data": { "dir": data, "max_tokens": 32 },
        "audio": { "channels": [2, 4] },
        "text": { "embed_dim": 8, "out_dim": 8 },
        "fusion": { "attn_dim": 8, "out_dim": 8, "heads": 2 },
        "graph": { "hidden": 8 },
        "loss": { "proj_dim": 4 },
        "optim": { "lr": 3e-3, "epochs": 2 }
    });
    let path = dir.join("config.json");
    fs::write(&path, config.to_string()).unwrap();
    path
}

fn synth(data: &Path, extra: &[&str]) {
    let mut args = vec![
        "synth", "--tracks", "40", "--genres", "4", "--seed", "9", "--seconds", "0.5", "--mels", "16", "--out",
    ];
    args.push(p(data));
    args.extend_from_slice(extra);
    ok(&args);
}

#[test]
fn synth_train_eval_graph_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, &[]);
    let manifest = fs::read_to_string(data.join("manifest.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), 40);
    let genres: Vec<String> = serde_json::from_str(&fs::read_to_string(data.join("genres.json")).unwrap()).unwrap();
    assert_eq!(genres.len(), 4);

    let config = tiny_config(tmp.path(), &data);
    let run = tmp.path().join("run");
    let stdout = ok(&["train", "--config", p(&config), "--out", p(&run)]);
    assert!(stdout.contains("test accuracy"), "{stdout}");
    for f in ["checkpoint.mgck", "config.json", "epochs.csv", "metrics.json"] {
        assert!(run.join(f).is_file(), "missing {f}");
    }
    let csv = fs::read_to_string(run.join("epochs.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("epoch,lr,train_loss"));
    let metrics: Value = serde_json::from_str(&fs::read_to_string(run.join("metrics.json")).unwrap()).unwrap();
    let test_f = metrics["test"]["f_measure"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&test_f));
    assert_eq!(&fs::read(run.join("checkpoint.mgck")).unwrap()[..4], b"MGCK");

    // Evaluating the saved checkpoint on the test split reproduces the run's score.
    let eval_dir = tmp.path().join("eval");
    ok(&["eval", "--checkpoint", p(&run.join("checkpoint.mgck")), "--out", p(&eval_dir)]);
    let eval: Value = serde_json::from_str(&fs::read_to_string(eval_dir.join("eval.json")).unwrap()).unwrap();
    assert_eq!(eval["f_measure"].as_f64().unwrap(), test_f);
    assert_eq!(eval["threshold"].as_f64().unwrap(), 0.5);

    let graph: Value = serde_json::from_str(&ok(&["graph", "--config", p(&config)])).unwrap();
    assert_eq!(graph["genres"].as_array().unwrap().len(), 4);
    for key in ["A1", "A2", "A", "A_hat"] {
        assert_eq!(graph[key].as_array().unwrap().len(), 4, "{key}");
    }
}

#[test]
fn ablation_flag_removes_the_graph_head() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, &[]);
    let config = tiny_config(tmp.path(), &data);
    let run = tmp.path().join("run");
    ok(&["train", "--config", p(&config), "--ablate", "gcem,scma", "--seed", "5", "--out", p(&run)]);
    let saved: Value = serde_json::from_str(&fs::read_to_string(run.join("config.json")).unwrap()).unwrap();
    assert_eq!(saved["seed"], 5);
    assert_eq!(saved["ablation"], json!({"use_al_loss": true, "use_scma": false, "use_gcem": false}));
}

#[test]
fn sweep_writes_one_row_per_lambda() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, &[]);
    let config = tiny_config(tmp.path(), &data);
    let out = tmp.path().join("sweep");
    ok(&["sweep", "--config", p(&config), "--lambdas", "0,0.3,1", "--out", p(&out)]);
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "lambda,accuracy,f_measure");
    let lambdas: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(lambdas, ["0", "0.3", "1"]);
}

#[test]
fn preprocess_rebuilds_mel_caches_from_audio() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, &["--audio"]);
    let out = tmp.path().join("mels");
    let stdout = ok(&[
        "preprocess",
        "--manifest",
        p(&data.join("manifest.jsonl")),
        "--seconds",
        "0.5",
        "--mels",
        "16",
        "--out",
        p(&out),
    ]);
    assert!(stdout.contains("converted 40 tracks"), "{stdout}");
    for name in ["manifest.jsonl", "genres.json", "vocab.json"] {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    let original = fs::read(data.join("mels").read_dir().unwrap().next().unwrap().unwrap().path()).unwrap();
    let first = data.join("mels").read_dir().unwrap().next().unwrap().unwrap().file_name();
    let rebuilt = fs::read(out.join("mels").join(first)).unwrap();
    // Same header (magic, version, rows, cols); values differ by PCM16 rounding only.
    assert_eq!(original[..16], rebuilt[..16]);
}

#[test]
fn bad_arguments_fail_with_a_message() {
    let out = genrefuse(&["train", "--ablate", "attention", "--out", "/nonexistent"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown component"));

    let out = genrefuse(&["synth", "--tracks", "5"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--out"));
}
