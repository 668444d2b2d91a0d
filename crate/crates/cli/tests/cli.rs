use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn sla(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sla")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = sla(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, cancer: &str, n: usize) -> PathBuf {
    let out = dir.join(format!("synth-{cancer}"));
    ok(&["synth", "--cancer", cancer, "--num-docs", &n.to_string(), "--seed", "3", "--out", p(&out)]);
    out.join("corpus.jsonl")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn usage_and_data_errors_have_distinct_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(sla(&["train"]).status.code(), Some(1));
    assert_eq!(sla(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(sla(&["--help"]).status.code(), Some(0));

    let bad = tmp.path().join("bad.jsonl");
    fs::write(&bad, "{\"id\":\"x\",\"cancer\":\"lung\",\"lines\":[\"a\"]}\n").unwrap();
    let out = sla(&["validate", "--corpus", p(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));

    let illegal = tmp.path().join("illegal.jsonl");
    fs::write(
        &illegal,
        "{\"id\":\"x\",\"cancer\":\"colon\",\"lines\":[\"a\"],\"annotations\":[{\"attribute\":\"grade\",\"values\":[\"grade 9\"],\"lines\":[0],\"scheme\":\"minimal\"}]}\n",
    )
    .unwrap();
    let out = sla(&["validate", "--corpus", p(&illegal)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("1 violations"));

    let corpus = synth(tmp.path(), "kidney", 20);
    let out = sla(&["train", "--corpus", p(&corpus), "--variant", "nope", "--out", p(&tmp.path().join("m"))]);
    assert_eq!(out.status.code(), Some(1));
    let missing = tmp.path().join("nothing.jsonl");
    assert_eq!(sla(&["stage", "--corpus", p(&missing), "--out", p(tmp.path())]).status.code(), Some(2));
}

#[test]
fn train_predict_evaluate_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = synth(tmp.path(), "kidney", 40);
    ok(&["validate", "--corpus", p(&corpus)]);
    let model = tmp.path().join("model");
    ok(&["train", "--corpus", p(&corpus), "--attribute", "laterality,grade", "--seed", "2", "--out", p(&model)]);
    let models = json(&model.join("model.json"));
    assert_eq!(models["models"].as_array().unwrap().len(), 2);

    let pred = tmp.path().join("pred");
    ok(&["predict", "--corpus", p(&corpus), "--model", p(&model), "--out", p(&pred)]);
    let docs = sla::corpus::load_corpus(&corpus).unwrap();
    let text = fs::read_to_string(pred.join("predictions.jsonl")).unwrap();
    let records: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 80);
    for r in &records {
        let doc = docs.iter().find(|d| d.id() == r["id"].as_str().unwrap()).unwrap();
        for seg in r["rationale"].as_array().unwrap() {
            let (a, b) = (seg["start_line"].as_u64().unwrap() as usize, seg["end_line"].as_u64().unwrap() as usize);
            assert_eq!(seg["text"].as_str().unwrap(), doc.report.lines[a..=b].join(" "));
        }
        let scores = r["scores"].as_object().unwrap();
        assert!(scores.contains_key(r["label"].as_str().unwrap()));
    }

    let eval = tmp.path().join("eval");
    ok(&[
        "evaluate",
        "--corpus",
        p(&corpus),
        "--predictions",
        p(&pred.join("predictions.jsonl")),
        "--bootstrap",
        "100",
        "--out",
        p(&eval),
    ]);
    let metrics = json(&eval.join("metrics.json"));
    let mean = metrics["report"]["mean_micro_f1"].as_f64().unwrap();
    assert!(mean > 0.8, "training-set micro-F1 {mean}");
    assert!(metrics["report"]["mean_micro_f1_ci"]["lo"].as_f64().unwrap() <= mean);

    // Every manifest digest matches the file on disk.
    for dir in [&model, &pred, &eval] {
        let m = json(&dir.join("manifest.json"));
        for entry in m["inputs"].as_array().unwrap().iter().chain(m["outputs"].as_array().unwrap()) {
            let bytes = fs::read(entry["path"].as_str().unwrap()).unwrap();
            assert_eq!(entry["sha256"].as_str().unwrap(), format!("{:x}", Sha256::digest(&bytes)));
        }
    }
}

#[test]
fn tuned_parameters_feed_training() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = synth(tmp.path(), "colon", 24);
    let tune = tmp.path().join("tune");
    ok(&[
        "tune", "--corpus", p(&corpus), "--attribute", "grade", "--variant", "doc-logreg", "--trials", "3", "--folds",
        "2", "--out", p(&tune),
    ]);
    let best = json(&tune.join("best.json"));
    let c = best["grade"]["config"]["c"].as_f64().unwrap();
    let model = tmp.path().join("model");
    ok(&[
        "train", "--corpus", p(&corpus), "--attribute", "grade", "--variant", "doc-logreg", "--params",
        p(&tune.join("best.json")), "--out", p(&model),
    ]);
    let m = json(&model.join("model.json"));
    assert_eq!(m["models"][0]["config"]["c"].as_f64().unwrap(), c);
}

#[test]
fn agreement_and_stage_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = synth(tmp.path(), "colon", 20);
    let mut docs = sla::corpus::load_corpus(&corpus).unwrap();
    let flipped = docs
        .iter_mut()
        .take(5)
        .filter_map(|d| d.annotations.get_mut("perineural_invasion"))
        .map(|a| {
            a.values = vec![if a.values[0] == "present" { "absent" } else { "present" }.to_string()];
            if a.line_indices.is_empty() {
                a.line_indices.insert(0);
            }
        })
        .count();
    let other = tmp.path().join("b.jsonl");
    sla::corpus::save_corpus(&other, &docs).unwrap();
    let out = tmp.path().join("agree");
    ok(&[
        "agreement", "--corpus", p(&corpus), "--corpus-b", p(&other), "--attribute", "perineural_invasion", "--out",
        p(&out),
    ]);
    let a = json(&out.join("agreement.json"));
    let row = &a["attributes"][0];
    assert_eq!(row["items"], 20);
    assert_eq!(row["fraction"].as_f64().unwrap(), (20 - flipped) as f64 / 20.0);

    let st = tmp.path().join("stage");
    ok(&["stage", "--corpus", p(&corpus), "--out", p(&st)]);
    let lines = fs::read_to_string(st.join("stages.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 20);
    for l in lines.lines() {
        let r: serde_json::Value = serde_json::from_str(l).unwrap();
        if let Some(tok) = r["token"].as_str() {
            assert!(tok.contains('T'));
        }
    }
}

#[test]
fn synth_is_deterministic_and_dry_run_writes_only_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let a = synth(tmp.path(), "colon", 15);
    let b_dir = tmp.path().join("again");
    ok(&["synth", "--cancer", "colon", "--num-docs", "15", "--seed", "3", "--out", p(&b_dir)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(b_dir.join("corpus.jsonl")).unwrap());

    let lc = tmp.path().join("lc");
    ok(&["learning-curve", "--corpus", p(&a), "--sizes", "5,10", "--dry-run", "--out", p(&lc)]);
    let names: Vec<String> = fs::read_dir(&lc).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert_eq!(names, vec!["manifest.json".to_string()]);
    assert_eq!(json(&lc.join("manifest.json"))["config"]["sizes"], serde_json::json!([5, 10]));
}
