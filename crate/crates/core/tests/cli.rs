use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn cder(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cder")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = cder(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn trained(dir: &TempDir) -> (String, String) {
    let data = dir.path().join("blobs.csv");
    let model = dir.path().join("model.json");
    ok(&["generate", "--experiment", "blobs", "--seed", "4", "--out", p(&data)]);
    ok(&["train", "--data", p(&data), "--out", p(&model)]);
    (p(&data).to_string(), p(&model).to_string())
}

#[test]
fn wrong_dimension_row_exits_2_and_names_the_line() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "cloud_id,label,x0,x1\na,r,0,0\nb,s,1,2\nb,s,3\n").unwrap();
    let out = cder(&["train", "--data", p(&bad), "--out", p(&dir.path().join("m.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));
}

#[test]
fn empty_file_exits_2() {
    let dir = TempDir::new().unwrap();
    let (_, model) = trained(&dir);
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    assert_eq!(cder(&["predict", "--model", &model, "--data", p(&empty)]).status.code(), Some(2));
    let header_only = dir.path().join("header.csv");
    fs::write(&header_only, "cloud_id,label,x0,x1\n").unwrap();
    assert_eq!(cder(&["predict", "--model", &model, "--data", p(&header_only)]).status.code(), Some(2));
}

#[test]
fn predict_dimension_mismatch_exits_2() {
    let dir = TempDir::new().unwrap();
    let (_, model) = trained(&dir);
    let d3 = dir.path().join("d3.csv");
    fs::write(&d3, "cloud_id,label,x0,x1,x2\na,magenta,0,0,0\n").unwrap();
    assert_eq!(cder(&["predict", "--model", &model, "--data", p(&d3)]).status.code(), Some(2));
}

#[test]
fn bad_theta_exits_2() {
    let dir = TempDir::new().unwrap();
    let (data, _) = trained(&dir);
    let out = cder(&["train", "--theta", "1.5", "--data", &data, "--out", p(&dir.path().join("m.json"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn json_and_csv_predictions_agree() {
    let dir = TempDir::new().unwrap();
    let (data, model) = trained(&dir);
    let csv_text = ok(&["predict", "--model", &model, "--data", &data]);
    let json_text = ok(&["predict", "--json", "--model", &model, "--data", &data]);
    let rows: Vec<serde_json::Value> = serde_json::from_str(&json_text).unwrap();
    let mut lines = csv_text.lines();
    assert_eq!(lines.next().unwrap(), "cloud_id,predicted,norm_magenta,norm_green,low_confidence");
    let mut correct = 0;
    for (line, row) in lines.zip(&rows) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[0], row["id"].as_str().unwrap());
        assert_eq!(f[1], row["label"].as_str().unwrap());
        let norms = row["per_label_norms"].as_array().unwrap();
        for (s, v) in f[2..4].iter().zip(norms) {
            assert_eq!(s.parse::<f64>().unwrap(), v.as_f64().unwrap());
        }
        correct += usize::from(f[0].contains(&format!("-{}-", if f[1] == "magenta" { 0 } else { 1 })));
    }
    assert_eq!(rows.len(), 50);
    assert!(correct >= 48, "{correct}/50 correct on training data");
}

#[test]
fn crossval_inspect_and_export_run() {
    let dir = TempDir::new().unwrap();
    let (data, model) = trained(&dir);
    let report: serde_json::Value =
        serde_json::from_str(&ok(&["crossval", "--json", "--seed", "1", "--data", &data])).unwrap();
    assert_eq!(report["folds"], 5);
    let table = ok(&["crossval", "--disjoint-folds", "--data", &data]);
    assert!(table.contains("mean test accuracy"));

    let dump = dir.path().join("tree.json");
    let trace = ok(&["inspect", "--data", &data, "--dump", p(&dump)]);
    assert!(trace.starts_with("level"));
    let levels: Vec<serde_json::Value> = serde_json::from_str(&fs::read_to_string(&dump).unwrap()).unwrap();
    assert_eq!(levels[0]["adults"].as_array().unwrap().len(), 1);

    let regions: Vec<serde_json::Value> = serde_json::from_str(&ok(&["export-regions", "--model", &model])).unwrap();
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(regions.len(), m["coordinates"].as_array().unwrap().len());
}

#[test]
fn generate_is_deterministic_and_writes_ground_truth() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let gt = dir.path().join("gt.json");
    ok(&["generate", "--experiment", "deep-field", "--seed", "9", "--out", p(&a), "--ground-truth", p(&gt)]);
    ok(&["generate", "--experiment", "deep-field", "--seed", "9", "--out", p(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let truth: serde_json::Value = serde_json::from_str(&fs::read_to_string(&gt).unwrap()).unwrap();
    assert_eq!(truth["components"].as_array().unwrap().len(), 50);
}

#[test]
fn single_label_data_predicts_that_label() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("one.csv");
    let mut text = String::from("cloud_id,label,x0,x1\n");
    for c in 0..3 {
        for j in 0..15 {
            text.push_str(&format!("c{c},solo,{},{}\n", c as f64 + 0.2 * j as f64, (j % 4) as f64));
        }
    }
    fs::write(&data, text).unwrap();
    let model = dir.path().join("m.json");
    ok(&["train", "--data", p(&data), "--out", p(&model)]);
    let out = ok(&["predict", "--model", p(&model), "--data", p(&data)]);
    assert!(out.lines().skip(1).all(|l| l.split(',').nth(1) == Some("solo")));
}
