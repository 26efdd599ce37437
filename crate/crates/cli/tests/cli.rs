use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use tempfile::TempDir;

fn hgml(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hgml"))
        .args(args)
        .output()
        .expect("run hgml")
}

fn ok(args: &[&str]) -> String {
    let out = hgml(args);
    assert!(
        out.status.success(),
        "hgml {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str]) -> String {
    let out = hgml(args);
    assert!(!out.status.success(), "hgml {args:?} unexpectedly succeeded");
    String::from_utf8(out.stderr).unwrap()
}

fn synth(runs: &Path, seed: u64, n: usize) -> PathBuf {
    let out = ok(&[
        "synth", "--d", "6", "--informative", "2", "--n", &n.to_string(),
        "--spread", "0.5", "--seed", &seed.to_string(),
        "--runs", runs.to_str().unwrap(),
    ]);
    PathBuf::from(out.trim())
}

fn annotated(runs: &Path, seed: u64) -> String {
    let run = synth(runs, seed, 400);
    let run = run.to_str().unwrap().to_owned();
    ok(&["auto-annotate", "--run", &run, "--models", "6"]);
    run
}

#[test]
fn run_directory_is_named_by_seed_and_hash() {
    let tmp = TempDir::new().unwrap();
    let run = synth(tmp.path(), 3, 400);
    let name = run.file_name().unwrap().to_str().unwrap();
    assert!(name.starts_with("s3-") && name.len() == 15, "{name}");
    assert_eq!(run, synth(tmp.path(), 3, 400));
    assert_ne!(run, synth(tmp.path(), 4, 400));
}

#[test]
fn pairs_are_deterministic() {
    let tmp = TempDir::new().unwrap();
    let run = synth(tmp.path(), 7, 400);
    let run = run.to_str().unwrap();
    let a = ok(&["pairs", "--run", run, "--k", "5", "--seed", "7"]);
    let b = ok(&["pairs", "--run", run, "--k", "5", "--seed", "7"]);
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 4, "quartile of 15 pairs holds 4:\n{a}");
    let ranked = ok(&["pairs", "--run", run, "--k", "3", "--mode", "rank"]);
    assert_eq!(ranked.lines().count(), 3);
    let err = fails(&["pairs", "--run", run, "--k", "5", "--seed", "8"]);
    assert!(err.contains("seed"), "{err}");
}

#[test]
fn bad_flags_and_missing_files_fail() {
    fails(&["synth", "--d", "4", "--informative", "2", "--n", "10", "--bogus"]);
    let err = fails(&["compare", "--run", "/nonexistent/run"]);
    assert!(err.contains("dataset.json"), "{err}");
    assert!(ok(&["featurize", "--help"]).contains("--mode"));
}

#[test]
fn featurize_rejects_models_from_another_dataset() {
    let tmp = TempDir::new().unwrap();
    let a = annotated(tmp.path(), 1);
    let b = synth(tmp.path(), 2, 400);
    let foreign = format!("{a}/models.jsonl");
    let err = fails(&["featurize", "--run", b.to_str().unwrap(), "--models", &foreign]);
    assert!(err.contains("dataset"), "{err}");
    let err = fails(&["compare", "--run", b.to_str().unwrap(), "--models", &foreign, "--grid", "reduced"]);
    assert!(err.contains("dataset"), "{err}");
}

#[test]
fn compare_refuses_tampered_feature_metadata() {
    let tmp = TempDir::new().unwrap();
    let run = annotated(tmp.path(), 5);
    ok(&["featurize", "--run", &run]);
    let meta_path = Path::new(&run).join("features.meta.json");
    let meta = std::fs::read_to_string(&meta_path).unwrap();
    let hash: serde_json::Value = serde_json::from_str(&meta).unwrap();
    let real = hash["dataset_hash"].as_str().unwrap();
    std::fs::write(&meta_path, meta.replace(real, &"0".repeat(64))).unwrap();
    let err = fails(&["compare", "--run", &run, "--grid", "reduced"]);
    assert!(err.contains("features.meta.json"), "{err}");
    let err = fails(&["train", "--run", &run, "--arm", "features"]);
    assert!(err.contains("features.meta.json"), "{err}");
}

#[test]
fn featurize_train_compare_report() {
    let tmp = TempDir::new().unwrap();
    let run = annotated(tmp.path(), 9);
    let summary = ok(&["featurize", "--run", &run, "--mode", "signed"]);
    assert!(summary.starts_with("6 columns, 400 train rows, 400 test rows"), "{summary}");
    let header = std::fs::read_to_string(Path::new(&run).join("features-train.csv")).unwrap();
    assert!(header.starts_with("sample,syn-"));

    for arm in ["raw", "features"] {
        let out = ok(&["train", "--run", &run, "--arm", arm, "--rounds", "20"]);
        assert!(out.starts_with(arm), "{out}");
        let art: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(Path::new(&run).join(format!("train-{arm}.json"))).unwrap(),
        )
        .unwrap();
        assert_eq!(art["loss_curve"].as_array().unwrap().len(), 20);
    }

    let table = ok(&["compare", "--run", &run, "--grid", "reduced", "--folds", "3"]);
    assert!(table.starts_with("Name"), "{table}");
    for file in ["report.json", "report.csv", "report.txt"] {
        assert!(Path::new(&run).join(file).exists(), "{file}");
    }
    let other = annotated(tmp.path(), 10);
    ok(&["compare", "--run", &other, "--grid", "reduced", "--folds", "3"]);
    let both = ok(&["report", "--run", &run, "--run", &other]);
    assert_eq!(both.lines().count(), 4, "{both}");
    let csv = ok(&["report", "--run", &run, "--csv"]);
    assert!(csv.starts_with("name,m_prime,test_count,d_prime,data_accuracy,n_models,feature_accuracy\n"));
}

#[test]
fn ingest_csv_with_schema() {
    let tmp = TempDir::new().unwrap();
    let csv = tmp.path().join("data.csv");
    let schema = tmp.path().join("data.schema");
    let mut text = String::from("colour,size,weight,class\n");
    for i in 0..60 {
        let colour = ["red", "blue", "green"][i % 3];
        let class = if i % 3 == 0 { "yes" } else { "no" };
        text.push_str(&format!("{colour},{},{}.5,{class}\n", i % 7, i));
    }
    std::fs::write(&csv, text).unwrap();
    std::fs::write(&schema, "colour,nominal\nsize,integer\nweight,continuous\n").unwrap();
    let out = ok(&[
        "ingest", "--csv", csv.to_str().unwrap(), "--schema", schema.to_str().unwrap(),
        "--label-column", "class", "--seed", "2", "--runs", tmp.path().join("runs").to_str().unwrap(),
        "--annotation-train", "8", "--annotation-valid", "8", "--annotation-test", "8", "--m-prime", "30",
    ]);
    let run = PathBuf::from(out.trim());
    let data: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("dataset.json")).unwrap()).unwrap();
    // 20 "yes" rows, balanced down from 40 "no" rows.
    assert_eq!(data["dataset"]["labels"].as_array().unwrap().len(), 40);
}

#[test]
fn auto_annotate_through_the_service() {
    let tmp = TempDir::new().unwrap();
    let run = synth(tmp.path(), 4, 400);
    let run = run.to_str().unwrap();
    let mut server = Command::new(env!("CARGO_BIN_EXE_hgml"))
        .args(["serve", "--run", run, "--listen", "127.0.0.1:0", "--pool", "3", "--tasks-per-pair", "2"])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(server.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let url = line.trim().strip_prefix("listening on ").expect(&line).to_owned();

    let out = hgml(&["auto-annotate", "--server", &url, "--models", "50", "--seed", "1"]);
    server.kill().unwrap();
    server.wait().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    // The pool holds 3 pairs x 2 tasks; the worker stops once it runs dry.
    assert!(stdout.contains("of 6 attempts"), "{stdout}");
    let accepted: usize = stdout.split_whitespace().nth(1).unwrap().parse().unwrap();
    let stored = std::fs::read_to_string(Path::new(run).join("models.jsonl")).unwrap_or_default();
    assert_eq!(stored.lines().count(), accepted);
}
