use std::path::Path;
use std::process::{Command, Output};

fn cellgraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cellgraph")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = cellgraph(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

const SMALL_SYNTH: &str =
    r#"{"n_samples": 3, "n_melanoma": 2, "image_size": 96, "n_channels": 4, "cells_per_sample": 36}"#;

const SMALL_EXPERIMENT: &str = r#"{
  "reduction": {"dim": 4, "perplexity": 8, "tsne_iters": 300, "n_neighbors": 8, "umap_epochs": 100},
  "grand": {"max_epochs": 40, "patience": 20},
  "forest": {"n_trees": 15},
  "boost": {"n_rounds": 20}
}"#;

fn small_dataset(dir: &Path) -> std::path::PathBuf {
    let cfg = dir.join("synth.json");
    write(&cfg, SMALL_SYNTH);
    let data = dir.join("data");
    ok(&["synth", "--config", p(&cfg), "--out", p(&data), "--seed", "5"]);
    data
}

#[test]
fn stage_chain_runs_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let data = small_dataset(d);
    assert!(data.join("manifest.json").exists());

    let expr = d.join("expr.csv");
    let rad = d.join("rad.csv");
    ok(&["extract", "--dataset", p(&data), "--features", "expression", "--out", p(&expr)]);
    ok(&["extract", "--dataset", p(&data), "--features", "radiomics", "--levels", "8", "--out", p(&rad)]);
    let header = std::fs::read_to_string(&rad).unwrap();
    assert!(header.starts_with("cell_id,sample_id,cx,cy,label,"));

    let emb = d.join("emb.csv");
    ok(&["reduce", "--method", "pca", "--dim", "3", "--in", p(&rad), "--out", p(&emb)]);
    assert!(std::fs::read_to_string(&emb).unwrap().lines().next().unwrap().ends_with("pca_0,pca_1,pca_2"));

    let edges = d.join("g.edges");
    ok(&["graph", "--features", p(&expr), "--kind", "spatial", "--k", "5", "--out", p(&edges)]);
    let text = std::fs::read_to_string(&edges).unwrap();
    let n: usize = text.lines().next().unwrap().trim_start_matches("# nodes ").parse().unwrap();
    assert_eq!(text.lines().count() - 1, 5 * n);

    let run = d.join("grand");
    ok(&[
        "train",
        "--graph",
        p(&edges),
        "--features",
        p(&expr),
        "--labels",
        p(&expr),
        "--epochs",
        "40",
        "--out",
        p(&run),
    ]);
    for f in ["model.grnd", "history.csv", "predictions.csv"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let metrics = ok(&["evaluate", "--predictions", p(&run.join("predictions.csv"))]);
    let m: serde_json::Value = serde_json::from_slice(&metrics.stdout).unwrap();
    assert!(m["f1"].as_f64().unwrap() >= 0.0);

    let rf = d.join("rf");
    ok(&[
        "baseline",
        "--model",
        "random_forest",
        "--trees",
        "10",
        "--features",
        p(&rad),
        "--labels",
        p(&expr),
        "--out",
        p(&rf),
    ]);
    ok(&["evaluate", "--predictions", p(&rf.join("predictions.csv")), "--out", p(&rf.join("metrics.json"))]);
    assert!(rf.join("model.bin").exists() && rf.join("metrics.json").exists());

    let cfg = d.join("exp.json");
    write(&cfg, SMALL_EXPERIMENT);
    let exp = d.join("exp");
    ok(&[
        "experiment",
        "--config",
        p(&cfg),
        "--dataset",
        p(&data),
        "--reductions",
        "none,umap",
        "--models",
        "grand_spatial_graph,random_forest",
        "--out",
        p(&exp),
    ]);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(exp.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["cells"].as_array().unwrap().len(), 8);
    assert!(exp.join("table1.csv").exists());
}

#[test]
fn seed_reaches_report_and_threads_do_not_change_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = d.join("exp.json");
    let with_synth = SMALL_EXPERIMENT.replacen('{', &format!("{{\n  \"synth\": {SMALL_SYNTH},"), 1);
    write(&cfg, &with_synth);
    let mut reports = Vec::new();
    for threads in ["1", "4"] {
        let out = d.join(format!("t{threads}"));
        ok(&[
            "--seed",
            "7",
            "--threads",
            threads,
            "experiment",
            "--config",
            p(&cfg),
            "--feature-types",
            "radiomics",
            "--reductions",
            "umap",
            "--models",
            "grand_feature_graph,gradient_boosting",
            "--out",
            p(&out),
        ]);
        reports.push(std::fs::read(out.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let report: serde_json::Value = serde_json::from_slice(&reports[0]).unwrap();
    assert_eq!(report["seed"], 7);
    assert_eq!(report["config"]["seed"], 7);

    let charts = d.join("charts");
    ok(&["report", "--report", p(&d.join("t1")), "--out", p(&charts)]);
    let first = std::fs::read(charts.join("f1.svg")).unwrap();
    ok(&["report", "--report", p(&d.join("t1").join("report.json")), "--out", p(&charts)]);
    assert_eq!(first, std::fs::read(charts.join("f1.svg")).unwrap());
    for m in ["accuracy", "precision", "recall", "roc_auc"] {
        assert!(charts.join(format!("{m}.svg")).exists());
    }
    assert!(charts.join("table1.csv").exists());
}

#[test]
fn missing_input_path_exits_one_and_names_it() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("no_such_dataset");
    let out = cellgraph(&["extract", "--dataset", p(&missing), "--out", p(&tmp.path().join("f.csv"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("no_such_dataset"), "{err}");
    assert!(err.contains("\"stage\":\"extract\""), "{err}");
}

#[test]
fn usage_errors_exit_two() {
    let out = cellgraph(&["train", "--graph", "g.edges", "--features", "f.csv", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--labels"));

    let out = cellgraph(&["synth", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));

    let out = cellgraph(&["synth"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--out"));

    let out = cellgraph(&["reduce", "--in", "f.csv", "--method", "lda", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));

    let out = cellgraph(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("experiment"));
}

#[test]
fn stages_are_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let data = small_dataset(d);
    let again = d.join("again");
    let cfg = d.join("synth.json");
    ok(&["synth", "--config", p(&cfg), "--out", p(&again), "--seed", "5"]);
    for f in ["manifest.json", "ground_truth.csv"] {
        assert_eq!(std::fs::read(data.join(f)).unwrap(), std::fs::read(again.join(f)).unwrap());
    }
    let (a, b) = (d.join("a.csv"), d.join("b.csv"));
    ok(&["extract", "--dataset", p(&data), "--features", "radiomics", "--out", p(&a)]);
    ok(&["--threads", "2", "extract", "--dataset", p(&again), "--features", "radiomics", "--out", p(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}
