use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nframes::embed::{MockEmbedServer, MockServerConfig};

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn nframes(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nframes"))
        .args(args)
        .env_remove("NF_EMBED_URL")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = nframes(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn code(args: &[&str]) -> i32 {
    nframes(args).status.code().expect("exit code")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

/// ingest, aggregate and split into `dir`; returns the fold 0 directory.
fn prepare(dir: &Path) -> String {
    ok(&[
        "ingest",
        "--input",
        &fixture("articles_raw.jsonl"),
        "--out",
        &path(dir, "corpus.jsonl"),
    ]);
    ok(&[
        "aggregate",
        "--annotations",
        &fixture("annotations.jsonl"),
        "--out",
        &path(dir, "labels.jsonl"),
    ]);
    ok(&[
        "split",
        "--labels",
        &path(dir, "labels.jsonl"),
        "--out",
        &path(dir, "folds"),
    ]);
    path(dir, "folds/fold0")
}

fn json(path: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn full_pipeline_with_every_method() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let fold = prepare(d);
    let meta = json(&path(d, "corpus.jsonl.meta.json"));
    assert_eq!(meta["dropped"], 4);

    let mut preds = Vec::new();
    for method in [
        "rbf", "rbf-a", "rbf-at", "knn", "majority", "random", "semisup",
    ] {
        let model = path(d, &format!("model-{method}"));
        ok(&[
            "train",
            "--method",
            method,
            "--fold",
            &fold,
            "--corpus",
            &path(d, "corpus.jsonl"),
            "--labels",
            &path(d, "labels.jsonl"),
            "--out",
            &model,
        ]);
        let out = path(d, &format!("{method}.jsonl"));
        ok(&[
            "predict",
            "--model",
            &model,
            "--corpus",
            &path(d, "corpus.jsonl"),
            "--fold",
            &fold,
            "--out",
            &out,
        ]);
        preds.push(out);
    }
    let report = path(d, "rbf.metrics.json");
    ok(&[
        "eval",
        "--preds",
        &preds[0],
        "--gold",
        &path(d, "labels.jsonl"),
        "--out",
        &report,
    ]);
    let report = json(&report);
    assert!(report["f1"].as_f64().unwrap() >= 0.0);
    let digest = report["config_digest"].as_str().unwrap();
    assert_eq!(digest.len(), 64);
    let first_pred: serde_json::Value = serde_json::from_str(
        std::fs::read_to_string(&preds[0])
            .unwrap()
            .lines()
            .next()
            .unwrap(),
    )
    .unwrap();
    assert_eq!(first_pred["config_digest"], digest);

    let mut args = vec!["eval"];
    for p in &preds[..2] {
        args.extend(["--preds", p.as_str()]);
    }
    let summary = path(d, "summary.json");
    let labels = path(d, "labels.jsonl");
    args.extend(["--gold", &labels, "--out", &summary]);
    ok(&args);
    assert!(json(&summary).is_object());

    let tables = path(d, "tables");
    ok(&[
        "analyze",
        "--labels",
        &path(d, "labels.jsonl"),
        "--corpus",
        &path(d, "corpus.jsonl"),
        "--svg",
        "--out",
        &tables,
    ]);
    for name in [
        "role_frame.csv",
        "role_stakeholder.csv",
        "frame_leaning.csv",
        "frame_leaning.svg",
        "manifest.json",
    ] {
        assert!(Path::new(&tables).join(name).is_file(), "{name}");
    }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(
        code(&["predict", "--corpus", "c.jsonl", "--out", "p.jsonl"]),
        1
    );
    assert_eq!(code(&["train", "--method", "bogus"]), 1);
    assert_eq!(code(&["no-such-command"]), 1);
    assert_eq!(code(&["--help"]), 0);
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(
        code(&[
            "ingest",
            "--input",
            &path(d, "missing.jsonl"),
            "--out",
            &path(d, "c.jsonl")
        ]),
        2
    );

    std::fs::write(path(d, "bad.jsonl"), "{not json\n").unwrap();
    assert_eq!(
        code(&[
            "aggregate",
            "--annotations",
            &path(d, "bad.jsonl"),
            "--out",
            &path(d, "l.jsonl")
        ]),
        2
    );

    // Predictions that share no article with the gold labels.
    prepare(d);
    std::fs::write(
        path(d, "preds.jsonl"),
        "{\"article_id\":\"zzz\",\"frame\":\"RE\",\"probability\":0.9,\"predicted\":true,\"evidence\":[]}\n",
    )
    .unwrap();
    assert_eq!(
        code(&[
            "eval",
            "--preds",
            &path(d, "preds.jsonl"),
            "--gold",
            &path(d, "labels.jsonl"),
            "--out",
            &path(d, "m.json")
        ]),
        2
    );
}

#[test]
fn remote_embedder_through_mock_matches_hash() {
    let server = MockEmbedServer::start(MockServerConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let fold = prepare(d);
    let (corpus, labels) = (path(d, "corpus.jsonl"), path(d, "labels.jsonl"));
    let run = |embedder: &[&str], tag: &str| -> String {
        let model = path(d, &format!("model-{tag}"));
        let mut args = vec!["train", "--method", "rbf"];
        args.extend_from_slice(embedder);
        args.extend(["--fold", &fold, "--corpus", &corpus, "--labels", &labels]);
        args.extend(["--out", &model]);
        ok(&args);
        let out = path(d, &format!("{tag}.jsonl"));
        let mut args = vec![
            "predict", "--model", &model, "--corpus", &corpus, "--fold", &fold,
        ];
        args.extend(["--evidence", "--out", &out]);
        ok(&args);
        out
    };
    let url = server.url();
    let remote = run(&["--embedder", "remote", "--embed-url", &url], "remote");
    let local = run(&["--embedder", "hash"], "hash");
    let strip = |p: &str| -> Vec<serde_json::Value> {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .map(|l| {
                let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
                v.as_object_mut().unwrap().remove("config_digest");
                v
            })
            .collect()
    };
    assert_eq!(strip(&remote), strip(&local));
    assert!(server.embed_calls() > 0);
}

#[test]
fn unreachable_embedder_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let fold = prepare(d);
    let status = code(&[
        "train",
        "--method",
        "rbf",
        "--embedder",
        "remote",
        "--embed-url",
        "http://127.0.0.1:9",
        "--fold",
        &fold,
        "--corpus",
        &path(d, "corpus.jsonl"),
        "--labels",
        &path(d, "labels.jsonl"),
        "--out",
        &path(d, "m"),
    ]);
    assert_eq!(status, 2);
}

#[test]
fn contract_check_against_mock() {
    let server = MockEmbedServer::start(MockServerConfig::default()).unwrap();
    let out = nframes(&["contract-check", "--url", &server.url()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(code(&["contract-check", "--url", "http://127.0.0.1:9"]), 2);
}

#[test]
fn synthesize_writes_planted_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "syn");
    ok(&["synthesize", "--articles", "30", "--out", &out]);
    let corpus = std::fs::read_to_string(Path::new(&out).join("corpus.jsonl")).unwrap();
    assert_eq!(corpus.lines().count(), 30);
    assert!(Path::new(&out).join("planted.json").is_file());
}
