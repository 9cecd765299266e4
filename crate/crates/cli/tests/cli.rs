//! Command-line behaviour: stage chaining, exit codes and artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/toy")
}

fn config() -> String {
    fixture_dir().join("config.json").display().to_string()
}

fn ragate(args: &[&str]) -> i32 {
    let mut full = vec!["ragate".to_owned()];
    full.extend(args.iter().map(|a| (*a).to_owned()));
    ragate::main_with_args(full)
}

fn out_override(dir: &Path) -> String {
    format!("output_dir={}", dir.display())
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

#[test]
fn bundled_fixture_matches_the_generator() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(ragate(&["toy-fixture", "--out", tmp.path().to_str().unwrap()]), 0);
    for name in ["corpus.jsonl", "train.jsonl", "test.jsonl", "mock_spec.json", "config.json", ".gitignore"] {
        let fresh = fs::read(tmp.path().join(name)).unwrap();
        let bundled = fs::read(fixture_dir().join(name)).unwrap();
        assert!(fresh == bundled, "{name} is stale; regenerate with `ragate toy-fixture`");
    }
}

#[test]
fn stages_chain_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_override(tmp.path());
    let cfg = config();
    for stage in ["index", "generate", "score", "fit", "run", "eval", "ood", "complexity", "report"] {
        let code = if stage == "index" {
            ragate(&["index", "--config", &cfg, "--override", &out])
        } else {
            ragate(&[stage, "--config", &cfg, "--override", &out])
        };
        assert_eq!(code, 0, "stage {stage}");
    }
    let runs = tmp.path().join("run/toy");
    for name in ["never", "always", "ideal", "adaptive-max_entropy"] {
        let text = fs::read_to_string(runs.join(format!("{name}.jsonl"))).unwrap();
        assert_eq!(text.lines().count(), 100, "{name}");
    }
    let table = fs::read_to_string(tmp.path().join("report/table1.md")).unwrap();
    for row in ["Never RAG", "Always RAG", "Ideal", "Max Entropy"] {
        assert!(table.contains(row), "table1 lacks {row}:\n{table}");
    }
    let metrics = fs::read_to_string(tmp.path().join("eval/metrics.csv")).unwrap();
    assert_eq!(metrics.lines().next(), Some("dataset,method,kind,metric,value"));
    assert!(metrics.contains("toy,Never RAG,baseline,InAcc,"), "{metrics}");
}

#[test]
fn direct_adaptive_run_matches_the_staged_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_override(tmp.path());
    let cfg = config();
    assert_eq!(ragate(&["all", "--config", &cfg, "--override", &out]), 0);
    let direct = tmp.path().join("direct.jsonl");
    let questions = fixture_dir().join("test.jsonl").display().to_string();
    let scorer = tmp.path().join("fit/toy/max_entropy.scorer.json").display().to_string();
    let direct_run = |estimator: &str| {
        ragate(&[
            "run",
            "--config",
            &cfg,
            "--override",
            &out,
            "--dataset",
            &questions,
            "--strategy",
            "adaptive",
            "--estimator",
            estimator,
            "--decider",
            &scorer,
            "--output",
            direct.to_str().unwrap(),
        ])
    };
    assert_eq!(direct_run("max_entropy"), 0);
    let staged = fs::read_to_string(tmp.path().join("run/toy/adaptive-max_entropy.jsonl")).unwrap();
    let parse =
        |text: &str| -> Vec<Value> { text.lines().map(|l| serde_json::from_str::<Value>(l).unwrap()).collect() };
    assert_eq!(parse(&fs::read_to_string(&direct).unwrap()), parse(&staged));
    // the decider was fitted on a different estimator
    assert_eq!(direct_run("mean_entropy"), 2);
    let missing = ["run", "--config", &cfg, "--dataset", "/nonexistent.jsonl", "--strategy", "never"];
    assert_eq!(ragate(&missing), 2);
}

#[test]
fn exit_codes_follow_the_failure_kind() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_override(tmp.path());
    let cfg = config();
    // configuration problems
    assert_eq!(ragate(&["score", "--config", "/nonexistent/config.json"]), 2);
    assert_eq!(ragate(&["score", "--config", &cfg, "--override", "n_samples=0"]), 2);
    assert_eq!(ragate(&["score", "--config", &cfg, "--override", "estimators=[\"no_such_method\"]"]), 2);
    assert_eq!(ragate(&["bogus-command"]), 2);
    // a stage without its upstream artifact
    assert_eq!(ragate(&["score", "--config", &cfg, "--override", &out]), 3);
    assert_eq!(ragate(&["fit", "--config", &cfg, "--override", &out]), 3);
    assert_eq!(ragate(&["report", "--config", &cfg, "--override", &out]), 3);
    // a configured estimator that was never fitted
    assert_eq!(ragate(&["all", "--config", &cfg, "--override", &out]), 0);
    let unfitted = ["run", "--config", &cfg, "--override", &out, "--override", "estimators=[\"mean_entropy\"]"];
    assert_eq!(ragate(&unfitted), 3);
}

#[test]
fn unreachable_endpoint_exits_4_and_records_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_override(tmp.path());
    let llm =
        r#"llm={"endpoint": {"api_base": "http://127.0.0.1:9", "model": "m", "timeout_secs": 2, "max_attempts": 1}}"#;
    let code = ragate(&["generate", "--config", &config(), "--override", &out, "--override", llm]);
    assert_eq!(code, 4);
    let manifest = read_json(&tmp.path().join("generate/manifest.json"));
    assert_eq!(manifest["failed"].as_array().unwrap().len(), 200);
    assert!(manifest["completed"].as_array().unwrap().is_empty());
}

#[test]
fn generation_resumes_from_the_cache() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_override(tmp.path());
    let cfg = config();
    assert_eq!(ragate(&["generate", "--config", &cfg, "--override", &out]), 0);
    let first = fs::read(tmp.path().join("generate/manifest.json")).unwrap();
    let cache = tmp.path().join("cache");
    let count = |dir: &Path| walk(dir).len();
    let cached = count(&cache);
    assert_eq!(cached, 400);
    // drop a quarter of the cache; the rerun refills exactly those entries
    let mut files = walk(&cache);
    files.sort();
    let kept: Vec<(PathBuf, Vec<u8>)> = files.iter().skip(100).map(|p| (p.clone(), fs::read(p).unwrap())).collect();
    for p in files.iter().take(100) {
        fs::remove_file(p).unwrap();
    }
    assert_eq!(ragate(&["generate", "--config", &cfg, "--override", &out]), 0);
    assert_eq!(count(&cache), cached);
    for (p, bytes) in kept {
        assert_eq!(fs::read(&p).unwrap(), bytes, "{} was rewritten", p.display());
    }
    assert_eq!(fs::read(tmp.path().join("generate/manifest.json")).unwrap(), first);
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap().flatten() {
        let p = entry.path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn three_datasets_give_six_transfer_cells() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_override(tmp.path());
    let datasets = r#"datasets=[
        {"name": "alpha", "train": "train.jsonl", "test": "test.jsonl"},
        {"name": "beta", "train": "test.jsonl", "test": "train.jsonl"},
        {"name": "gamma", "train": "train.jsonl", "test": "test.jsonl"}
    ]"#;
    let estimators = r#"estimators=["max_entropy", "mean_entropy", "perplexity"]"#;
    let code =
        ragate(&["all", "--config", &config(), "--override", &out, "--override", datasets, "--override", estimators]);
    assert_eq!(code, 0);
    let cells = read_json(&tmp.path().join("ood/cells.json"));
    let cells = cells.as_array().unwrap();
    let off_diagonal: Vec<&Value> = cells.iter().filter(|c| c["train"] != c["test"]).collect();
    let methods = 3;
    assert_eq!(off_diagonal.len(), 6 * methods, "{cells:?}");
    for c in cells.iter().filter(|c| c["train"] == c["test"]) {
        assert_eq!(c["change_pct"].as_f64(), Some(0.0), "{c}");
    }
    let friedman = read_json(&tmp.path().join("ood/friedman.json"));
    assert!(friedman.to_string().contains("statistic"), "{friedman}");
    let nemenyi = fs::read_to_string(tmp.path().join("ood/nemenyi.csv")).unwrap();
    assert!(nemenyi.contains("1.00"), "{nemenyi}");
}
