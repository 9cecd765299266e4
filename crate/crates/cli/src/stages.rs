//! The file-staged experiment: each stage reads the previous stages' files
//! under the output directory and writes its own.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use ragate_core::analysis::{
    classifier_sensitivity, friedman, hybrid_feature_importance, nemenyi, ood_matrix, rademacher_estimate, sharpness,
    stats::nemenyi_csv, transfer_grid_csv, TransferCell,
};
use ragate_core::deciders::{
    fit, select_best, simulated_in_accuracy, DeciderKind, DeciderParams, DecisionTable, FitOptions,
};
use ragate_core::estimators::{fit_hybrid_stats, Manifest, MethodId};
use ragate_core::evalkit::{compute_metrics, metric_correlation, MethodEntry, MethodKind, Metric, MetricsReport};
use ragate_core::io::ScoreLine;
use ragate_core::model::RunRecord;
use ragate_core::pipeline::{build_decision_table, AdaptiveScorer, ScoredRow};

use crate::config::{DatasetRef, ExperimentConfig, HYBRID};
use crate::error::{CliError, CliResult};
use crate::workspace::{index_path, read_json, read_jsonl, write_bytes, write_json, write_jsonl, Split, Workspace};

pub fn stage_dir(cfg: &ExperimentConfig, stage: &str) -> PathBuf {
    cfg.output_dir.join(stage)
}

fn rows_path(cfg: &ExperimentConfig, ds: &str, split: Split) -> PathBuf {
    stage_dir(cfg, "score").join(ds).join(format!("{}.rows.jsonl", split.name()))
}

fn scorer_path(cfg: &ExperimentConfig, ds: &str, name: &str) -> PathBuf {
    stage_dir(cfg, "fit").join(ds).join(format!("{name}.scorer.json"))
}

fn run_path(cfg: &ExperimentConfig, ds: &str, label: &str) -> PathBuf {
    stage_dir(cfg, "run").join(ds).join(format!("{label}.jsonl"))
}

fn fit_options(cfg: &ExperimentConfig) -> FitOptions {
    FitOptions { threshold_mode: cfg.threshold_mode, seed: cfg.seed, ..FitOptions::default() }
}

pub fn cmd_index(cfg: &ExperimentConfig) -> CliResult<()> {
    let corpus = cfg.corpus.as_ref().ok_or_else(|| CliError::Config("`index` needs a local corpus".into()))?;
    let docs = ragate_core::io::load_corpus(corpus)?;
    let index = ragate_core::retrieval::Bm25Index::build(docs, ragate_core::retrieval::Bm25Params::default())?;
    write_json(&index_path(cfg), &index)?;
    write_json(
        &stage_dir(cfg, "index").join("stats.json"),
        &serde_json::json!({"documents": index.n_docs(), "avgdl": index.avgdl}),
    )?;
    log::info!("indexed {} documents", index.n_docs());
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub dataset: String,
    pub split: String,
    pub example_id: String,
    /// `no_context`, `with_context` or `samples`.
    pub kind: String,
    pub key: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationManifest {
    pub model_id: String,
    pub completed: Vec<ManifestEntry>,
    pub failed: Vec<(String, String)>,
}

/// Fills the generation cache with both answers (and samples when any
/// estimator needs them) for every question. Keys already cached are not
/// requested again, so an interrupted run resumes where it stopped.
pub fn cmd_generate(cfg: &ExperimentConfig) -> CliResult<()> {
    let ws = Workspace::open(cfg)?;
    let methods = cfg.methods()?;
    let need_samples = methods.iter().any(|m| m.requirements().samples);
    let pcfg = ws.pipeline_config();
    let mut completed = Vec::new();
    let mut failed = Vec::new();
    for d in &cfg.datasets {
        let pipeline = ws.pipeline(d, &[])?;
        for split in Split::BOTH {
            let examples = ws.examples(d, split)?;
            let results: Vec<CliResult<Vec<ManifestEntry>>> = examples
                .par_iter()
                .map(|ex| {
                    let entry = |kind: &str, key: String| ManifestEntry {
                        dataset: d.name.clone(),
                        split: split.name().to_owned(),
                        example_id: ex.id.clone(),
                        kind: kind.to_owned(),
                        key,
                    };
                    let mut out = Vec::new();
                    let plain = pipeline.no_rag_prompt(ex);
                    ws.gateway.complete(&plain, &pcfg.greedy)?;
                    out.push(entry("no_context", ws.gateway.completion_key(&plain, &pcfg.greedy)?));
                    let (with_ctx, _) = pipeline.rag_prompt(ex)?;
                    ws.gateway.complete(&with_ctx, &pcfg.greedy)?;
                    out.push(entry("with_context", ws.gateway.completion_key(&with_ctx, &pcfg.greedy)?));
                    if need_samples {
                        ws.gateway.sample_n(&plain, &pcfg.sampling)?;
                        out.push(entry("samples", ws.gateway.samples_key(&plain, &pcfg.sampling)?));
                    }
                    Ok(out)
                })
                .collect();
            for (ex, r) in examples.iter().zip(results) {
                match r {
                    Ok(entries) => completed.extend(entries),
                    Err(e) => failed.push((ex.id.clone(), e.to_string())),
                }
            }
        }
    }
    let manifest = GenerationManifest { model_id: ws.gateway.model_id(), completed, failed };
    write_json(&stage_dir(cfg, "generate").join("manifest.json"), &manifest)?;
    log::info!(
        "generation: {} keys cached, {} questions failed, {} backend calls",
        manifest.completed.len(),
        manifest.failed.len(),
        ws.gateway.lm_calls()
    );
    if let Some((id, e)) = manifest.failed.first() {
        return Err(CliError::Endpoint(format!(
            "{} questions failed (first: {id}: {e}); rerun to resume",
            manifest.failed.len()
        )));
    }
    Ok(())
}

pub fn cmd_score(cfg: &ExperimentConfig) -> CliResult<()> {
    let manifest = stage_dir(cfg, "generate").join("manifest.json");
    if !manifest.is_file() {
        return Err(CliError::upstream(&manifest, "generate"));
    }
    let ws = Workspace::open(cfg)?;
    let methods = cfg.methods()?;
    for d in &cfg.datasets {
        let pipeline = ws.pipeline(d, &methods)?;
        for split in Split::BOTH {
            let rows = pipeline.score_dataset(&ws.examples(d, split)?, &methods);
            let failures = rows.iter().filter(|r| r.error.is_some()).count();
            if failures > 0 {
                log::warn!("{}/{}: {failures} rows failed to score", d.name, split.name());
            }
            let lines: Vec<ScoreLine> = rows
                .iter()
                .flat_map(|r| {
                    r.scores.iter().map(|(m, v)| ScoreLine {
                        example_id: r.example_id.clone(),
                        method: m.clone(),
                        value: *v,
                    })
                })
                .collect();
            write_jsonl(&rows_path(cfg, &d.name, split), &rows)?;
            let scores = stage_dir(cfg, "score").join(&d.name).join(format!("{}.scores.jsonl", split.name()));
            write_jsonl(&scores, &lines)?;
        }
    }
    Ok(())
}

fn load_rows(cfg: &ExperimentConfig, ds: &str, split: Split) -> CliResult<Vec<ScoredRow>> {
    read_jsonl(&rows_path(cfg, ds, split), "score")
}

/// Manifest and (for Hybrid) training statistics of a named decider.
fn decider_features(
    name: &str,
    methods: &[MethodId],
    train_rows: &[ScoredRow],
) -> CliResult<(Manifest, Option<ragate_core::estimators::HybridStats>)> {
    if name == HYBRID {
        let ids: Vec<&str> = methods.iter().map(|m| m.id()).collect();
        let manifest = Manifest::parse(&ids)?;
        let train: Vec<BTreeMap<MethodId, f64>> = train_rows
            .iter()
            .filter(|r| r.error.is_none())
            .map(ScoredRow::method_scores)
            .collect::<ragate_core::Result<_>>()?;
        let stats = fit_hybrid_stats(&manifest, &train);
        Ok((manifest, Some(stats)))
    } else {
        Ok((Manifest::parse(&[name])?, None))
    }
}

pub fn cmd_fit(cfg: &ExperimentConfig) -> CliResult<()> {
    let methods = cfg.methods()?;
    let opts = fit_options(cfg);
    for d in &cfg.datasets {
        let train_rows = load_rows(cfg, &d.name, Split::Train)?;
        let test_rows = load_rows(cfg, &d.name, Split::Test)?;
        for name in cfg.decider_names()? {
            let (manifest, hybrid) = decider_features(&name, &methods, &train_rows)?;
            let train = build_decision_table(&train_rows, &manifest, hybrid.as_ref())?;
            let test = build_decision_table(&test_rows, &manifest, hybrid.as_ref())?;
            let (decider, report) =
                select_best(&cfg.decider_kinds, &train, Some(&test), cfg.selection_mode, &opts, &manifest.hash())?;
            let scorer = AdaptiveScorer { manifest, hybrid, decider };
            scorer.check()?;
            write_json(&scorer_path(cfg, &d.name, &name), &scorer)?;
            let base = stage_dir(cfg, "fit").join(&d.name);
            write_json(&base.join(format!("{name}.selection.json")), &report)?;
            // every family refitted on the full training split and scored on test
            let mut per_kind = BTreeMap::new();
            for kind in cfg.decider_kinds.iter().filter(|k| **k != DeciderKind::Threshold || train.dim() == 1) {
                let m = fit(*kind, &train, &opts, &scorer.manifest.hash())?;
                per_kind.insert(kind.name().to_owned(), simulated_in_accuracy(&test, &m.predict_table(&test)?));
            }
            write_json(&base.join(format!("{name}.classifiers.json")), &per_kind)?;
        }
    }
    Ok(())
}

fn load_scorer(cfg: &ExperimentConfig, ds: &str, name: &str) -> CliResult<AdaptiveScorer> {
    read_json(&scorer_path(cfg, ds, name), "fit")
}

fn labels_by_id(rows: &[ScoredRow]) -> BTreeMap<String, u8> {
    rows.iter().filter(|r| r.error.is_none()).map(|r| (r.example_id.clone(), r.y())).collect()
}

pub fn cmd_run(cfg: &ExperimentConfig) -> CliResult<()> {
    let ws = Workspace::open(cfg)?;
    let methods = cfg.methods()?;
    for d in &cfg.datasets {
        let examples = ws.examples(d, Split::Test)?;
        let labels = labels_by_id(&load_rows(cfg, &d.name, Split::Test)?);
        let scorers: Vec<(String, AdaptiveScorer)> = cfg
            .decider_names()?
            .into_iter()
            .map(|n| load_scorer(cfg, &d.name, &n).map(|s| (n, s)))
            .collect::<CliResult<_>>()?;
        let pipeline = ws.pipeline(d, &methods)?;
        let run =
            |label: &str, f: &(dyn Fn(&ragate_core::model::QaExample) -> ragate_core::Result<RunRecord> + Sync)| {
                let records: Vec<RunRecord> = examples.par_iter().map(f).collect::<ragate_core::Result<_>>()?;
                write_jsonl(&run_path(cfg, &d.name, label), &records)
            };
        run("never", &|ex| pipeline.run_never(ex))?;
        run("always", &|ex| pipeline.run_always(ex))?;
        run("ideal", &|ex| pipeline.run_ideal(ex, labels.get(&ex.id).copied()))?;
        for (name, scorer) in &scorers {
            run(&format!("adaptive-{name}"), &|ex| pipeline.run_adaptive(ex, scorer))?;
        }
    }
    Ok(())
}

fn display_name(name: &str) -> String {
    if name == HYBRID {
        return "Hybrid".into();
    }
    name.parse::<MethodId>().map(|m| m.display_name().to_owned()).unwrap_or_else(|_| name.to_owned())
}

pub fn cmd_eval(cfg: &ExperimentConfig) -> CliResult<()> {
    let mut entries = Vec::new();
    for d in &cfg.datasets {
        let labels = labels_by_id(&load_rows(cfg, &d.name, Split::Test)?);
        let mut runs: Vec<(String, MethodKind, String, Option<String>)> = vec![
            ("never".into(), MethodKind::Baseline, "Never RAG".into(), None),
            ("always".into(), MethodKind::Baseline, "Always RAG".into(), None),
            ("ideal".into(), MethodKind::Oracle, "Ideal".into(), None),
        ];
        for name in cfg.decider_names()? {
            let key = (name != HYBRID).then(|| name.clone());
            runs.push((format!("adaptive-{name}"), MethodKind::Uncertainty, display_name(&name), key));
        }
        for (label, kind, method, key) in runs {
            let records: Vec<RunRecord> = read_jsonl(&run_path(cfg, &d.name, &label), "run")?;
            let y: Vec<u8> = records
                .iter()
                .map(|r| {
                    labels
                        .get(&r.example_id)
                        .copied()
                        .ok_or_else(|| CliError::Other(format!("{}: no label for {}", d.name, r.example_id)))
                })
                .collect::<CliResult<_>>()?;
            let metrics = compute_metrics(&records, Some(&y), key.as_deref())?;
            entries.push(MethodEntry { dataset: d.name.clone(), method, kind, metrics });
        }
    }
    let report = MetricsReport::build(entries)?;
    let dir = stage_dir(cfg, "eval");
    write_bytes(&dir.join("metrics.csv"), &report.to_csv()?)?;
    write_bytes(&dir.join("ranks.csv"), &report.ranks_csv()?)?;
    write_json(&dir.join("report.json"), &report)?;
    let ue: Vec<MethodEntry> = report.entries.iter().filter(|e| e.kind == MethodKind::Uncertainty).cloned().collect();
    match metric_correlation(&ue, &Metric::ALL) {
        Ok(c) => {
            let mut w = String::from("metric");
            for m in &c.metrics {
                let _ = write!(w, ",{}", m.name());
            }
            w.push('\n');
            for (m, row) in c.metrics.iter().zip(&c.cells) {
                w.push_str(m.name());
                for v in row {
                    let _ = write!(w, ",{}", v.map(|v| format!("{v:.4}")).unwrap_or_default());
                }
                w.push('\n');
            }
            write_bytes(&dir.join("metric_correlation.csv"), w.as_bytes())?;
        }
        Err(e) => log::info!("metric correlation skipped: {e}"),
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceSummary {
    pub methods: Vec<String>,
    pub pairs: Vec<(String, String)>,
    pub statistic: f64,
    pub p_value: f64,
    pub p_method: ragate_core::analysis::PValueMethod,
    pub mean_ranks: Vec<f64>,
}

pub fn cmd_ood(cfg: &ExperimentConfig) -> CliResult<()> {
    let names: Vec<String> = cfg.datasets.iter().map(|d| d.name.clone()).collect();
    let mut cells: Vec<TransferCell> = Vec::new();
    let mut test_rows = BTreeMap::new();
    for d in &names {
        test_rows.insert(d.clone(), load_rows(cfg, d, Split::Test)?);
    }
    let deciders = cfg.decider_names()?;
    for name in &deciders {
        let mut scorers = BTreeMap::new();
        for d in &names {
            scorers.insert(d.clone(), load_scorer(cfg, d, name)?);
        }
        let method_cells = ood_matrix(name, &names, Metric::InAcc.name(), |train, test| {
            let s = &scorers[train];
            let table = build_decision_table(&test_rows[test], &s.manifest, s.hybrid.as_ref())?;
            Ok(Some(simulated_in_accuracy(&table, &s.decider.predict_table(&table)?)))
        })?;
        cells.extend(method_cells);
    }
    let dir = stage_dir(cfg, "ood");
    write_json(&dir.join("cells.json"), &cells)?;
    write_bytes(&dir.join("transfer.csv"), &transfer_grid_csv(&cells)?)?;
    // Friedman over transfer pairs (rows) × deciders (columns)
    let off: Vec<(String, String)> = if names.len() > 1 {
        names.iter().flat_map(|a| names.iter().filter(move |b| *b != a).map(move |b| (a.clone(), b.clone()))).collect()
    } else {
        names.iter().map(|a| (a.clone(), a.clone())).collect()
    };
    if off.len() >= 2 && deciders.len() >= 2 {
        let matrix: Vec<Vec<f64>> = off
            .iter()
            .map(|(tr, te)| {
                deciders
                    .iter()
                    .map(|m| {
                        cells
                            .iter()
                            .find(|c| &c.method == m && &c.train == tr && &c.test == te)
                            .and_then(|c| c.transferred)
                            .unwrap_or(0.0)
                    })
                    .collect()
            })
            .collect();
        let f = friedman(&matrix, true)?;
        write_json(
            &dir.join("friedman.json"),
            &SignificanceSummary {
                methods: deciders.clone(),
                pairs: off.clone(),
                statistic: f.statistic,
                p_value: f.p_value,
                p_method: f.p_method,
                mean_ranks: f.mean_ranks.clone(),
            },
        )?;
        match nemenyi(&f.mean_ranks, f.n) {
            Ok(n) => write_bytes(&dir.join("nemenyi.csv"), &nemenyi_csv(&deciders, &n)?)?,
            Err(e) => log::info!("Nemenyi skipped: {e}"),
        }
    } else {
        log::info!("significance tests skipped: need at least 2 transfer pairs and 2 deciders");
    }
    Ok(())
}

pub fn cmd_complexity(cfg: &ExperimentConfig) -> CliResult<()> {
    let methods = cfg.methods()?;
    let opts = fit_options(cfg);
    let mut rad = csv_writer();
    rad.write_record(["dataset", "method", "family", "estimate", "stderr", "normalized", "n", "draws", "flags"])
        .map_err(csv_err)?;
    let mut sharp = csv_writer();
    sharp
        .write_record(["dataset", "method", "lambda_max", "log10_lambda_max", "l2", "iterations", "n"])
        .map_err(csv_err)?;
    for d in &cfg.datasets {
        let train_rows = load_rows(cfg, &d.name, Split::Train)?;
        for name in cfg.decider_names()? {
            let (manifest, hybrid) = decider_features(&name, &methods, &train_rows)?;
            let table = build_decision_table(&train_rows, &manifest, hybrid.as_ref())?;
            let x = table.features();
            let families: Vec<DeciderKind> = [DeciderKind::Threshold, DeciderKind::Logreg, DeciderKind::Tree]
                .into_iter()
                .filter(|k| *k != DeciderKind::Threshold || table.dim() == 1)
                .collect();
            for fam in families {
                let r = rademacher_estimate(&name, &x, fam, cfg.rademacher_draws, cfg.seed, &opts)?;
                rad.write_record([
                    d.name.clone(),
                    name.clone(),
                    fam.name().to_owned(),
                    format!("{:.6}", r.estimate),
                    format!("{:.6}", r.stderr),
                    r.normalized.map(|v| format!("{v:.6}")).unwrap_or_default(),
                    r.n.to_string(),
                    r.draws.to_string(),
                    r.flags.join("; "),
                ])
                .map_err(csv_err)?;
            }
            let model = fit(DeciderKind::Logreg, &table, &opts, &manifest.hash())?;
            if let DeciderParams::Logreg { scaler, model } = &model.params {
                let s = sharpness(&name, model, &scaler.transform_all(&x))?;
                sharp
                    .write_record([
                        d.name.clone(),
                        name.clone(),
                        format!("{:.8}", s.lambda_max),
                        format!("{:.6}", s.log10_lambda_max),
                        format!("{:.6}", s.l2),
                        s.iterations.to_string(),
                        s.n.to_string(),
                    ])
                    .map_err(csv_err)?;
            }
        }
    }
    let dir = stage_dir(cfg, "complexity");
    write_bytes(&dir.join("rademacher.csv"), &rad.into_inner().map_err(|e| CliError::Other(e.to_string()))?)?;
    write_bytes(&dir.join("sharpness.csv"), &sharp.into_inner().map_err(|e| CliError::Other(e.to_string()))?)?;
    Ok(())
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Other(e.to_string())
}

fn read_optional(path: &Path) -> CliResult<Option<String>> {
    if path.is_file() {
        Ok(Some(std::fs::read_to_string(path)?))
    } else {
        Ok(None)
    }
}

pub fn cmd_report(cfg: &ExperimentConfig) -> CliResult<()> {
    let report: MetricsReport = read_json(&stage_dir(cfg, "eval").join("report.json"), "eval")?;
    let dir = stage_dir(cfg, "report");
    let t1 = report.table1_markdown();
    let t2 = report.table2_markdown();
    write_bytes(&dir.join("table1.md"), t1.as_bytes())?;
    write_bytes(&dir.join("table2.md"), t2.as_bytes())?;
    for (stage, file) in [("eval", "metrics.csv"), ("eval", "ranks.csv"), ("eval", "metric_correlation.csv")] {
        if let Some(text) = read_optional(&stage_dir(cfg, stage).join(file))? {
            write_bytes(&dir.join(file), text.as_bytes())?;
        }
    }
    let mut summary = format!("# Results\n\n## QA and efficiency\n\n{t1}\n## Self-knowledge\n\n{t2}");

    // classifier sensitivity from the per-family test scores written by `fit`
    let mut table: BTreeMap<String, BTreeMap<String, BTreeMap<String, f64>>> = BTreeMap::new();
    for d in &cfg.datasets {
        for name in cfg.decider_names()? {
            let path = stage_dir(cfg, "fit").join(&d.name).join(format!("{name}.classifiers.json"));
            let per: BTreeMap<String, f64> = read_json(&path, "fit")?;
            table.entry(display_name(&name)).or_default().insert(d.name.clone(), per);
        }
    }
    if table.values().flat_map(|m| m.values()).all(|c| c.len() >= 2) {
        let s = classifier_sensitivity(&table)?;
        let mut w = String::from("method,drop,mean_rank,max_rank,difference\n");
        summary.push_str("\n## Classifier sensitivity\n\n| Method | Drop | Mean rank | Max rank | Difference |\n|---|---|---|---|---|\n");
        for r in &s.ranks {
            let drop = s.drops[&r.method];
            let _ = writeln!(w, "{},{drop:.4},{:.2},{:.2},{:.2}", r.method, r.mean_rank, r.max_rank, r.difference);
            let _ = writeln!(
                summary,
                "| {} | {drop:.3} | {:.2} | {:.2} | {:.2} |",
                r.method, r.mean_rank, r.max_rank, r.difference
            );
        }
        write_bytes(&dir.join("classifier_sensitivity.csv"), w.as_bytes())?;
    }

    if cfg.hybrid() {
        let mut w = String::from("dataset,feature,importance,rank,measure\n");
        for d in &cfg.datasets {
            let scorer = load_scorer(cfg, &d.name, HYBRID)?;
            let names: Vec<String> = scorer.manifest.methods().iter().map(|m| m.id().to_owned()).collect();
            match hybrid_feature_importance(&scorer.decider, &names, None) {
                Ok(rep) => {
                    for f in rep.features {
                        let _ = writeln!(w, "{},{},{:.6},{},{}", d.name, f.feature, f.importance, f.rank, rep.measure);
                    }
                }
                Err(e) => log::info!("{}: feature importance skipped: {e}", d.name),
            }
        }
        write_bytes(&dir.join("hybrid_importance.csv"), w.as_bytes())?;
    }

    if let Some(text) = read_optional(&stage_dir(cfg, "ood").join("transfer.csv"))? {
        write_bytes(&dir.join("transfer.csv"), text.as_bytes())?;
        summary.push_str("\n## Out-of-distribution transfer (% change in In-Accuracy)\n\n```\n");
        summary.push_str(&text);
        summary.push_str("```\n");
    }
    if let Some(text) = read_optional(&stage_dir(cfg, "ood").join("nemenyi.csv"))? {
        write_bytes(&dir.join("nemenyi.csv"), text.as_bytes())?;
    }
    if let Some(text) = read_optional(&stage_dir(cfg, "complexity").join("rademacher.csv"))? {
        write_bytes(&dir.join("rademacher.csv"), text.as_bytes())?;
        summary.push_str("\n## Rademacher complexity\n\n```\n");
        summary.push_str(&text);
        summary.push_str("```\n");
    }
    if let Some(text) = read_optional(&stage_dir(cfg, "complexity").join("sharpness.csv"))? {
        write_bytes(&dir.join("sharpness.csv"), text.as_bytes())?;
    }
    write_bytes(&dir.join("summary.md"), summary.as_bytes())?;
    Ok(())
}

/// Every stage in order.
pub fn cmd_all(cfg: &ExperimentConfig) -> CliResult<()> {
    if cfg.corpus.is_some() {
        cmd_index(cfg)?;
    }
    cmd_generate(cfg)?;
    cmd_score(cfg)?;
    cmd_fit(cfg)?;
    cmd_run(cfg)?;
    cmd_eval(cfg)?;
    cmd_ood(cfg)?;
    cmd_complexity(cfg)?;
    cmd_report(cfg)
}

/// Direct run of one strategy over one dataset file, outside the staged
/// layout. The Ideal labels come from the no-retrieval answers themselves.
pub fn run_direct(
    cfg: &ExperimentConfig,
    dataset: &Path,
    strategy: ragate_core::model::Strategy,
    estimator: Option<&str>,
    decider: Option<&Path>,
) -> CliResult<Vec<RunRecord>> {
    use ragate_core::model::Strategy;
    let ws = Workspace::open(cfg)?;
    let examples = ragate_core::io::load_dataset(dataset)
        .map_err(|e| CliError::Config(format!("--dataset {}: {e}", dataset.display())))?;
    let d = DatasetRef {
        name: "direct".into(),
        train: dataset.to_owned(),
        test: dataset.to_owned(),
        hidden_train: None,
        hidden_test: None,
    };
    let scorer = match strategy {
        Strategy::Adaptive => {
            let path = decider.ok_or_else(|| CliError::Config("adaptive runs need --decider".into()))?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read decider {}: {e}", path.display())))?;
            let scorer = match serde_json::from_str::<AdaptiveScorer>(&text) {
                Ok(s) => s,
                Err(_) => {
                    let model = ragate_core::deciders::DeciderModel::from_json(&text)?;
                    let est =
                        estimator.ok_or_else(|| CliError::Config("a bare decider model needs --estimator".into()))?;
                    AdaptiveScorer { manifest: Manifest::parse(&[est])?, hybrid: None, decider: model }
                }
            };
            if let Some(est) = estimator {
                if scorer.manifest != Manifest::parse(&[est])? {
                    return Err(CliError::Config(format!("--estimator {est} does not match the decider's manifest")));
                }
            }
            Some(scorer)
        }
        _ => None,
    };
    let methods: Vec<MethodId> = scorer.as_ref().map(|s| s.manifest.methods().to_vec()).unwrap_or_default();
    let pipeline = ws.pipeline(&d, &methods)?;
    let records = examples
        .par_iter()
        .map(|ex| match strategy {
            Strategy::Never => pipeline.run_never(ex),
            Strategy::Always => pipeline.run_always(ex),
            Strategy::Ideal => {
                let a = pipeline.answer_no_rag(ex)?;
                let y = u8::from(!ragate_core::evalkit::in_accuracy(&a.text, &ex.golds));
                pipeline.run_ideal(ex, Some(y))
            }
            Strategy::Adaptive => pipeline.run_adaptive(ex, scorer.as_ref().expect("scorer built above")),
        })
        .collect::<ragate_core::Result<Vec<_>>>()?;
    Ok(records)
}

/// Helper for tests and tools: the decision table of one fitted decider on
/// a dataset's split.
pub fn decision_table(
    cfg: &ExperimentConfig,
    ds: &str,
    name: &str,
    split: Split,
) -> CliResult<(AdaptiveScorer, DecisionTable)> {
    let scorer = load_scorer(cfg, ds, name)?;
    let rows = load_rows(cfg, ds, split)?;
    let table = build_decision_table(&rows, &scorer.manifest, scorer.hybrid.as_ref())?;
    Ok((scorer, table))
}
