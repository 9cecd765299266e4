//! Retrieve/skip classifiers trained on uncertainty scores.

pub mod knn;
pub mod logreg;
pub mod mlp;
pub mod threshold;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::hybrid::STD_FLOOR;
pub use knn::KnnParams;
pub use logreg::{LogregOptions, LogregParams};
pub use mlp::MlpParams;
pub use threshold::{ThresholdMode, ThresholdParams};
pub use tree::{TreeNode, TreeParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRow {
    pub example_id: String,
    pub features: Vec<f64>,
    pub y: u8,
    pub correct_norag: bool,
    pub correct_rag: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTable {
    pub feature_names: Vec<String>,
    pub rows: Vec<DecisionRow>,
}

impl DecisionTable {
    pub fn new(feature_names: Vec<String>, rows: Vec<DecisionRow>) -> Result<Self> {
        let t = DecisionTable { feature_names, rows };
        t.validate()?;
        Ok(t)
    }

    /// One-feature table named `score`; `y` follows from `correct_norag`.
    pub fn from_scores(scores: &[f64], correct_norag: &[bool], correct_rag: &[bool]) -> Self {
        assert!(scores.len() == correct_norag.len() && scores.len() == correct_rag.len());
        let rows = scores
            .iter()
            .enumerate()
            .map(|(i, s)| DecisionRow {
                example_id: i.to_string(),
                features: vec![*s],
                y: u8::from(!correct_norag[i]),
                correct_norag: correct_norag[i],
                correct_rag: correct_rag[i],
            })
            .collect();
        DecisionTable { feature_names: vec!["score".into()], rows }
    }

    /// Table whose simulated In-Accuracy is plain classification accuracy
    /// against `labels`.
    pub fn from_labels(features: &[Vec<f64>], labels: &[u8]) -> Self {
        let dim = features.first().map_or(0, Vec::len);
        let rows = features
            .iter()
            .zip(labels)
            .enumerate()
            .map(|(i, (x, y))| DecisionRow {
                example_id: i.to_string(),
                features: x.clone(),
                y: *y,
                correct_norag: *y == 0,
                correct_rag: *y == 1,
            })
            .collect();
        DecisionTable { feature_names: (0..dim).map(|j| format!("f{j}")).collect(), rows }
    }

    pub fn validate(&self) -> Result<()> {
        for r in &self.rows {
            if r.features.len() != self.feature_names.len() {
                return Err(Error::data(format!(
                    "row {} has {} features, expected {}",
                    r.example_id,
                    r.features.len(),
                    self.feature_names.len()
                )));
            }
            if r.y > 1 || (r.y == 1) == r.correct_norag {
                return Err(Error::data(format!("row {}: y must equal 1 − correct_norag", r.example_id)));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn features(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.features.clone()).collect()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.rows.iter().map(|r| r.y).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        DecisionTable {
            feature_names: self.feature_names.clone(),
            rows: indices.iter().map(|i| self.rows[*i].clone()).collect(),
        }
    }

    /// In-Accuracy of the oracle that retrieves exactly when needed.
    pub fn union_rate(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().filter(|r| r.correct_norag || r.correct_rag).count() as f64 / self.rows.len() as f64
    }
}

/// Mean over rows of the correctness of the answer each decision selects.
pub fn simulated_in_accuracy(table: &DecisionTable, decisions: &[u8]) -> f64 {
    if table.rows.is_empty() {
        return 0.0;
    }
    let hits = table
        .rows
        .iter()
        .zip(decisions)
        .filter(|(r, d)| if **d == 1 { r.correct_rag } else { r.correct_norag })
        .count();
    hits as f64 / table.rows.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    /// Population mean and standard deviation per column, std floored.
    pub fn fit(x: &[Vec<f64>]) -> Self {
        let d = x.first().map_or(0, Vec::len);
        let n = x.len().max(1) as f64;
        let means: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let stds = (0..d)
            .map(|j| {
                let var = x.iter().map(|r| (r[j] - means[j]).powi(2)).sum::<f64>() / n;
                var.sqrt().max(STD_FLOOR)
            })
            .collect();
        Standardizer { means, stds }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.means).zip(&self.stds).map(|((v, m), s)| (v - m) / s).collect()
    }

    pub fn transform_all(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter().map(|r| self.transform(r)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeciderKind {
    Threshold,
    Logreg,
    Tree,
    Knn,
    Mlp,
    Constant,
}

impl DeciderKind {
    /// The trainable classifier families compared during selection.
    pub const TRAINABLE: [DeciderKind; 5] =
        [DeciderKind::Threshold, DeciderKind::Logreg, DeciderKind::Tree, DeciderKind::Knn, DeciderKind::Mlp];

    pub fn name(self) -> &'static str {
        match self {
            DeciderKind::Threshold => "threshold",
            DeciderKind::Logreg => "logreg",
            DeciderKind::Tree => "tree",
            DeciderKind::Knn => "knn",
            DeciderKind::Mlp => "mlp",
            DeciderKind::Constant => "constant",
        }
    }
}

impl fmt::Display for DeciderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DeciderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            DeciderKind::Threshold,
            DeciderKind::Logreg,
            DeciderKind::Tree,
            DeciderKind::Knn,
            DeciderKind::Mlp,
            DeciderKind::Constant,
        ]
        .into_iter()
        .find(|k| k.name() == s.to_ascii_lowercase())
        .ok_or_else(|| Error::invalid(format!("unknown decider kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum DeciderParams {
    Threshold(ThresholdParams),
    Logreg { scaler: Standardizer, model: LogregParams },
    Tree(TreeParams),
    Knn { scaler: Standardizer, model: KnnParams },
    Mlp { scaler: Standardizer, model: MlpParams },
    Constant { decision: u8, dim: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    PaperFaithfulTest,
    Holdout,
}

impl FromStr for SelectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper_faithful_test" => Ok(SelectionMode::PaperFaithfulTest),
            "holdout" => Ok(SelectionMode::Holdout),
            other => Err(Error::invalid(format!("unknown selection mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeciderModel {
    #[serde(flatten)]
    pub params: DeciderParams,
    /// Hash of the feature manifest the model was trained on.
    pub manifest_hash: String,
    #[serde(default)]
    pub mode: Option<SelectionMode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub threshold_mode: ThresholdMode,
    pub logreg: LogregOptions,
    pub knn_k: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            threshold_mode: ThresholdMode::LogGrid200,
            logreg: LogregOptions::default(),
            knn_k: knn::DEFAULT_K,
            seed: 0,
        }
    }
}

pub fn fit(kind: DeciderKind, table: &DecisionTable, opts: &FitOptions, manifest_hash: &str) -> Result<DeciderModel> {
    if table.is_empty() {
        return Err(Error::invalid("cannot fit a decider on an empty table"));
    }
    table.validate()?;
    let x = table.features();
    let y = table.labels();
    let params = match kind {
        DeciderKind::Threshold => DeciderParams::Threshold(threshold::fit_threshold(table, opts.threshold_mode)?),
        DeciderKind::Tree => DeciderParams::Tree(tree::fit_tree(&x, &y, tree::MAX_DEPTH)?),
        DeciderKind::Logreg => {
            let scaler = Standardizer::fit(&x);
            let model = logreg::fit_logreg(&scaler.transform_all(&x), &y, opts.logreg)?;
            DeciderParams::Logreg { scaler, model }
        }
        DeciderKind::Knn => {
            let scaler = Standardizer::fit(&x);
            let model = knn::fit_knn(&scaler.transform_all(&x), &y, opts.knn_k)?;
            DeciderParams::Knn { scaler, model }
        }
        DeciderKind::Mlp => {
            let scaler = Standardizer::fit(&x);
            let model = mlp::fit_mlp(&scaler.transform_all(&x), &y, opts.seed)?;
            DeciderParams::Mlp { scaler, model }
        }
        DeciderKind::Constant => {
            let rag = table.rows.iter().filter(|r| r.correct_rag).count();
            let norag = table.rows.iter().filter(|r| r.correct_norag).count();
            DeciderParams::Constant { decision: u8::from(rag > norag), dim: table.dim() }
        }
    };
    Ok(DeciderModel { params, manifest_hash: manifest_hash.to_owned(), mode: None })
}

impl DeciderModel {
    pub fn kind(&self) -> DeciderKind {
        match self.params {
            DeciderParams::Threshold(_) => DeciderKind::Threshold,
            DeciderParams::Logreg { .. } => DeciderKind::Logreg,
            DeciderParams::Tree(_) => DeciderKind::Tree,
            DeciderParams::Knn { .. } => DeciderKind::Knn,
            DeciderParams::Mlp { .. } => DeciderKind::Mlp,
            DeciderParams::Constant { .. } => DeciderKind::Constant,
        }
    }

    /// Number of input features the model expects.
    pub fn dim(&self) -> usize {
        match &self.params {
            DeciderParams::Threshold(_) => 1,
            DeciderParams::Logreg { scaler, .. }
            | DeciderParams::Knn { scaler, .. }
            | DeciderParams::Mlp { scaler, .. } => scaler.means.len(),
            DeciderParams::Tree(t) => t.importance.len(),
            DeciderParams::Constant { dim, .. } => *dim,
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        if x.len() != self.dim() {
            return Err(Error::invalid(format!("decider expects {} features, got {}", self.dim(), x.len())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("decider input contains non-finite values"));
        }
        Ok(match &self.params {
            DeciderParams::Threshold(p) => p.predict(x[0]),
            DeciderParams::Logreg { scaler, model } => model.predict(&scaler.transform(x)),
            DeciderParams::Tree(t) => t.root.predict(x),
            DeciderParams::Knn { scaler, model } => model.predict(&scaler.transform(x)),
            DeciderParams::Mlp { scaler, model } => model.predict(&scaler.transform(x)),
            DeciderParams::Constant { decision, .. } => *decision,
        })
    }

    pub fn predict_table(&self, table: &DecisionTable) -> Result<Vec<u8>> {
        table.rows.iter().map(|r| self.predict(&r.features)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub kind: DeciderKind,
    pub in_accuracy: f64,
    pub retrieval_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub mode: SelectionMode,
    pub candidates: Vec<CandidateScore>,
    pub chosen: DeciderKind,
    pub max: f64,
    pub mean: f64,
    pub drop: f64,
    pub note: String,
}

pub const HOLDOUT_FRACTION: f64 = 0.2;

/// Seeded split of `0..n` into (fit, validation) indices.
pub fn holdout_split(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = if n >= 2 { ((n as f64 * HOLDOUT_FRACTION).round() as usize).clamp(1, n - 1) } else { 0 };
    let val = idx.split_off(n - n_val);
    (idx, val)
}

/// Fits every kind, scores each by simulated In-Accuracy on the split the
/// mode prescribes, and returns the best (earlier kinds win ties).
pub fn select_best(
    kinds: &[DeciderKind],
    train: &DecisionTable,
    test: Option<&DecisionTable>,
    mode: SelectionMode,
    opts: &FitOptions,
    manifest_hash: &str,
) -> Result<(DeciderModel, SelectionReport)> {
    let kinds: Vec<DeciderKind> =
        kinds.iter().copied().filter(|k| *k != DeciderKind::Threshold || train.dim() == 1).collect();
    if kinds.is_empty() {
        return Err(Error::invalid("no applicable decider kinds"));
    }
    let (fit_table, eval_table, note) = match mode {
        SelectionMode::PaperFaithfulTest => {
            let test = test.ok_or_else(|| Error::invalid("paper_faithful_test selection needs a test table"))?;
            (train.clone(), test.clone(), "selected on the test split; reported test metrics are optimistic".to_owned())
        }
        SelectionMode::Holdout => {
            let (fit_idx, val_idx) = holdout_split(train.len(), opts.seed);
            if val_idx.is_empty() {
                return Err(Error::invalid("holdout selection needs at least 2 training rows"));
            }
            (
                train.subset(&fit_idx),
                train.subset(&val_idx),
                format!("selected on a {} row holdout of train", val_idx.len()),
            )
        }
    };
    let fitted: Vec<(DeciderModel, CandidateScore)> = kinds
        .par_iter()
        .map(|k| {
            let m = fit(*k, &fit_table, opts, manifest_hash)?;
            let d = m.predict_table(&eval_table)?;
            let rr = d.iter().map(|v| f64::from(*v)).sum::<f64>() / d.len().max(1) as f64;
            Ok((
                m,
                CandidateScore { kind: *k, in_accuracy: simulated_in_accuracy(&eval_table, &d), retrieval_rate: rr },
            ))
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, (_, c)) in fitted.iter().enumerate() {
        if c.in_accuracy > fitted[best].1.in_accuracy {
            best = i;
        }
    }
    let candidates: Vec<CandidateScore> = fitted.iter().map(|(_, c)| c.clone()).collect();
    let max = candidates[best].in_accuracy;
    let mean = candidates.iter().map(|c| c.in_accuracy).sum::<f64>() / candidates.len() as f64;
    let chosen = candidates[best].kind;
    let mut model = match mode {
        SelectionMode::PaperFaithfulTest => fitted.into_iter().nth(best).expect("index in range").0,
        SelectionMode::Holdout => fit(chosen, train, opts, manifest_hash)?,
    };
    model.mode = Some(mode);
    Ok((model, SelectionReport { mode, candidates, chosen, max, mean, drop: max - mean, note }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> DecisionTable {
        let scores: Vec<f64> = (0..30).map(f64::from).collect();
        let norag: Vec<bool> = (0..30).map(|i| i < 18).collect();
        let rag: Vec<bool> = (0..30).map(|i| i % 3 != 0).collect();
        DecisionTable::from_scores(&scores, &norag, &rag)
    }

    #[test]
    fn ideal_decisions_reach_union_rate() {
        let t = table();
        assert_eq!(simulated_in_accuracy(&t, &t.labels()), t.union_rate());
    }

    #[test]
    fn model_json_envelope() {
        let t = table();
        for kind in DeciderKind::TRAINABLE {
            let m = fit(kind, &t, &FitOptions::default(), "abc").unwrap();
            let v: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
            assert_eq!(v["kind"], kind.name());
            assert!(v.get("params").is_some());
            assert_eq!(v["manifest_hash"], "abc");
            assert_eq!(DeciderModel::from_json(&m.to_json().unwrap()).unwrap(), m);
        }
    }

    #[test]
    fn selection_report_drop() {
        let t = table();
        for mode in [SelectionMode::PaperFaithfulTest, SelectionMode::Holdout] {
            let (m, r) = select_best(&DeciderKind::TRAINABLE, &t, Some(&t), mode, &FitOptions::default(), "h").unwrap();
            assert_eq!(r.candidates.len(), 5);
            assert!((r.drop - (r.max - r.mean)).abs() < 1e-15);
            assert_eq!(m.kind(), r.chosen);
            assert_eq!(m.mode, Some(mode));
        }
    }

    #[test]
    fn identical_candidates_have_no_drop() {
        let t = table();
        let (_, r) = select_best(
            &[DeciderKind::Constant, DeciderKind::Constant],
            &t,
            Some(&t),
            SelectionMode::PaperFaithfulTest,
            &FitOptions::default(),
            "h",
        )
        .unwrap();
        assert_eq!(r.drop, 0.0);
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        let m = fit(DeciderKind::Threshold, &table(), &FitOptions::default(), "h").unwrap();
        assert!(m.predict(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn inconsistent_label_is_rejected() {
        let mut t = table();
        t.rows[0].y = 1 - t.rows[0].y;
        assert!(t.validate().is_err());
    }
}
