//! Per-dataset metric tables, cross-dataset rank aggregation, the
//! metric-correlation matrix and their CSV/markdown renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::selfknow::{accuracy, average_ranks, efficiency, over_under_confidence, roc_auc, spearman};
use crate::error::{Error, Result};
use crate::model::RunRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    InAcc,
    Em,
    F1,
    Lmc,
    Rc,
    Accuracy,
    RocAuc,
    Spearman,
    Overconfidence,
    Underconfidence,
}

impl Metric {
    pub const ALL: [Metric; 10] = [
        Metric::InAcc,
        Metric::Em,
        Metric::F1,
        Metric::Lmc,
        Metric::Rc,
        Metric::Accuracy,
        Metric::RocAuc,
        Metric::Spearman,
        Metric::Overconfidence,
        Metric::Underconfidence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::InAcc => "InAcc",
            Metric::Em => "EM",
            Metric::F1 => "F1",
            Metric::Lmc => "LMC",
            Metric::Rc => "RC",
            Metric::Accuracy => "Acc",
            Metric::RocAuc => "AUC",
            Metric::Spearman => "Corr",
            Metric::Overconfidence => "Over",
            Metric::Underconfidence => "Under",
        }
    }

    pub fn higher_is_better(self) -> bool {
        !matches!(self, Metric::Lmc | Metric::Rc | Metric::Overconfidence | Metric::Underconfidence)
    }
}

pub type MetricRow = BTreeMap<Metric, Option<f64>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Baseline,
    Uncertainty,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodEntry {
    pub dataset: String,
    pub method: String,
    pub kind: MethodKind,
    pub metrics: MetricRow,
}

/// All ten metrics for one method on one dataset. `labels` holds the
/// self-knowledge label of each record; without it the self-knowledge
/// metrics are null. The ranking score is `record.scores[score_key]`, or the
/// decision itself when no key is given.
pub fn compute_metrics(records: &[RunRecord], labels: Option<&[u8]>, score_key: Option<&str>) -> Result<MetricRow> {
    let (lmc, rc) = efficiency(records)?;
    let n = records.len() as f64;
    let mean = |f: &dyn Fn(&RunRecord) -> f64| records.iter().map(f).sum::<f64>() / n;
    let mut row = MetricRow::new();
    row.insert(Metric::InAcc, Some(mean(&|r| f64::from(u8::from(r.correct_in_acc)))));
    row.insert(Metric::Em, Some(mean(&|r| f64::from(u8::from(r.correct_em)))));
    row.insert(Metric::F1, Some(mean(&|r| r.f1)));
    row.insert(Metric::Lmc, Some(lmc));
    row.insert(Metric::Rc, Some(rc));
    for m in [Metric::Accuracy, Metric::RocAuc, Metric::Spearman, Metric::Overconfidence, Metric::Underconfidence] {
        row.insert(m, None);
    }
    let Some(labels) = labels else {
        return Ok(row);
    };
    if labels.len() != records.len() {
        return Err(Error::invalid(format!("{} labels for {} records", labels.len(), records.len())));
    }
    let decisions: Vec<u8> = records.iter().map(|r| r.decision).collect();
    let scores: Vec<f64> = match score_key {
        Some(key) => records
            .iter()
            .map(|r| {
                r.scores.get(key).copied().ok_or_else(|| Error::data(format!("{}: no score for {key}", r.example_id)))
            })
            .collect::<Result<_>>()?,
        None => decisions.iter().map(|d| f64::from(*d)).collect(),
    };
    let labels_f: Vec<f64> = labels.iter().map(|y| f64::from(*y)).collect();
    let conf = over_under_confidence(&decisions, labels);
    row.insert(Metric::Accuracy, Some(accuracy(&decisions, labels)));
    row.insert(Metric::RocAuc, roc_auc(&scores, labels));
    row.insert(Metric::Spearman, spearman(&scores, &labels_f));
    row.insert(Metric::Overconfidence, Some(conf.over));
    row.insert(Metric::Underconfidence, Some(conf.under));
    Ok(row)
}

/// Averages per-dataset ranks (1 = best, ties share the mean rank) across
/// datasets. `values` maps dataset → method → value; null values are left
/// out of their dataset's ranking.
pub fn rank_table(
    values: &BTreeMap<String, BTreeMap<String, Option<f64>>>,
    higher_is_better: bool,
) -> Result<BTreeMap<String, Option<f64>>> {
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for per_method in values.values() {
        if per_method.len() < 2 {
            return Err(Error::invalid("ranking needs at least two methods"));
        }
        for m in per_method.keys() {
            sums.entry(m.clone()).or_insert((0.0, 0));
        }
        let present: Vec<(&String, f64)> = per_method.iter().filter_map(|(m, v)| v.map(|v| (m, v))).collect();
        let keyed: Vec<f64> = present.iter().map(|(_, v)| if higher_is_better { -v } else { *v }).collect();
        for ((m, _), r) in present.iter().zip(average_ranks(&keyed)) {
            let e = sums.get_mut(*m).expect("method registered above");
            e.0 += r;
            e.1 += 1;
        }
    }
    Ok(sums.into_iter().map(|(m, (s, c))| (m, (c > 0).then(|| s / c as f64))).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub metrics: Vec<Metric>,
    pub cells: Vec<Vec<Option<f64>>>,
}

/// Spearman correlations between metric columns after min-max normalizing
/// each column within each dataset.
pub fn metric_correlation(entries: &[MethodEntry], metrics: &[Metric]) -> Result<CorrelationMatrix> {
    let mut by_dataset: BTreeMap<&str, Vec<&MethodEntry>> = BTreeMap::new();
    for e in entries {
        by_dataset.entry(e.dataset.as_str()).or_default().push(e);
    }
    if by_dataset.values().any(|v| v.len() < 3) {
        return Err(Error::invalid("metric correlation needs at least three methods per dataset"));
    }
    // column per metric over all (dataset, method) rows
    let mut columns: Vec<Vec<Option<f64>>> = vec![Vec::new(); metrics.len()];
    for rows in by_dataset.values() {
        for (col, metric) in columns.iter_mut().zip(metrics) {
            let vals: Vec<Option<f64>> = rows.iter().map(|e| e.metrics.get(metric).copied().flatten()).collect();
            let present: Vec<f64> = vals.iter().flatten().copied().collect();
            let lo = present.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for v in vals {
                col.push(match v {
                    Some(v) if hi > lo => Some((v - lo) / (hi - lo)),
                    _ => None,
                });
            }
        }
    }
    let k = metrics.len();
    let mut cells = vec![vec![None; k]; k];
    for i in 0..k {
        for j in i..k {
            let (a, b): (Vec<f64>, Vec<f64>) =
                columns[i].iter().zip(&columns[j]).filter_map(|(x, y)| Some(((*x)?, (*y)?))).unzip();
            let rho = if i == j { spearman(&a, &b).map(|_| 1.0) } else { spearman(&a, &b) };
            cells[i][j] = rho;
            cells[j][i] = rho;
        }
    }
    Ok(CorrelationMatrix { metrics: metrics.to_vec(), cells })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub entries: Vec<MethodEntry>,
    /// metric → method → mean rank across datasets.
    pub ranks: BTreeMap<Metric, BTreeMap<String, Option<f64>>>,
    /// dataset → uncertainty method with the highest In-Accuracy.
    pub best_ue: BTreeMap<String, String>,
}

pub const BEST_UE: &str = "Best UE";

impl MetricsReport {
    pub fn build(mut entries: Vec<MethodEntry>) -> Result<Self> {
        entries.sort_by(|a, b| (&a.dataset, a.kind, &a.method).cmp(&(&b.dataset, b.kind, &b.method)));
        let mut ranks = BTreeMap::new();
        let methods_per_dataset = {
            let mut m: BTreeMap<&str, usize> = BTreeMap::new();
            for e in &entries {
                *m.entry(e.dataset.as_str()).or_default() += 1;
            }
            m
        };
        if methods_per_dataset.values().all(|c| *c >= 2) && !entries.is_empty() {
            for metric in Metric::ALL {
                let mut values: BTreeMap<String, BTreeMap<String, Option<f64>>> = BTreeMap::new();
                for e in &entries {
                    values
                        .entry(e.dataset.clone())
                        .or_default()
                        .insert(e.method.clone(), e.metrics.get(&metric).copied().flatten());
                }
                ranks.insert(metric, rank_table(&values, metric.higher_is_better())?);
            }
        }
        let mut best_ue: BTreeMap<String, (String, f64)> = BTreeMap::new();
        for e in entries.iter().filter(|e| e.kind == MethodKind::Uncertainty) {
            let Some(v) = e.metrics.get(&Metric::InAcc).copied().flatten() else {
                continue;
            };
            match best_ue.get(&e.dataset) {
                Some((_, b)) if *b >= v => {}
                _ => {
                    best_ue.insert(e.dataset.clone(), (e.method.clone(), v));
                }
            }
        }
        Ok(MetricsReport { entries, ranks, best_ue: best_ue.into_iter().map(|(d, (m, _))| (d, m)).collect() })
    }

    pub fn datasets(&self) -> Vec<&str> {
        let mut d: Vec<&str> = self.entries.iter().map(|e| e.dataset.as_str()).collect();
        d.dedup();
        d
    }

    pub fn get(&self, dataset: &str, method: &str) -> Option<&MethodEntry> {
        self.entries.iter().find(|e| e.dataset == dataset && e.method == method)
    }

    /// Method names in display order: baselines, uncertainty methods, oracles.
    fn method_order(&self) -> Vec<(MethodKind, String)> {
        let mut m: Vec<(MethodKind, String)> = self.entries.iter().map(|e| (e.kind, e.method.clone())).collect();
        m.sort();
        m.dedup();
        m
    }

    /// One row per dataset × method × metric; nulls are empty cells.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["dataset", "method", "kind", "metric", "value"])?;
        for e in &self.entries {
            let kind = match e.kind {
                MethodKind::Baseline => "baseline",
                MethodKind::Uncertainty => "uncertainty",
                MethodKind::Oracle => "oracle",
            };
            for (metric, v) in &e.metrics {
                w.write_record([e.dataset.as_str(), &e.method, kind, metric.name(), &fmt_opt(*v, None)])?;
            }
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }

    pub fn ranks_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["metric", "method", "mean_rank"])?;
        for (metric, per_method) in &self.ranks {
            for (method, r) in per_method {
                w.write_record([metric.name(), method.as_str(), &fmt_opt(*r, None)])?;
            }
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }

    /// Downstream quality and efficiency table.
    pub fn table1_markdown(&self) -> String {
        self.markdown(&[Metric::InAcc, Metric::Lmc, Metric::Rc], true)
    }

    /// Self-knowledge table.
    pub fn table2_markdown(&self) -> String {
        self.markdown(&[Metric::Accuracy, Metric::Spearman, Metric::RocAuc], false)
    }

    fn value(&self, dataset: &str, method: &str, metric: Metric) -> Option<f64> {
        self.get(dataset, method).and_then(|e| e.metrics.get(&metric).copied().flatten())
    }

    fn markdown(&self, metrics: &[Metric], with_baselines: bool) -> String {
        let datasets = self.datasets();
        let mut out = String::from("| Method |");
        let mut rule = String::from("|---|");
        for d in &datasets {
            for m in metrics {
                let arrow = if m.higher_is_better() { "↑" } else { "↓" };
                let _ = write!(out, " {d} {} {arrow} |", m.name());
                rule.push_str("---|");
            }
        }
        out.push('\n');
        out.push_str(&rule);
        out.push('\n');
        let row = |out: &mut String, label: &str, pick: &dyn Fn(&str, Metric) -> Option<f64>| {
            let _ = write!(out, "| {label} |");
            for d in &datasets {
                for m in metrics {
                    let v = pick(d, *m);
                    let _ = write!(out, " {} |", fmt_opt(v, Some(decimals(*m))));
                }
            }
            out.push('\n');
        };
        for (kind, method) in self.method_order() {
            if kind == MethodKind::Baseline && !with_baselines {
                continue;
            }
            row(&mut out, &method, &|d, m| self.value(d, &method, m));
        }
        if !self.best_ue.is_empty() {
            row(&mut out, BEST_UE, &|d, m| self.best_ue.get(d).and_then(|best| self.value(d, best, m)));
        }
        out
    }
}

fn decimals(m: Metric) -> usize {
    match m {
        Metric::Lmc => 2,
        Metric::Rc => 2,
        Metric::Accuracy | Metric::Spearman | Metric::RocAuc => 2,
        _ => 3,
    }
}

pub fn fmt_opt(v: Option<f64>, decimals: Option<usize>) -> String {
    match (v, decimals) {
        (None, Some(_)) => "-".into(),
        (None, None) => String::new(),
        (Some(v), Some(d)) => format!("{v:.d$}"),
        (Some(v), None) => format!("{v}"),
    }
}
