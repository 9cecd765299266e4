//! How much each uncertainty method depends on picking the right classifier.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalkit::average_ranks;

/// method → dataset → classifier → In-Accuracy.
pub type ClassifierTable = BTreeMap<String, BTreeMap<String, BTreeMap<String, f64>>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankDifference {
    pub method: String,
    /// Rank averaged over datasets when each method uses its mean classifier score.
    pub mean_rank: f64,
    /// Same, using the best classifier per dataset.
    pub max_rank: f64,
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    /// Mean over datasets of (best classifier − mean classifier).
    pub drops: BTreeMap<String, f64>,
    pub ranks: Vec<RankDifference>,
}

fn ranks_by(summary: &BTreeMap<String, BTreeMap<String, f64>>, datasets: &[String]) -> BTreeMap<String, f64> {
    let methods: Vec<&String> = summary.keys().collect();
    let mut acc: BTreeMap<String, f64> = BTreeMap::new();
    for d in datasets {
        let neg: Vec<f64> = methods.iter().map(|m| -summary[*m][d]).collect();
        for (m, r) in methods.iter().zip(average_ranks(&neg)) {
            *acc.entry((*m).clone()).or_insert(0.0) += r / datasets.len() as f64;
        }
    }
    acc
}

pub fn classifier_sensitivity(table: &ClassifierTable) -> Result<SensitivityReport> {
    let mut datasets: Option<Vec<String>> = None;
    let mut max_of: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut mean_of: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut drops = BTreeMap::new();
    for (method, per_ds) in table {
        let ds: Vec<String> = per_ds.keys().cloned().collect();
        if ds.is_empty() {
            return Err(Error::invalid(format!("method {method} has no datasets")));
        }
        match &datasets {
            None => datasets = Some(ds),
            Some(d) if *d != ds => return Err(Error::invalid(format!("method {method} covers different datasets"))),
            Some(_) => {}
        }
        let mut drop = 0.0;
        for (d, per_clf) in per_ds {
            if per_clf.len() < 2 {
                return Err(Error::invalid(format!("{method}/{d}: need at least 2 classifiers")));
            }
            let max = per_clf.values().copied().fold(f64::NEG_INFINITY, f64::max);
            let mean = per_clf.values().sum::<f64>() / per_clf.len() as f64;
            drop += max - mean;
            max_of.entry(method.clone()).or_default().insert(d.clone(), max);
            mean_of.entry(method.clone()).or_default().insert(d.clone(), mean);
        }
        drops.insert(method.clone(), drop / per_ds.len() as f64);
    }
    let datasets = datasets.ok_or_else(|| Error::invalid("empty classifier table"))?;
    let mean_ranks = ranks_by(&mean_of, &datasets);
    let max_ranks = ranks_by(&max_of, &datasets);
    let ranks = mean_ranks
        .iter()
        .map(|(m, mean_rank)| RankDifference {
            method: m.clone(),
            mean_rank: *mean_rank,
            max_rank: max_ranks[m],
            difference: mean_rank - max_ranks[m],
        })
        .collect();
    Ok(SensitivityReport { drops, ranks })
}
