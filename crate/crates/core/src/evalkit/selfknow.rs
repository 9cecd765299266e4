//! Self-knowledge metrics: how well an uncertainty score or a retrieve/skip
//! decision separates questions the model answers wrongly without retrieval.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RunRecord;

/// Mean LM calls and mean retriever calls per question.
pub fn efficiency(records: &[RunRecord]) -> Result<(f64, f64)> {
    if records.is_empty() {
        return Err(Error::invalid("no run records"));
    }
    let n = records.len() as f64;
    let lm: u64 = records.iter().map(|r| u64::from(r.lm_calls)).sum();
    let rc: u64 = records.iter().map(|r| u64::from(r.retrieval_calls)).sum();
    Ok((lm as f64 / n, rc as f64 / n))
}

/// 1-based ranks with ties sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|a, b| values[*a].total_cmp(&values[*b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for k in &order[i..=j] {
            ranks[*k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. `None` when only one class is present.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len(), "scores and labels differ in length");
    let n_pos = labels.iter().filter(|y| **y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let ranks = average_ranks(scores);
    let pos_rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, y)| **y == 1).map(|(r, _)| r).sum();
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len();
    if n < 2 || n != b.len() {
        return None;
    }
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson correlation of tie-averaged ranks. `None` on zero variance.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    pearson(&average_ranks(a), &average_ranks(b))
}

pub fn accuracy(pred: &[u8], labels: &[u8]) -> f64 {
    assert_eq!(pred.len(), labels.len(), "predictions and labels differ in length");
    if pred.is_empty() {
        return 0.0;
    }
    pred.iter().zip(labels).filter(|(p, y)| p == y).count() as f64 / pred.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confidence {
    /// Among skipped retrievals, the fraction where the answer was wrong.
    pub over: f64,
    /// Among retrievals, the fraction where the answer was already right.
    pub under: f64,
    /// No question was skipped; `over` is reported as 0.
    pub over_undefined: bool,
    /// No question was retrieved for; `under` is reported as 0.
    pub under_undefined: bool,
}

pub fn over_under_confidence(pred: &[u8], labels: &[u8]) -> Confidence {
    assert_eq!(pred.len(), labels.len(), "predictions and labels differ in length");
    let (mut skip, mut skip_wrong, mut retr, mut retr_wrong) = (0u64, 0u64, 0u64, 0u64);
    for (p, y) in pred.iter().zip(labels) {
        if *p == 0 {
            skip += 1;
            skip_wrong += u64::from(p != y);
        } else {
            retr += 1;
            retr_wrong += u64::from(p != y);
        }
    }
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    Confidence {
        over: ratio(skip_wrong, skip),
        under: ratio(retr_wrong, retr),
        over_undefined: skip == 0,
        under_undefined: retr == 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.9, 0.1], &[1, 0]), Some(1.0));
        assert_eq!(roc_auc(&[2.0, 2.0, 2.0], &[1, 0, 1]), Some(0.5));
        assert_eq!(roc_auc(&[3.0, 2.0, 1.0], &[1, 0, 1]), Some(0.5));
        assert_eq!(roc_auc(&[1.0, 2.0], &[1, 1]), None);
    }

    #[test]
    fn spearman_examples() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[0.0, 1.0, 2.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&[3.0, 2.0, 1.0], &[0.0, 1.0, 2.0]).unwrap() + 1.0).abs() < 1e-12);
        let rho = spearman(&[1.0, 2.0, 3.0, 4.0], &[0.0, 1.0, 0.0, 1.0]).unwrap();
        assert!((rho - 1.0 / 5f64.sqrt()).abs() < 1e-12);
        assert_eq!(spearman(&[1.0, 1.0], &[0.0, 1.0]), None);
    }

    #[test]
    fn confidence_examples() {
        let c = over_under_confidence(&[0, 0, 1], &[1, 0, 0]);
        assert_eq!((c.over, c.under), (0.5, 1.0));
        let c = over_under_confidence(&[1, 0, 1], &[1, 0, 1]);
        assert_eq!((c.over, c.under), (0.0, 0.0));
        let c = over_under_confidence(&[1, 1, 1, 1], &[1, 0, 1, 1]);
        assert!(c.over_undefined && !c.under_undefined);
        assert_eq!((c.over, c.under), (0.0, 0.25));
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[5.0, 1.0, 5.0, 3.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }
}
