//! Single-score threshold chosen to maximize simulated In-Accuracy.

use serde::{Deserialize, Serialize};

use super::DecisionTable;
use crate::error::{Error, Result};

pub const GRID_SIZE: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    LogGrid200,
    Midpoints,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Retrieve when the score is strictly above the threshold.
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdParams {
    pub theta: f64,
    pub direction: Direction,
    pub mode: ThresholdMode,
    /// All training scores were equal; the model applies one action to every input.
    #[serde(default)]
    pub degenerate: bool,
}

impl ThresholdParams {
    pub fn predict(&self, score: f64) -> u8 {
        match self.direction {
            Direction::Above => u8::from(score > self.theta),
        }
    }
}

/// Candidate thresholds; always includes one below every score (retrieve
/// all) and the maximum score (retrieve none).
pub fn candidates(scores: &[f64], mode: ThresholdMode) -> Vec<f64> {
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = vec![lo - 1.0, hi];
    if hi > lo {
        match mode {
            ThresholdMode::Midpoints => {
                let mut s = scores.to_vec();
                s.sort_by(f64::total_cmp);
                s.dedup();
                out.extend(s.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0));
            }
            ThresholdMode::LogGrid200 => {
                let range = hi - lo;
                let eps = (1e-6 * range).max(1e-12);
                let (a, b) = (eps.ln(), (range + eps).ln());
                for i in 0..GRID_SIZE {
                    let g = (a + (b - a) * i as f64 / (GRID_SIZE - 1) as f64).exp();
                    out.push(g - eps + lo);
                }
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Exact counts for one threshold: (correct answers, retrievals).
fn evaluate(sorted: &[(f64, bool, bool)], suffix_rag: &[usize], prefix_norag: &[usize], theta: f64) -> (usize, usize) {
    let cut = sorted.partition_point(|(s, _, _)| *s <= theta);
    (prefix_norag[cut] + suffix_rag[cut], sorted.len() - cut)
}

pub fn fit_threshold(table: &DecisionTable, mode: ThresholdMode) -> Result<ThresholdParams> {
    if table.dim() != 1 {
        return Err(Error::invalid(format!("threshold decider needs one score, table has {} features", table.dim())));
    }
    if table.rows.is_empty() {
        return Err(Error::invalid("empty decision table"));
    }
    let mut sorted: Vec<(f64, bool, bool)> =
        table.rows.iter().map(|r| (r.features[0], r.correct_norag, r.correct_rag)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = sorted.len();
    let mut prefix_norag = vec![0usize; n + 1];
    let mut suffix_rag = vec![0usize; n + 1];
    for i in 0..n {
        prefix_norag[i + 1] = prefix_norag[i] + usize::from(sorted[i].1);
    }
    for i in (0..n).rev() {
        suffix_rag[i] = suffix_rag[i + 1] + usize::from(sorted[i].2);
    }
    let scores: Vec<f64> = sorted.iter().map(|r| r.0).collect();
    let mut best: Option<(f64, usize, usize)> = None;
    for theta in candidates(&scores, mode) {
        let (correct, retrieved) = evaluate(&sorted, &suffix_rag, &prefix_norag, theta);
        let better = match best {
            None => true,
            // candidates ascend, so an equal score keeps the smaller θ
            Some((_, c, r)) => correct > c || (correct == c && retrieved < r),
        };
        if better {
            best = Some((theta, correct, retrieved));
        }
    }
    let (theta, _, _) = best.expect("candidate list is never empty");
    Ok(ThresholdParams { theta, direction: Direction::Above, mode, degenerate: scores[0] == scores[n - 1] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deciders::{simulated_in_accuracy, DecisionTable};

    #[test]
    fn separable_example() {
        let t =
            DecisionTable::from_scores(&[1.0, 2.0, 3.0, 4.0], &[true, true, false, false], &[false, false, true, true]);
        for mode in [ThresholdMode::Midpoints, ThresholdMode::LogGrid200] {
            let p = fit_threshold(&t, mode).unwrap();
            assert!(p.theta >= 2.0 && p.theta < 3.0, "{mode:?} θ={}", p.theta);
            let d: Vec<u8> = t.rows.iter().map(|r| p.predict(r.features[0])).collect();
            assert_eq!(simulated_in_accuracy(&t, &d), 1.0);
        }
    }

    #[test]
    fn never_retrieve_when_retrieval_never_helps() {
        let t = DecisionTable::from_scores(&[0.3, 0.1, 0.9], &[true; 3], &[false; 3]);
        let p = fit_threshold(&t, ThresholdMode::LogGrid200).unwrap();
        assert!(p.theta >= 0.9);
        assert!(t.rows.iter().all(|r| p.predict(r.features[0]) == 0));
    }

    #[test]
    fn single_and_constant_rows() {
        let t = DecisionTable::from_scores(&[0.5], &[false], &[true]);
        let p = fit_threshold(&t, ThresholdMode::Midpoints).unwrap();
        assert_eq!(p.predict(0.5), 1);
        let t = DecisionTable::from_scores(&[2.0, 2.0, 2.0], &[false, false, true], &[true, true, true]);
        let p = fit_threshold(&t, ThresholdMode::Midpoints).unwrap();
        assert!(p.degenerate);
        assert_eq!(p.predict(2.0), 1);
    }
}
