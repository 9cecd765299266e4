//! Which features a fitted Hybrid decider leans on.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::deciders::{DeciderModel, DeciderParams};
use crate::error::{Error, Result};
use crate::evalkit::{average_ranks, pearson};

pub const COLLINEARITY_THRESHOLD: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    pub importance: f64,
    pub rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    /// Sorted by descending importance, name order among equals.
    pub features: Vec<FeatureImportance>,
    /// `"abs_coefficient"` or `"gini_decrease"`.
    pub measure: String,
    pub degenerate: bool,
    /// Feature pairs whose training columns correlate above the threshold.
    pub collinear: Vec<(String, String, f64)>,
}

/// |coefficient| on standardized features for logistic deciders; total
/// Gini decrease for trees. `train_x` enables the collinearity check.
pub fn hybrid_feature_importance(
    model: &DeciderModel,
    feature_names: &[String],
    train_x: Option<&[Vec<f64>]>,
) -> Result<ImportanceReport> {
    let (values, measure) = match &model.params {
        DeciderParams::Logreg { model, .. } => {
            (model.weights.iter().map(|w| w.abs()).collect::<Vec<_>>(), "abs_coefficient")
        }
        DeciderParams::Tree(t) => (t.importance.clone(), "gini_decrease"),
        _ => {
            return Err(Error::Unsupported(format!(
                "feature importance needs a logistic or tree decider, got {}",
                model.kind()
            )))
        }
    };
    if values.len() != feature_names.len() {
        return Err(Error::invalid(format!("{} names for {} features", feature_names.len(), values.len())));
    }
    let degenerate = values.iter().all(|v| *v == 0.0);
    let neg: Vec<f64> = values.iter().map(|v| -v).collect();
    let ranks = average_ranks(&neg);
    let mut features: Vec<FeatureImportance> = feature_names
        .iter()
        .zip(&values)
        .zip(&ranks)
        .map(|((f, v), r)| FeatureImportance { feature: f.clone(), importance: *v, rank: *r })
        .collect();
    features.sort_by(|a, b| b.importance.total_cmp(&a.importance).then_with(|| a.feature.cmp(&b.feature)));
    let mut collinear = Vec::new();
    if let Some(x) = train_x {
        let cols: Vec<Vec<f64>> = (0..feature_names.len()).map(|j| x.iter().map(|r| r[j]).collect()).collect();
        for i in 0..cols.len() {
            for j in i + 1..cols.len() {
                if let Some(c) = pearson(&cols[i], &cols[j]) {
                    if c > COLLINEARITY_THRESHOLD {
                        collinear.push((feature_names[i].clone(), feature_names[j].clone(), c));
                    }
                }
            }
        }
    }
    Ok(ImportanceReport { features, measure: measure.to_owned(), degenerate, collinear })
}

/// feature → dataset → rank.
pub fn importance_rank_table(reports: &BTreeMap<String, ImportanceReport>) -> BTreeMap<String, BTreeMap<String, f64>> {
    let mut out: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for (dataset, rep) in reports {
        for f in &rep.features {
            out.entry(f.feature.clone()).or_default().insert(dataset.clone(), f.rank);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deciders::{fit, DeciderKind, DecisionTable, FitOptions};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|j| format!("m{j}")).collect()
    }

    #[test]
    fn label_copy_ranks_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y: Vec<u8> = (0..200).map(|_| u8::from(rng.random_bool(0.5))).collect();
        let x: Vec<Vec<f64>> =
            y.iter().map(|y| vec![rng.random_range(-1.0..1.0), f64::from(*y), rng.random_range(-1.0..1.0)]).collect();
        let m = fit(DeciderKind::Logreg, &DecisionTable::from_labels(&x, &y), &FitOptions::default(), "").unwrap();
        let r = hybrid_feature_importance(&m, &names(3), Some(&x)).unwrap();
        assert_eq!(r.features[0].feature, "m1");
        assert_eq!(r.features[0].rank, 1.0);
        assert!(r.collinear.is_empty());
    }

    #[test]
    fn duplicates_are_flagged() {
        let y: Vec<u8> = (0..40).map(|i| u8::from(i % 3 == 0)).collect();
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![f64::from(i % 7), f64::from(i % 7)]).collect();
        let m = fit(DeciderKind::Logreg, &DecisionTable::from_labels(&x, &y), &FitOptions::default(), "").unwrap();
        let r = hybrid_feature_importance(&m, &names(2), Some(&x)).unwrap();
        assert_eq!(r.collinear.len(), 1);
    }

    #[test]
    fn constant_labels_give_degenerate_ranks() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![f64::from(i), 1.0]).collect();
        let m = fit(DeciderKind::Tree, &DecisionTable::from_labels(&x, &[0; 10]), &FitOptions::default(), "").unwrap();
        let r = hybrid_feature_importance(&m, &names(2), None).unwrap();
        assert!(r.degenerate);
        assert!(r.features.iter().all(|f| f.rank == 1.5));
    }

    #[test]
    fn knn_is_unsupported() {
        let x = vec![vec![0.0], vec![1.0]];
        let m = fit(DeciderKind::Knn, &DecisionTable::from_labels(&x, &[0, 1]), &FitOptions::default(), "").unwrap();
        assert!(hybrid_feature_importance(&m, &names(1), None).is_err());
    }
}
