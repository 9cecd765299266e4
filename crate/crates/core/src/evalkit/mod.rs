//! Evaluation: QA correctness, efficiency and self-knowledge metrics, rank
//! aggregation and report rendering.

pub mod qa;
pub mod report;
pub mod selfknow;

pub use qa::{exact_match, f1, in_accuracy, normalize_answer};
pub use report::{
    compute_metrics, metric_correlation, rank_table, MethodEntry, MethodKind, Metric, MetricRow, MetricsReport,
};
pub use selfknow::{
    accuracy, average_ranks, efficiency, over_under_confidence, pearson, roc_auc, spearman, Confidence,
};
