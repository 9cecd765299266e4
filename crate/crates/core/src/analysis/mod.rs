//! Transfer, significance, capacity and feature-attribution analyses.

pub mod complexity;
pub mod importance;
pub mod ood;
pub mod sensitivity;
pub mod stats;

pub use complexity::{
    dense_lambda_max, power_lambda_max, rademacher_estimate, sharpness, ComplexityResult, SharpnessResult,
};
pub use importance::{hybrid_feature_importance, importance_rank_table, FeatureImportance, ImportanceReport};
pub use ood::{ood_matrix, relative_change, transfer_grid_csv, TransferCell};
pub use sensitivity::{classifier_sensitivity, RankDifference, SensitivityReport};
pub use stats::{friedman, nemenyi, FriedmanResult, NemenyiResult, PValueMethod};
