//! k-nearest-neighbour vote over standardized features.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_K: usize = 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

pub fn fit_knn(x: &[Vec<f64>], y: &[u8], k: usize) -> Result<KnnParams> {
    if x.is_empty() {
        return Err(Error::invalid("k-NN needs at least one training row"));
    }
    if x.len() != y.len() {
        return Err(Error::invalid(format!("{} feature rows for {} labels", x.len(), y.len())));
    }
    if k == 0 {
        return Err(Error::invalid("k must be ≥ 1"));
    }
    Ok(KnnParams { k: k.min(x.len()), points: x.to_vec(), labels: y.to_vec() })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

impl KnnParams {
    /// Majority label among the k closest points (distance ties resolved by
    /// training order); a split vote retrieves.
    pub fn predict(&self, x: &[f64]) -> u8 {
        let mut d: Vec<(f64, usize)> = self.points.iter().enumerate().map(|(i, p)| (sq_dist(p, x), i)).collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let ones = d[..self.k].iter().filter(|(_, i)| self.labels[*i] == 1).count();
        u8::from(2 * ones >= self.k)
    }
}
