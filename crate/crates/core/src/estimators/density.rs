//! Gaussian density scores over hidden-state features: Mahalanobis distance,
//! its background-relative variant and a PCA-reduced robust variant.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SHRINKAGE: f64 = 0.1;
pub const DEFAULT_RDE_COMPONENTS: usize = 100;

/// Mean and shrunk covariance of a feature set. The precision matrix is
/// stored so scoring needs no factorization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityStats {
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub precision: Vec<Vec<f64>>,
    pub shrinkage: f64,
    /// Jitter added to the diagonal to make the covariance positive-definite.
    pub jitter: f64,
}

impl DensityStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

fn to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if d == 0 {
        return Err(Error::invalid("feature vectors are empty"));
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != d) {
        return Err(Error::invalid(format!("feature row {bad} has dimension {} instead of {d}", rows[bad].len())));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("features contain non-finite values"));
    }
    Ok(DMatrix::from_fn(n, d, |i, j| rows[i][j]))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn mean_and_covariance(x: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = x.nrows();
    let mean = DVector::from_fn(x.ncols(), |j, _| x.column(j).sum() / n as f64);
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    (mean, cov)
}

/// Fits mean and covariance `(1 − λ)·S + λ·diag(S)`; if the result is not
/// positive-definite a growing diagonal jitter is added until it is.
pub fn fit_density(rows: &[Vec<f64>], shrinkage: f64) -> Result<DensityStats> {
    if rows.len() < 2 {
        return Err(Error::invalid(format!("density fit needs ≥ 2 vectors, got {}", rows.len())));
    }
    if !(0.0..=1.0).contains(&shrinkage) {
        return Err(Error::invalid(format!("shrinkage {shrinkage} outside [0, 1]")));
    }
    let x = to_matrix(rows)?;
    let (mean, s) = mean_and_covariance(&x);
    let d = s.nrows();
    let mut cov = s.clone() * (1.0 - shrinkage);
    for i in 0..d {
        cov[(i, i)] += shrinkage * s[(i, i)];
    }
    let scale = (cov.trace() / d as f64).max(1.0);
    let mut jitter = 0.0;
    let mut next = 1e-10 * scale;
    let chol = loop {
        let mut c = cov.clone();
        for i in 0..d {
            c[(i, i)] += jitter;
        }
        if let Some(ch) = Cholesky::new(c) {
            if ch.l().diagonal().iter().all(|v| *v > 1e-150) {
                break ch;
            }
        }
        jitter = next;
        next *= 10.0;
        if jitter > 1e6 * scale {
            return Err(Error::data("covariance could not be made positive-definite"));
        }
    };
    for i in 0..d {
        cov[(i, i)] += jitter;
    }
    Ok(DensityStats {
        mean: mean.iter().copied().collect(),
        covariance: rows_of(&cov),
        precision: rows_of(&chol.inverse()),
        shrinkage,
        jitter,
    })
}

pub fn mahalanobis(stats: &DensityStats, x: &[f64]) -> Result<f64> {
    let d = stats.dim();
    if x.len() != d {
        return Err(Error::invalid(format!("feature dimension {} does not match fitted dimension {d}", x.len())));
    }
    let diff: Vec<f64> = x.iter().zip(&stats.mean).map(|(a, m)| a - m).collect();
    let mut q = 0.0;
    for i in 0..d {
        let row = &stats.precision[i];
        q += diff[i] * (0..d).map(|j| row[j] * diff[j]).sum::<f64>();
    }
    Ok(q.max(0.0))
}

pub fn relative_mahalanobis(task: &DensityStats, background: &DensityStats, x: &[f64]) -> Result<f64> {
    if task.dim() != background.dim() {
        return Err(Error::invalid(format!(
            "task dimension {} differs from background dimension {}",
            task.dim(),
            background.dim()
        )));
    }
    Ok(mahalanobis(task, x)? - mahalanobis(background, x)?)
}

fn project(center: &[f64], components: &[Vec<f64>], x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != center.len() {
        return Err(Error::invalid(format!(
            "feature dimension {} does not match fitted dimension {}",
            x.len(),
            center.len()
        )));
    }
    Ok(components.iter().map(|c| c.iter().zip(x).zip(center).map(|((w, v), m)| w * (v - m)).sum()).collect())
}

/// Principal-component projection followed by a shrunk Gaussian in the
/// reduced space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdeModel {
    pub center: Vec<f64>,
    /// Principal directions as rows, by descending explained variance.
    pub components: Vec<Vec<f64>>,
    pub stats: DensityStats,
}

impl RdeModel {
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        project(&self.center, &self.components, x)
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        mahalanobis(&self.stats, &self.project(x)?)
    }
}

pub fn fit_rde(rows: &[Vec<f64>], q: usize, shrinkage: f64) -> Result<RdeModel> {
    let x = to_matrix(rows)?;
    let (n, d) = x.shape();
    if q == 0 || q > d.min(n) {
        return Err(Error::invalid(format!("RDE needs 1 ≤ q ≤ min(d, n) = {}, got {q}", d.min(n))));
    }
    if n < 2 {
        return Err(Error::invalid("RDE needs ≥ 2 training vectors"));
    }
    let (mean, cov) = mean_and_covariance(&x);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|a, b| eig.eigenvalues[*b].total_cmp(&eig.eigenvalues[*a]).then(a.cmp(b)));
    let components: Vec<Vec<f64>> = order[..q]
        .iter()
        .map(|c| {
            let mut v: Vec<f64> = eig.eigenvectors.column(*c).iter().copied().collect();
            // sign convention: largest-magnitude entry positive
            let pivot = v.iter().copied().fold(0.0f64, |acc, e| if e.abs() > acc.abs() { e } else { acc });
            if pivot < 0.0 {
                v.iter_mut().for_each(|e| *e = -*e);
            }
            v
        })
        .collect();
    let center: Vec<f64> = mean.iter().copied().collect();
    let projected: Vec<Vec<f64>> = rows.iter().map(|r| project(&center, &components, r)).collect::<Result<_>>()?;
    let stats = fit_density(&projected, shrinkage)?;
    Ok(RdeModel { center, components, stats })
}
