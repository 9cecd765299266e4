//! Scores built from the agreement between sampled answers.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::similarity::Similarity;
use crate::error::{Error, Result};

/// Symmetric matrix of pairwise similarities with a unit diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SimilarityMatrix {
    /// Builds a matrix from the upper triangle of `rows`, forcing symmetry and
    /// a unit diagonal.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("similarity matrix must be square and non-empty"));
        }
        let mut m = SimilarityMatrix { n, data: vec![1.0; n * n] };
        for i in 0..n {
            for j in i + 1..n {
                let v = rows[i][j];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::invalid(format!("similarity {v} outside [0, 1]")));
                }
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.data)
    }
}

pub fn similarity_matrix<S: AsRef<str>>(texts: &[S], sim: &dyn Similarity) -> Result<SimilarityMatrix> {
    let n = texts.len();
    if n == 0 {
        return Err(Error::invalid("no samples"));
    }
    let mut m = SimilarityMatrix { n, data: vec![1.0; n * n] };
    for i in 0..n {
        for j in i + 1..n {
            let v = sim.similarity(texts[i].as_ref(), texts[j].as_ref())?;
            m.set(i, j, v.clamp(0.0, 1.0));
        }
    }
    Ok(m)
}

pub fn lexical_similarity_score(m: &SimilarityMatrix) -> Result<f64> {
    let n = m.n();
    if n < 2 {
        return Err(Error::invalid("lexical similarity needs ≥ 2 samples"));
    }
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += m.get(i, j);
            }
        }
    }
    Ok(1.0 - s / (n * (n - 1)) as f64)
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Component label of each sample in the graph with edges `M_ij ≥ theta`.
/// Labels count up from 0 in order of first appearance.
pub fn clusters(m: &SimilarityMatrix, theta: f64) -> Vec<usize> {
    let n = m.n();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            if m.get(i, j) >= theta {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut labels = vec![usize::MAX; n];
    let mut root_label = std::collections::HashMap::new();
    for (i, label) in labels.iter_mut().enumerate() {
        let r = find(&mut parent, i);
        let next = root_label.len();
        *label = *root_label.entry(r).or_insert(next);
    }
    labels
}

pub fn num_sem_sets(m: &SimilarityMatrix, theta: f64) -> f64 {
    clusters(m, theta).into_iter().max().map_or(0, |l| l + 1) as f64
}

/// Mean pairwise dissimilarity, diagonal included.
pub fn deg_mat_score(m: &SimilarityMatrix) -> f64 {
    let n = m.n();
    m.data.iter().map(|v| 1.0 - v).sum::<f64>() / (n * n) as f64
}

/// Eigen-decomposition of the normalized Laplacian, eigenvalues ascending
/// with matching eigenvector columns.
#[derive(Debug, Clone)]
pub struct LaplacianSpectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

const EIGEN_SNAP: f64 = 1e-9;

pub fn laplacian_spectrum(m: &SimilarityMatrix) -> LaplacianSpectrum {
    let n = m.n();
    let w = m.to_dmatrix();
    let inv_sqrt_deg: Vec<f64> = (0..n).map(|i| 1.0 / w.row(i).sum().sqrt()).collect();
    let mut l = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            l[(i, j)] -= inv_sqrt_deg[i] * w[(i, j)] * inv_sqrt_deg[j];
        }
    }
    let eig = SymmetricEigen::new(l);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
    let eigenvalues = order
        .iter()
        .map(|i| {
            let v = eig.eigenvalues[*i];
            if v.abs() < EIGEN_SNAP {
                0.0
            } else {
                v.clamp(0.0, 2.0)
            }
        })
        .collect();
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    LaplacianSpectrum { eigenvalues, eigenvectors }
}

pub fn eig_val_laplacian_score(spectrum: &LaplacianSpectrum) -> f64 {
    spectrum
        .eigenvalues
        .iter()
        .map(|l| 1.0 - l)
        // eigenvalues within rounding of 1 contribute nothing
        .filter(|c| *c > EIGEN_SNAP)
        .sum()
}

/// Eigenvalues at or above this bound belong to within-cluster variation and
/// are left out of the spectral embedding.
pub const ECCENTRICITY_EIGEN_BOUND: f64 = 0.9;

/// Spread of the spectral embedding: Frobenius norm of the row offsets from
/// their centroid, using the eigenvectors of the `k` smallest eigenvalues
/// that stay below [`ECCENTRICITY_EIGEN_BOUND`] (at least one).
pub fn eccentricity_score(spectrum: &LaplacianSpectrum, k: usize) -> Result<f64> {
    let n = spectrum.eigenvalues.len();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("eccentricity needs 1 ≤ k ≤ {n}, got {k}")));
    }
    let used = spectrum.eigenvalues[..k].iter().take_while(|l| **l < ECCENTRICITY_EIGEN_BOUND).count().max(1);
    let emb = spectrum.eigenvectors.columns(0, used);
    let mut total = 0.0;
    for c in 0..used {
        let col = emb.column(c);
        let mean = col.sum() / n as f64;
        total += col.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    }
    Ok(total.sqrt())
}

/// Entropy of the probability mass aggregated over similarity clusters.
pub fn semantic_entropy(probs: &[f64], m: &SimilarityMatrix, theta: f64) -> Result<f64> {
    if probs.len() != m.n() {
        return Err(Error::invalid(format!("{} probabilities for {} samples", probs.len(), m.n())));
    }
    let total: f64 = probs.iter().filter(|p| **p > 0.0).sum();
    if !(total > 0.0) {
        return Err(Error::data("degenerate probabilities"));
    }
    let labels = clusters(m, theta);
    let mut mass = vec![0.0; labels.iter().max().map_or(0, |l| l + 1)];
    for (l, p) in labels.iter().zip(probs) {
        mass[*l] += p.max(0.0);
    }
    Ok(mass.iter().map(|q| q / total).filter(|q| *q > 0.0).map(|q| -q * q.ln()).sum::<f64>().max(0.0))
}
