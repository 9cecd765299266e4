//! The Hybrid feature vector: every configured score, z-scored with
//! training-split statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::MethodId;
use crate::error::{Error, Result};

pub const STD_FLOOR: f64 = 1e-9;

/// Ordered list of the methods making up a feature vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Manifest(pub Vec<MethodId>);

impl Manifest {
    /// Parses method ids, rejecting unknown or repeated ids and Hybrid itself.
    pub fn parse<S: AsRef<str>>(ids: &[S]) -> Result<Self> {
        let mut out = Vec::new();
        for id in ids {
            let m: MethodId = id.as_ref().parse()?;
            if m == MethodId::Hybrid {
                return Err(Error::invalid("the Hybrid manifest cannot contain hybrid"));
            }
            if out.contains(&m) {
                return Err(Error::invalid(format!("method {m} listed twice in manifest")));
            }
            out.push(m);
        }
        if out.is_empty() {
            return Err(Error::invalid("manifest is empty"));
        }
        Ok(Manifest(out))
    }

    pub fn methods(&self) -> &[MethodId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Stable digest of the ordered ids, stored with fitted deciders.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for m in &self.0 {
            h.update(m.id().as_bytes());
            h.update([0u8]);
        }
        hex::encode(h.finalize())[..16].to_owned()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridStats {
    pub manifest: Manifest,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

/// Per-method mean and population standard deviation over the training
/// rows where the method is present.
pub fn fit_hybrid_stats(manifest: &Manifest, train: &[BTreeMap<MethodId, f64>]) -> HybridStats {
    let mut means = Vec::with_capacity(manifest.len());
    let mut stds = Vec::with_capacity(manifest.len());
    for m in manifest.methods() {
        let vals: Vec<f64> = train.iter().filter_map(|row| row.get(m).copied()).filter(|v| v.is_finite()).collect();
        if vals.is_empty() {
            means.push(0.0);
            stds.push(1.0);
            continue;
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
        means.push(mean);
        stds.push(var.sqrt());
    }
    HybridStats { manifest: manifest.clone(), means, stds }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridFeatureRow {
    pub example_id: String,
    /// Raw scores in manifest order; `None` where the method is missing.
    pub raw: Vec<Option<f64>>,
    pub z: Vec<f64>,
    pub imputed: Vec<bool>,
}

pub fn assemble_hybrid(example_id: &str, scores: &BTreeMap<MethodId, f64>, stats: &HybridStats) -> HybridFeatureRow {
    let mut raw = Vec::with_capacity(stats.manifest.len());
    let mut z = Vec::with_capacity(stats.manifest.len());
    let mut imputed = Vec::with_capacity(stats.manifest.len());
    for (i, m) in stats.manifest.methods().iter().enumerate() {
        let v = scores.get(m).copied().filter(|v| v.is_finite());
        raw.push(v);
        imputed.push(v.is_none());
        z.push(v.map_or(0.0, |v| (v - stats.means[i]) / stats.stds[i].max(STD_FLOOR)));
    }
    HybridFeatureRow { example_id: example_id.to_owned(), raw, z, imputed }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z_scoring_and_imputation() {
        let manifest = Manifest::parse(&["max_entropy", "perplexity", "ptrue"]).unwrap();
        let train: Vec<BTreeMap<MethodId, f64>> = (0..4)
            .map(|i| {
                [(MethodId::MaxEntropy, f64::from(i)), (MethodId::Perplexity, 2.0), (MethodId::PTrue, 0.5)]
                    .into_iter()
                    .collect()
            })
            .collect();
        let stats = fit_hybrid_stats(&manifest, &train);
        let row: BTreeMap<MethodId, f64> =
            [(MethodId::MaxEntropy, 1.5), (MethodId::Perplexity, 7.0)].into_iter().collect();
        let h = assemble_hybrid("e", &row, &stats);
        assert_eq!(h.z.len(), 3);
        assert_eq!(h.z[0], 0.0);
        assert_eq!(h.z[1], 5.0 / STD_FLOOR);
        assert_eq!((h.z[2], h.imputed[2], h.raw[2]), (0.0, true, None));
        let same: BTreeMap<MethodId, f64> = [(MethodId::Perplexity, 2.0)].into_iter().collect();
        assert_eq!(assemble_hybrid("e", &same, &stats).z[1], 0.0);
    }

    #[test]
    fn manifest_validation() {
        assert!(Manifest::parse(&["max_entropy", "bogus"]).is_err());
        assert!(Manifest::parse(&["hybrid"]).is_err());
        assert!(Manifest::parse(&["sar", "sar"]).is_err());
        let a = Manifest::parse(&["sar", "ptrue"]).unwrap();
        let b = Manifest::parse(&["ptrue", "sar"]).unwrap();
        assert_ne!(a.hash(), b.hash());
    }
}
