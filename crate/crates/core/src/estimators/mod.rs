//! The uncertainty-score catalog. Every exported value follows one
//! convention: higher means the model is less likely to know the answer.

pub mod consistency;
pub mod density;
pub mod hybrid;
pub mod logit;
pub mod similarity;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use consistency::SimilarityMatrix;
pub use density::{DensityStats, RdeModel};
pub use hybrid::{assemble_hybrid, fit_hybrid_stats, HybridFeatureRow, HybridStats, Manifest};
pub use logit::Aggregation;
pub use similarity::{LexicalSimilarity, Similarity, SimilarityFn};

use crate::error::{Error, Result};
use crate::model::{GenerationTrace, SampleSet, UncertaintyScore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodId {
    MaxEntropy,
    MeanEntropy,
    MinEntropy,
    MedianEntropy,
    Perplexity,
    MaxSequenceProb,
    MeanSequenceProb,
    MinSequenceProb,
    MedianSequenceProb,
    MeanPmi,
    MeanCpmi,
    RenyiNeg,
    FisherRao,
    Sar,
    SentenceSar,
    #[serde(rename = "ptrue")]
    PTrue,
    LexSimilarity,
    NumSemSets,
    DegMat,
    EigValLaplacian,
    Eccentricity,
    SemanticEntropy,
    Md,
    Rmd,
    Rde,
    Hybrid,
}

/// Inputs a method needs beyond the greedy answer trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Requirements {
    pub samples: bool,
    pub unconditional: bool,
    pub ptrue: bool,
    pub hidden: bool,
}

impl Requirements {
    pub fn union(self, o: Requirements) -> Requirements {
        Requirements {
            samples: self.samples || o.samples,
            unconditional: self.unconditional || o.unconditional,
            ptrue: self.ptrue || o.ptrue,
            hidden: self.hidden || o.hidden,
        }
    }

    /// Extra LM passes billed per question: force-scoring and probing.
    pub fn aux_calls(self) -> u32 {
        u32::from(self.unconditional) + u32::from(self.ptrue)
    }
}

impl MethodId {
    pub const ALL: [MethodId; 26] = [
        MethodId::MaxEntropy,
        MethodId::MeanEntropy,
        MethodId::MinEntropy,
        MethodId::MedianEntropy,
        MethodId::Perplexity,
        MethodId::MaxSequenceProb,
        MethodId::MeanSequenceProb,
        MethodId::MinSequenceProb,
        MethodId::MedianSequenceProb,
        MethodId::MeanPmi,
        MethodId::MeanCpmi,
        MethodId::RenyiNeg,
        MethodId::FisherRao,
        MethodId::Sar,
        MethodId::SentenceSar,
        MethodId::PTrue,
        MethodId::LexSimilarity,
        MethodId::NumSemSets,
        MethodId::DegMat,
        MethodId::EigValLaplacian,
        MethodId::Eccentricity,
        MethodId::SemanticEntropy,
        MethodId::Md,
        MethodId::Rmd,
        MethodId::Rde,
        MethodId::Hybrid,
    ];

    pub fn id(self) -> &'static str {
        match self {
            MethodId::MaxEntropy => "max_entropy",
            MethodId::MeanEntropy => "mean_entropy",
            MethodId::MinEntropy => "min_entropy",
            MethodId::MedianEntropy => "median_entropy",
            MethodId::Perplexity => "perplexity",
            MethodId::MaxSequenceProb => "max_sequence_prob",
            MethodId::MeanSequenceProb => "mean_sequence_prob",
            MethodId::MinSequenceProb => "min_sequence_prob",
            MethodId::MedianSequenceProb => "median_sequence_prob",
            MethodId::MeanPmi => "mean_pmi",
            MethodId::MeanCpmi => "mean_cpmi",
            MethodId::RenyiNeg => "renyi_neg",
            MethodId::FisherRao => "fisher_rao",
            MethodId::Sar => "sar",
            MethodId::SentenceSar => "sentence_sar",
            MethodId::PTrue => "ptrue",
            MethodId::LexSimilarity => "lex_similarity",
            MethodId::NumSemSets => "num_sem_sets",
            MethodId::DegMat => "deg_mat",
            MethodId::EigValLaplacian => "eig_val_laplacian",
            MethodId::Eccentricity => "eccentricity",
            MethodId::SemanticEntropy => "semantic_entropy",
            MethodId::Md => "md",
            MethodId::Rmd => "rmd",
            MethodId::Rde => "rde",
            MethodId::Hybrid => "hybrid",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            MethodId::MaxEntropy => "Max Entropy",
            MethodId::MeanEntropy => "Mean Entropy",
            MethodId::MinEntropy => "Min Entropy",
            MethodId::MedianEntropy => "Median Entropy",
            MethodId::Perplexity => "Perplexity",
            MethodId::MaxSequenceProb => "Max Sequence Probability",
            MethodId::MeanSequenceProb => "Mean Sequence Probability",
            MethodId::MinSequenceProb => "Min Sequence Probability",
            MethodId::MedianSequenceProb => "Median Sequence Probability",
            MethodId::MeanPmi => "Mean PMI",
            MethodId::MeanCpmi => "Mean CPMI",
            MethodId::RenyiNeg => "RenyiNeg",
            MethodId::FisherRao => "FisherRao",
            MethodId::Sar => "SAR",
            MethodId::SentenceSar => "SentenceSAR",
            MethodId::PTrue => "PTrue",
            MethodId::LexSimilarity => "Lex-Similarity",
            MethodId::NumSemSets => "NumSemSets",
            MethodId::DegMat => "DegMat",
            MethodId::EigValLaplacian => "EigValLaplacian",
            MethodId::Eccentricity => "Eccentricity",
            MethodId::SemanticEntropy => "Semantic Entropy",
            MethodId::Md => "MD",
            MethodId::Rmd => "RMD",
            MethodId::Rde => "RDE",
            MethodId::Hybrid => "Hybrid",
        }
    }

    pub fn requirements(self) -> Requirements {
        use MethodId::*;
        match self {
            MaxSequenceProb | MeanSequenceProb | MinSequenceProb | MedianSequenceProb | SentenceSar | LexSimilarity
            | NumSemSets | DegMat | EigValLaplacian | Eccentricity | SemanticEntropy => {
                Requirements { samples: true, ..Default::default() }
            }
            MeanPmi | MeanCpmi => Requirements { unconditional: true, ..Default::default() },
            PTrue => Requirements { ptrue: true, ..Default::default() },
            Md | Rmd | Rde => Requirements { hidden: true, ..Default::default() },
            _ => Requirements::default(),
        }
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodId::ALL
            .into_iter()
            .find(|m| m.id() == s || m.display_name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown method id {s:?}")))
    }
}

/// Tunable constants of the catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorSettings {
    pub renyi_alpha: f64,
    pub cpmi_tau: f64,
    pub cpmi_beta: f64,
    pub sentence_sar_temperature: f64,
    pub cluster_theta: f64,
    pub eccentricity_k: usize,
    pub shrinkage: f64,
    /// PCA components for RDE; defaults to min(d, n, 100).
    pub rde_components: Option<usize>,
    pub similarity: SimilarityFn,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        EstimatorSettings {
            renyi_alpha: 2.0,
            cpmi_tau: 2.0,
            cpmi_beta: 1.0,
            sentence_sar_temperature: 1.0,
            cluster_theta: 0.5,
            eccentricity_k: 2,
            shrinkage: density::DEFAULT_SHRINKAGE,
            rde_components: None,
            similarity: SimilarityFn::default(),
        }
    }
}

/// Everything gathered for one question before scoring.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScoreInputs<'a> {
    pub greedy: Option<&'a GenerationTrace>,
    pub samples: Option<&'a SampleSet>,
    pub unconditional: Option<&'a GenerationTrace>,
    pub ptrue: Option<f64>,
    pub hidden: Option<&'a [f64]>,
}

/// Fitted density models for the internal-state family.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DensityModels {
    pub task: Option<DensityStats>,
    pub background: Option<DensityStats>,
    pub rde: Option<RdeModel>,
}

impl DensityModels {
    /// Fits the task Gaussian and RDE on `train`, and the background Gaussian
    /// on `background` when given.
    pub fn fit(train: &[Vec<f64>], background: Option<&[Vec<f64>]>, settings: &EstimatorSettings) -> Result<Self> {
        let d = train.first().map_or(0, Vec::len);
        let q = settings.rde_components.unwrap_or_else(|| d.min(train.len()).min(density::DEFAULT_RDE_COMPONENTS));
        Ok(DensityModels {
            task: Some(density::fit_density(train, settings.shrinkage)?),
            background: background.map(|b| density::fit_density(b, settings.shrinkage)).transpose()?,
            rde: Some(density::fit_rde(train, q, settings.shrinkage)?),
        })
    }
}

fn need<T>(v: Option<T>, method: MethodId, what: &str) -> Result<T> {
    v.ok_or_else(|| Error::invalid(format!("{method} needs {what}")))
}

/// Computes one scalar score. Hybrid is assembled from other scores with
/// [`assemble_hybrid`] and is rejected here.
pub fn compute(
    method: MethodId,
    inputs: &ScoreInputs<'_>,
    settings: &EstimatorSettings,
    sim: &dyn Similarity,
    density: Option<&DensityModels>,
) -> Result<UncertaintyScore> {
    use MethodId::*;
    let greedy = || need(inputs.greedy, method, "the greedy answer trace");
    let samples = || need(inputs.samples, method, "sampled answers");
    let hidden = || need(inputs.hidden, method, "hidden features");
    let matrix = || -> Result<SimilarityMatrix> { consistency::similarity_matrix(&samples()?.texts(), sim) };
    let value = match method {
        MaxEntropy => logit::entropy_aggregate(greedy()?, Aggregation::Max)?,
        MeanEntropy => logit::entropy_aggregate(greedy()?, Aggregation::Mean)?,
        MinEntropy => logit::entropy_aggregate(greedy()?, Aggregation::Min)?,
        MedianEntropy => logit::entropy_aggregate(greedy()?, Aggregation::Median)?,
        Perplexity => logit::perplexity(greedy()?)?,
        MaxSequenceProb => logit::sequence_prob_aggregate(samples()?, Aggregation::Max)?,
        MeanSequenceProb => logit::sequence_prob_aggregate(samples()?, Aggregation::Mean)?,
        MinSequenceProb => logit::sequence_prob_aggregate(samples()?, Aggregation::Min)?,
        MedianSequenceProb => logit::sequence_prob_aggregate(samples()?, Aggregation::Median)?,
        MeanPmi => logit::pmi_mean(greedy()?, need(inputs.unconditional, method, "an unconditional trace")?)?,
        MeanCpmi => logit::cpmi_mean(
            greedy()?,
            need(inputs.unconditional, method, "an unconditional trace")?,
            settings.cpmi_tau,
            settings.cpmi_beta,
        )?,
        RenyiNeg => logit::renyi_negentropy(greedy()?, settings.renyi_alpha)?,
        FisherRao => logit::fisher_rao(greedy()?)?,
        Sar => logit::sar(greedy()?, sim)?,
        SentenceSar => {
            let m = matrix()?;
            logit::sentence_sar(
                &samples()?.sequence_probabilities(),
                |i, j| m.get(i, j),
                settings.sentence_sar_temperature,
            )?
        }
        PTrue => logit::ptrue_score(need(inputs.ptrue, method, "a P(True) probe")?)?,
        LexSimilarity => consistency::lexical_similarity_score(&matrix()?)?,
        NumSemSets => consistency::num_sem_sets(&matrix()?, settings.cluster_theta),
        DegMat => consistency::deg_mat_score(&matrix()?),
        EigValLaplacian => consistency::eig_val_laplacian_score(&consistency::laplacian_spectrum(&matrix()?)),
        Eccentricity => {
            let m = matrix()?;
            let k = settings.eccentricity_k.min(m.n()).max(1);
            consistency::eccentricity_score(&consistency::laplacian_spectrum(&m), k)?
        }
        SemanticEntropy => {
            let s = samples()?;
            consistency::semantic_entropy(&s.sequence_probabilities(), &matrix()?, settings.cluster_theta)?
        }
        Md => {
            density::mahalanobis(need(density.and_then(|d| d.task.as_ref()), method, "a fitted density")?, hidden()?)?
        }
        Rmd => density::relative_mahalanobis(
            need(density.and_then(|d| d.task.as_ref()), method, "a fitted density")?,
            need(density.and_then(|d| d.background.as_ref()), method, "a background density")?,
            hidden()?,
        )?,
        Rde => need(density.and_then(|d| d.rde.as_ref()), method, "a fitted RDE model")?.score(hidden()?)?,
        Hybrid => return Err(Error::invalid("hybrid is a feature vector; assemble it from the other scores")),
    };
    UncertaintyScore::new(method, value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_roundtrip() {
        for m in MethodId::ALL {
            assert_eq!(m.id().parse::<MethodId>().unwrap(), m);
            assert_eq!(m.display_name().parse::<MethodId>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.id()));
        }
        assert!("ccp".parse::<MethodId>().is_err());
    }

    #[test]
    fn missing_inputs_are_named() {
        let err = compute(
            MethodId::LexSimilarity,
            &ScoreInputs::default(),
            &EstimatorSettings::default(),
            &LexicalSimilarity,
            None,
        )
        .unwrap_err();
        assert!(err.to_string().contains("sampled answers"));
    }
}
