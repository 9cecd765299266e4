//! Scores computed from token log-probabilities of one or more generations.

use serde::{Deserialize, Serialize};

use super::similarity::Similarity;
use crate::error::{Error, Result};
use crate::model::{floored_ln, trace_token_nll, GenerationTrace, SampleSet, TokenStep, PROB_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Max,
    Mean,
    Min,
    Median,
}

pub fn aggregate(values: &[f64], agg: Aggregation) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyGeneration);
    }
    Ok(match agg {
        Aggregation::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Aggregation::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
        Aggregation::Mean => values.iter().sum::<f64>() / values.len() as f64,
        Aggregation::Median => {
            let mut v = values.to_vec();
            v.sort_by(f64::total_cmp);
            let m = v.len() / 2;
            if v.len() % 2 == 1 {
                v[m]
            } else {
                (v[m - 1] + v[m]) / 2.0
            }
        }
    })
}

/// The step's distribution as probabilities: listed alternatives, then the
/// tail bucket when it carries mass.
fn outcome_probabilities(step: &TokenStep) -> Vec<f64> {
    let mut p: Vec<f64> = step.probabilities().collect();
    if step.tail_mass > PROB_FLOOR {
        p.push(step.tail_mass);
    }
    p
}

pub fn token_entropy(step: &TokenStep) -> f64 {
    outcome_probabilities(step).into_iter().filter(|p| *p > 0.0).map(|p| -p * p.ln()).sum::<f64>().max(0.0)
}

pub fn token_entropies(trace: &GenerationTrace) -> Vec<f64> {
    trace.steps.iter().map(token_entropy).collect()
}

pub fn entropy_aggregate(trace: &GenerationTrace, agg: Aggregation) -> Result<f64> {
    aggregate(&token_entropies(trace), agg)
}

pub fn perplexity(trace: &GenerationTrace) -> Result<f64> {
    let nll = trace_token_nll(trace)?;
    Ok((nll.iter().sum::<f64>() / nll.len() as f64).exp())
}

/// `−ln` of the aggregated (floored) sequence probabilities of the samples.
pub fn sequence_prob_aggregate(samples: &SampleSet, agg: Aggregation) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("sample set is empty"));
    }
    Ok(-floored_ln(aggregate(&samples.sequence_probabilities(), agg)?))
}

fn paired_logprobs(cond: &GenerationTrace, uncond: &GenerationTrace) -> Result<(Vec<f64>, Vec<f64>)> {
    if cond.len() != uncond.len() {
        return Err(Error::invalid(format!(
            "conditional trace has {} tokens but unconditional trace has {}",
            cond.len(),
            uncond.len()
        )));
    }
    if cond.is_empty() {
        return Err(Error::EmptyGeneration);
    }
    Ok((cond.chosen_logprobs(), uncond.chosen_logprobs()))
}

/// Negative mean pointwise mutual information between question and answer.
pub fn pmi_mean(cond: &GenerationTrace, uncond: &GenerationTrace) -> Result<f64> {
    let (c, u) = paired_logprobs(cond, uncond)?;
    let l = c.len() as f64;
    Ok(-c.iter().zip(&u).map(|(c, u)| c - u).sum::<f64>() / l)
}

/// Conditional PMI: the unconditional term only enters at tokens whose
/// conditional entropy reaches `tau`.
pub fn cpmi_mean(cond: &GenerationTrace, uncond: &GenerationTrace, tau: f64, beta: f64) -> Result<f64> {
    let (c, u) = paired_logprobs(cond, uncond)?;
    let h = token_entropies(cond);
    let l = c.len() as f64;
    Ok(c.iter().zip(&u).zip(&h).map(|((c, u), h)| -c + if *h >= tau { beta * u } else { 0.0 }).sum::<f64>() / l)
}

/// Rényi divergence of order `alpha` between the step distribution and the
/// uniform distribution over its effective outcomes.
pub fn renyi_divergence(step: &TokenStep, alpha: f64) -> f64 {
    let p = outcome_probabilities(step);
    let v = p.len() as f64;
    let s: f64 = p.iter().filter(|q| **q > 0.0).map(|q| q.powf(alpha)).sum();
    (s.ln() + (alpha - 1.0) * v.ln()) / (alpha - 1.0)
}

pub fn renyi_negentropy(trace: &GenerationTrace, alpha: f64) -> Result<f64> {
    if !alpha.is_finite() || alpha <= 0.0 || alpha == 1.0 {
        return Err(Error::invalid(format!("Rényi order must be positive, finite and ≠ 1, got {alpha}")));
    }
    let d: Vec<f64> = trace.steps.iter().map(|s| renyi_divergence(s, alpha)).collect();
    Ok(-aggregate(&d, Aggregation::Mean)?)
}

/// Fisher-Rao distance to the uniform distribution, scaled to [0, 1].
pub fn fisher_rao_distance(step: &TokenStep) -> f64 {
    let p = outcome_probabilities(step);
    let v = p.len() as f64;
    let bc: f64 = p.iter().map(|q| (q.max(0.0) / v).sqrt()).sum();
    std::f64::consts::FRAC_2_PI * bc.clamp(-1.0, 1.0).acos()
}

pub fn fisher_rao(trace: &GenerationTrace) -> Result<f64> {
    let d: Vec<f64> = trace.steps.iter().map(fisher_rao_distance).collect();
    Ok(1.0 - aggregate(&d, Aggregation::Mean)?)
}

/// Relevance of each token: how much the text changes when it is dropped.
pub fn token_relevance(trace: &GenerationTrace, sim: &dyn Similarity) -> Result<Vec<f64>> {
    if trace.is_empty() {
        return Err(Error::EmptyGeneration);
    }
    if trace.len() == 1 {
        return Ok(vec![1.0]);
    }
    (0..trace.len())
        .map(|t| {
            let without: String =
                trace.steps.iter().enumerate().filter(|(i, _)| *i != t).map(|(_, s)| s.token_text.as_str()).collect();
            Ok(1.0 - sim.similarity(&trace.text, &without)?)
        })
        .collect()
}

/// Relevance-weighted sum of token negative log-likelihoods.
pub fn sar_weighted(nll: &[f64], relevance: &[f64]) -> f64 {
    nll.iter().zip(relevance).map(|(n, r)| n * r).sum()
}

pub fn sar(trace: &GenerationTrace, sim: &dyn Similarity) -> Result<f64> {
    let nll = trace_token_nll(trace)?;
    Ok(sar_weighted(&nll, &token_relevance(trace, sim)?))
}

/// Sentence-level SAR over a sample set, given its pairwise similarities.
pub fn sentence_sar(probs: &[f64], similarity: impl Fn(usize, usize) -> f64, t_temp: f64) -> Result<f64> {
    if probs.is_empty() {
        return Err(Error::invalid("sample set is empty"));
    }
    if !(t_temp > 0.0) {
        return Err(Error::invalid(format!("SentenceSAR temperature must be positive, got {t_temp}")));
    }
    let n = probs.len();
    let total: f64 = (0..n)
        .map(|j| {
            let boost: f64 = (0..n).filter(|k| *k != j).map(|k| similarity(j, k) * probs[k]).sum();
            -floored_ln(probs[j] + boost / t_temp)
        })
        .sum();
    Ok(total / n as f64)
}

pub fn ptrue_score(p_true: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_true) {
        return Err(Error::invalid(format!("P(True) {p_true} outside [0, 1]")));
    }
    Ok(1.0 - p_true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::similarity::LexicalSimilarity;
    use crate::model::test_support::{step_from_probs, trace_from_logprobs};

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    fn trace_of(steps: Vec<TokenStep>) -> GenerationTrace {
        GenerationTrace::from_steps("k", steps, false)
    }

    #[test]
    fn entropy_examples() {
        assert!(close(token_entropy(&step_from_probs(&[0.25; 4], 0.0)), 4f64.ln()));
        assert!(close(token_entropy(&step_from_probs(&[1.0], 0.0)), 0.0));
        assert!(close(token_entropy(&step_from_probs(&[0.5, 0.5], 0.0)), 2f64.ln()));
        // the tail is one aggregate outcome
        let h = token_entropy(&step_from_probs(&[0.5], 0.5));
        assert!(close(h, 2f64.ln()));
    }

    #[test]
    fn aggregation_examples() {
        let v = [0.1, 0.5, 0.3];
        assert_eq!(aggregate(&v, Aggregation::Max).unwrap(), 0.5);
        assert!(close(aggregate(&v, Aggregation::Mean).unwrap(), 0.3));
        assert_eq!(aggregate(&v, Aggregation::Min).unwrap(), 0.1);
        assert_eq!(aggregate(&v, Aggregation::Median).unwrap(), 0.3);
        assert_eq!(aggregate(&[1.0, 4.0, 2.0, 3.0], Aggregation::Median).unwrap(), 2.5);
        assert!(aggregate(&[], Aggregation::Max).is_err());
    }

    #[test]
    fn perplexity_examples() {
        let l2 = 2f64.ln();
        assert!(close(perplexity(&trace_from_logprobs(&[-l2, -l2])).unwrap(), 2.0));
        assert!(close(perplexity(&trace_from_logprobs(&[0.0, 0.0])).unwrap(), 1.0));
        assert!(close(perplexity(&trace_from_logprobs(&[-1.0, -3.0])).unwrap(), 1f64.exp().powi(2)));
        assert!(perplexity(&trace_of(vec![])).is_err());
    }

    fn sample_set(probs: &[f64]) -> SampleSet {
        SampleSet {
            prompt_key: "k".into(),
            samples: probs.iter().map(|p| trace_from_logprobs(&[p.ln()])).collect(),
            sampling_temperature: 1.0,
            sequential_fallback: false,
        }
    }

    #[test]
    fn sequence_probability_examples() {
        let s = sample_set(&[0.5, 0.25, 0.25]);
        assert!(close(sequence_prob_aggregate(&s, Aggregation::Max).unwrap(), 2f64.ln()));
        assert!(close(sequence_prob_aggregate(&s, Aggregation::Mean).unwrap(), 3f64.ln()));
        let one = sample_set(&[1.0]);
        for agg in [Aggregation::Max, Aggregation::Mean, Aggregation::Min, Aggregation::Median] {
            assert!(close(sequence_prob_aggregate(&one, agg).unwrap(), 0.0));
        }
    }

    #[test]
    fn pmi_examples() {
        let c = trace_from_logprobs(&[-1.0, -1.0]);
        let u = trace_from_logprobs(&[-2.0, -2.0]);
        assert!(close(pmi_mean(&c, &u).unwrap(), -1.0));
        assert!(close(pmi_mean(&c, &c).unwrap(), 0.0));
        let err = pmi_mean(&c, &trace_from_logprobs(&[-1.0])).unwrap_err();
        assert!(err.to_string().contains('2') && err.to_string().contains('1'));
    }

    #[test]
    fn cpmi_examples() {
        // entropy 3 at the single step: probabilities uniform over e^3 outcomes is
        // not representable, so build a high-entropy step directly
        let wide: Vec<f64> = vec![1.0 / 30.0; 30];
        let mut step = step_from_probs(&wide, 0.0);
        step.chosen_logprob = -1.0;
        step.alternatives[0].1 = -1.0;
        let cond = trace_of(vec![step]);
        assert!(token_entropy(&cond.steps[0]) >= 2.0);
        let uncond = trace_from_logprobs(&[-2.0]);
        assert!(close(cpmi_mean(&cond, &uncond, 2.0, 1.0).unwrap(), -1.0));
        // indicator off everywhere: plain mean NLL
        let c = trace_from_logprobs(&[-0.1, -0.2]);
        let u = trace_from_logprobs(&[-3.0, -3.0]);
        assert!(close(cpmi_mean(&c, &u, 2.0, 1.0).unwrap(), 0.15));
    }

    #[test]
    fn renyi_and_fisher_rao_examples() {
        let uniform = trace_of(vec![step_from_probs(&[0.25; 4], 0.0)]);
        assert!(close(renyi_negentropy(&uniform, 2.0).unwrap(), 0.0));
        assert!(close(renyi_negentropy(&uniform, 0.5).unwrap(), 0.0));
        assert!(close(fisher_rao(&uniform).unwrap(), 1.0));
        let one_hot = trace_of(vec![step_from_probs(&[1.0, 0.0, 0.0, 0.0], 0.0)]);
        assert!((renyi_negentropy(&one_hot, 2.0).unwrap() + 4f64.ln()).abs() < 1e-9);
        assert!((fisher_rao(&one_hot).unwrap() - 1.0 / 3.0).abs() < 1e-5);
        let half = trace_of(vec![step_from_probs(&[0.5, 0.5], 0.0)]);
        assert!(close(renyi_negentropy(&half, 2.0).unwrap(), 0.0));
        assert!(close(fisher_rao(&half).unwrap(), 1.0));
        assert!(renyi_negentropy(&half, 1.0).is_err());
    }

    #[test]
    fn sar_examples() {
        assert_eq!(sar_weighted(&[1.0, 2.0], &[0.0, 1.0]), 2.0);
        assert_eq!(sar_weighted(&[1.0, 2.0], &[1.0, 1.0]), 3.0);
        assert_eq!(sar_weighted(&[1.0, 2.0], &[0.0, 0.0]), 0.0);
        let single = trace_from_logprobs(&[-0.7]);
        assert!(close(sar(&single, &LexicalSimilarity).unwrap(), 0.7));
        // every token carries a distinct word: dropping one of two gives F1 2/3
        let two = trace_from_logprobs(&[-1.0, -2.0]);
        assert!(close(sar(&two, &LexicalSimilarity).unwrap(), 3.0 / 3.0));
    }

    #[test]
    fn sentence_sar_examples() {
        assert!(close(sentence_sar(&[0.5, 0.5], |_, _| 1.0, 1.0).unwrap(), 0.0));
        let p = [0.2, 0.3, 0.1];
        let direct = -(p.iter().map(|q: &f64| q.ln()).sum::<f64>()) / 3.0;
        assert!(close(sentence_sar(&p, |_, _| 0.0, 1.0).unwrap(), direct));
        assert!(close(sentence_sar(&[0.4], |_, _| 1.0, 1.0).unwrap(), -(0.4f64.ln())));
    }

    #[test]
    fn ptrue_examples() {
        assert!(close(ptrue_score(0.9).unwrap(), 0.1));
        assert_eq!(ptrue_score(1.0).unwrap(), 0.0);
        assert_eq!(ptrue_score(0.0).unwrap(), 1.0);
    }
}
