//! Shared data model: questions, documents, generations, scores and run outcomes.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::MethodId;

/// Floor applied to probabilities before taking a logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// Tolerance on probability-mass conservation of a token step.
pub const MASS_TOLERANCE: f64 = 1e-6;

/// `ln(max(p, PROB_FLOOR))`.
pub fn floored_ln(p: f64) -> f64 {
    p.max(PROB_FLOOR).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HopClass {
    Single,
    Multi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaExample {
    pub id: String,
    pub question: String,
    pub golds: Vec<String>,
    pub dataset: String,
    pub hop_class: HopClass,
}

impl QaExample {
    pub fn validate(&self) -> Result<()> {
        if self.question.trim().is_empty() {
            return Err(Error::data(format!("example {}: empty question", self.id)));
        }
        if self.golds.is_empty() {
            return Err(Error::data(format!("example {}: no gold answers", self.id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub body: String,
}

/// One generated token with its top-K alternatives.
///
/// `alternatives` holds `(token_text, logprob)` pairs sorted by descending
/// logprob; `tail_mass` is the probability outside that list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenStep {
    pub token_text: String,
    pub chosen_logprob: f64,
    pub alternatives: Vec<(String, f64)>,
    pub tail_mass: f64,
}

impl TokenStep {
    pub fn probabilities(&self) -> impl Iterator<Item = f64> + '_ {
        self.alternatives.iter().map(|(_, lp)| lp.exp())
    }

    /// Number of distinct outcomes seen by divergence-to-uniform scores:
    /// the listed alternatives plus one aggregate tail bucket when non-empty.
    pub fn effective_outcomes(&self) -> usize {
        self.alternatives.len() + usize::from(self.tail_mass > PROB_FLOOR)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationTrace {
    pub prompt_key: String,
    pub steps: Vec<TokenStep>,
    pub text: String,
    pub total_logprob: f64,
    pub used_context: bool,
}

impl GenerationTrace {
    /// Builds a trace whose text and total log-probability are derived from the steps.
    pub fn from_steps(prompt_key: impl Into<String>, steps: Vec<TokenStep>, used_context: bool) -> Self {
        let text = steps.iter().map(|s| s.token_text.as_str()).collect();
        let total_logprob = steps.iter().map(|s| s.chosen_logprob).sum();
        GenerationTrace { prompt_key: prompt_key.into(), steps, text, total_logprob, used_context }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn chosen_logprobs(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.chosen_logprob).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub prompt_key: String,
    pub samples: Vec<GenerationTrace>,
    pub sampling_temperature: f64,
    /// Set when the endpoint refused `n > 1` and samples were fetched one by one.
    #[serde(default)]
    pub sequential_fallback: bool,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.samples.iter().map(|s| s.text.as_str()).collect()
    }

    /// Floored sequence probabilities `max(exp(total_logprob), PROB_FLOOR)`.
    pub fn sequence_probabilities(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.total_logprob.exp().max(PROB_FLOOR)).collect()
    }

    pub fn validate(&self, expected_n: Option<usize>) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::data("sample set is empty"));
        }
        if let Some(n) = expected_n {
            if n != self.samples.len() {
                return Err(Error::data(format!(
                    "sample set has {} samples, configuration asks for {n}",
                    self.samples.len()
                )));
            }
        }
        if !(self.sampling_temperature > 0.0) {
            return Err(Error::data("sampling temperature must be positive"));
        }
        if let Some(bad) = self.samples.iter().find(|s| s.prompt_key != self.prompt_key) {
            return Err(Error::data(format!(
                "sample prompt key {} differs from set key {}",
                bad.prompt_key, self.prompt_key
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenFeature {
    pub example_id: String,
    pub vector: Vec<f64>,
}

/// A score with the convention that higher values mean lower self-knowledge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyScore {
    pub method: MethodId,
    pub value: f64,
}

impl UncertaintyScore {
    pub fn new(method: MethodId, value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::data(format!("{method}: non-finite score {value}")));
        }
        Ok(UncertaintyScore { method, value })
    }
}

/// `y = 1` when the answer produced without retrieval was incorrect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SelfKnowledgeLabel(u8);

impl SelfKnowledgeLabel {
    pub fn from_correctness(correct_without_retrieval: bool) -> Self {
        SelfKnowledgeLabel(u8::from(!correct_without_retrieval))
    }

    pub fn new(y: u8) -> Result<Self> {
        if y > 1 {
            return Err(Error::data(format!("self-knowledge label must be 0 or 1, got {y}")));
        }
        Ok(SelfKnowledgeLabel(y))
    }

    pub fn y(self) -> u8 {
        self.0
    }

    pub fn needs_retrieval(self) -> bool {
        self.0 == 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Never,
    Always,
    Adaptive,
    Ideal,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Never => "never",
            Strategy::Always => "always",
            Strategy::Adaptive => "adaptive",
            Strategy::Ideal => "ideal",
        })
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "never" => Ok(Strategy::Never),
            "always" => Ok(Strategy::Always),
            "adaptive" => Ok(Strategy::Adaptive),
            "ideal" => Ok(Strategy::Ideal),
            other => Err(Error::invalid(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub example_id: String,
    pub strategy: Strategy,
    pub decision: u8,
    pub answer: String,
    pub correct_in_acc: bool,
    pub correct_em: bool,
    pub f1: f64,
    pub lm_calls: u32,
    pub retrieval_calls: u32,
    #[serde(default)]
    pub scores: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl RunRecord {
    /// Checks the counter algebra of the record's strategy. `aux_calls` is the
    /// number of auxiliary LM passes (force-scoring, probing) billed on top.
    pub fn check_accounting(&self, aux_calls: u32) -> Result<()> {
        let ok = match self.strategy {
            Strategy::Never => self.retrieval_calls == 0 && self.decision == 0,
            Strategy::Always => self.retrieval_calls == 1 && self.decision == 1,
            Strategy::Adaptive | Strategy::Ideal => {
                self.decision <= 1
                    && self.retrieval_calls == u32::from(self.decision)
                    && self.lm_calls == 1 + u32::from(self.decision) + aux_calls
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::data(format!(
                "{}: counters lm={} rc={} decision={} violate the {} accounting",
                self.example_id, self.lm_calls, self.retrieval_calls, self.decision, self.strategy
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceViolation {
    PositiveLogprob { step: usize, value: f64 },
    ChosenNotInAlternatives { step: usize },
    AlternativesUnsorted { step: usize },
    NoAlternatives { step: usize },
    TailOutOfRange { step: usize, value: f64 },
    MassConservation { step: usize, total: f64 },
    TotalLogprobMismatch { expected: f64, found: f64 },
    TextMismatch,
}

impl fmt::Display for TraceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceViolation::PositiveLogprob { step, value } => {
                write!(f, "step {step}: logprob ≤ 0 violated ({value})")
            }
            TraceViolation::ChosenNotInAlternatives { step } => {
                write!(f, "step {step}: chosen token missing from alternatives")
            }
            TraceViolation::AlternativesUnsorted { step } => {
                write!(f, "step {step}: alternatives not sorted by descending logprob")
            }
            TraceViolation::NoAlternatives { step } => write!(f, "step {step}: no alternatives"),
            TraceViolation::TailOutOfRange { step, value } => {
                write!(f, "step {step}: tail mass {value} outside [0, 1]")
            }
            TraceViolation::MassConservation { step, total } => {
                write!(f, "step {step}: mass conservation violated (total {total})")
            }
            TraceViolation::TotalLogprobMismatch { expected, found } => {
                write!(f, "total_logprob {found} differs from step sum {expected}")
            }
            TraceViolation::TextMismatch => f.write_str("text differs from concatenated tokens"),
        }
    }
}

/// Lists every invariant the trace violates. An empty list means the trace is valid.
pub fn validate_trace(trace: &GenerationTrace) -> Vec<TraceViolation> {
    let mut out = Vec::new();
    for (i, step) in trace.steps.iter().enumerate() {
        if step.chosen_logprob > 0.0 {
            out.push(TraceViolation::PositiveLogprob { step: i, value: step.chosen_logprob });
        }
        if step.alternatives.is_empty() {
            out.push(TraceViolation::NoAlternatives { step: i });
            continue;
        }
        if let Some((_, lp)) = step.alternatives.iter().find(|(_, lp)| *lp > 0.0) {
            out.push(TraceViolation::PositiveLogprob { step: i, value: *lp });
        }
        if !step.alternatives.iter().any(|(t, _)| *t == step.token_text) {
            out.push(TraceViolation::ChosenNotInAlternatives { step: i });
        }
        if step.alternatives.windows(2).any(|w| w[0].1 < w[1].1) {
            out.push(TraceViolation::AlternativesUnsorted { step: i });
        }
        if !(0.0..=1.0).contains(&step.tail_mass) {
            out.push(TraceViolation::TailOutOfRange { step: i, value: step.tail_mass });
        }
        let total: f64 = step.probabilities().sum::<f64>() + step.tail_mass;
        if (total - 1.0).abs() > MASS_TOLERANCE {
            out.push(TraceViolation::MassConservation { step: i, total });
        }
    }
    let expected: f64 = trace.steps.iter().map(|s| s.chosen_logprob).sum();
    if (expected - trace.total_logprob).abs() > 1e-9 {
        out.push(TraceViolation::TotalLogprobMismatch { expected, found: trace.total_logprob });
    }
    let text: String = trace.steps.iter().map(|s| s.token_text.as_str()).collect();
    if text != trace.text {
        out.push(TraceViolation::TextMismatch);
    }
    out
}

/// Per-token negative log-likelihood, in generation order.
pub fn trace_token_nll(trace: &GenerationTrace) -> Result<Vec<f64>> {
    if trace.is_empty() {
        return Err(Error::EmptyGeneration);
    }
    Ok(trace.steps.iter().map(|s| -s.chosen_logprob).collect())
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    /// A step whose alternatives are `probs` over tokens "t0", "t1", ... with
    /// the chosen token being the most probable one.
    pub fn step_from_probs(probs: &[f64], tail: f64) -> TokenStep {
        let mut alts: Vec<(String, f64)> =
            probs.iter().enumerate().map(|(i, p)| (format!("t{i}"), floored_ln(*p))).collect();
        alts.sort_by(|a, b| b.1.total_cmp(&a.1));
        TokenStep { token_text: alts[0].0.clone(), chosen_logprob: alts[0].1, alternatives: alts, tail_mass: tail }
    }

    pub fn trace_from_logprobs(lps: &[f64]) -> GenerationTrace {
        let steps = lps
            .iter()
            .enumerate()
            .map(|(i, lp)| {
                let p = lp.exp();
                let tok = format!("w{i} ");
                let mut alts = vec![(tok.clone(), *lp)];
                if 1.0 - p > 1e-12 {
                    alts.push(("other".to_owned(), (1.0 - p).ln()));
                }
                alts.sort_by(|a, b| b.1.total_cmp(&a.1));
                TokenStep { token_text: tok, chosen_logprob: *lp, alternatives: alts, tail_mass: 0.0 }
            })
            .collect();
        GenerationTrace::from_steps("k", steps, false)
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use std::f64::consts::LN_2;

    #[test]
    fn consistent_trace_has_empty_report() {
        let trace = trace_from_logprobs(&[-LN_2, -0.1]);
        assert!(validate_trace(&trace).is_empty());
    }

    #[test]
    fn positive_alternative_logprob_is_reported() {
        let mut trace = trace_from_logprobs(&[-LN_2]);
        trace.steps[0].alternatives.push(("bad".into(), 0.5));
        let report = validate_trace(&trace);
        assert!(report.iter().any(|v| v.to_string().contains("logprob ≤ 0")), "{report:?}");
    }

    #[test]
    fn mass_shortfall_is_reported() {
        // exp-mass 0.90 plus tail 0.02 = 0.92, outside 1 ± 1e-6
        let step = TokenStep {
            token_text: "a".into(),
            chosen_logprob: 0.6f64.ln(),
            alternatives: vec![("a".into(), 0.6f64.ln()), ("b".into(), 0.3f64.ln())],
            tail_mass: 0.02,
        };
        let trace = GenerationTrace::from_steps("k", vec![step], false);
        let report = validate_trace(&trace);
        assert_eq!(report.len(), 1);
        assert!(matches!(report[0], TraceViolation::MassConservation { total, .. } if (total - 0.92).abs() < 1e-12));
    }

    #[test]
    fn total_and_text_mismatch_detected() {
        let mut trace = trace_from_logprobs(&[-1.0, -2.0]);
        trace.total_logprob = -2.5;
        trace.text.push('!');
        let report = validate_trace(&trace);
        assert!(report.iter().any(|v| matches!(v, TraceViolation::TotalLogprobMismatch { .. })));
        assert!(report.contains(&TraceViolation::TextMismatch));
    }

    #[test]
    fn token_nll_negates_in_order() {
        let trace = trace_from_logprobs(&[-LN_2, -(4f64.ln())]);
        let nll = trace_token_nll(&trace).unwrap();
        assert!((nll[0] - LN_2).abs() < 1e-15 && (nll[1] - 2.0 * LN_2).abs() < 1e-15);
        assert_eq!(trace_token_nll(&trace_from_logprobs(&[0.0])).unwrap(), vec![0.0]);
        assert_eq!(trace_token_nll(&trace_from_logprobs(&[-1.0, -1.0, -1.0])).unwrap().len(), 3);
        let empty = GenerationTrace::from_steps("k", vec![], false);
        assert!(matches!(trace_token_nll(&empty), Err(Error::EmptyGeneration)));
    }

    #[test]
    fn run_record_accounting() {
        let mut r = RunRecord {
            example_id: "q".into(),
            strategy: Strategy::Adaptive,
            decision: 1,
            answer: String::new(),
            correct_in_acc: false,
            correct_em: false,
            f1: 0.0,
            lm_calls: 2,
            retrieval_calls: 1,
            scores: BTreeMap::new(),
            flags: vec![],
        };
        r.check_accounting(0).unwrap();
        assert!(r.check_accounting(1).is_err());
        r.lm_calls = 3;
        r.check_accounting(1).unwrap();
        r.strategy = Strategy::Never;
        assert!(r.check_accounting(0).is_err());
    }

    #[test]
    fn label_convention() {
        assert_eq!(SelfKnowledgeLabel::from_correctness(true).y(), 0);
        assert_eq!(SelfKnowledgeLabel::from_correctness(false).y(), 1);
        assert!(SelfKnowledgeLabel::new(2).is_err());
    }
}
