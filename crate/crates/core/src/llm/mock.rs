//! Deterministic mock LLM with full next-token distributions.
//!
//! Every configured fact has a set of candidate answers. At each step the
//! next-token distribution is a weighted mixture, over candidates still
//! consistent with the prefix, of a distribution peaked on the candidate's
//! next token:
//!
//! `p(target) = 1 / (1 + (V-1)·e^{-s})`, `p(other) = e^{-s} / (1 + (V-1)·e^{-s})`
//!
//! where `s` is the sharpness. `s = 0` gives the uniform distribution and
//! `s = ∞` a one-hot one. Outputs are a pure function of (spec, prompt, config).

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::prompt::{extract_context, extract_proposed_answer, extract_question};
use super::{prompt_key, DecodeConfig, LanguageModel};
use crate::error::{Error, Result};
use crate::evalkit::qa::normalize_answer;
use crate::model::{floored_ln, GenerationTrace, SampleSet, TokenStep};

/// Sharpness values serialize as numbers, or `"inf"` for a one-hot distribution.
mod sharpness_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("invalid sharpness {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockFact {
    pub question: String,
    /// Correct answer, produced when the fact is known or the context reveals it.
    pub answer: String,
    pub known: bool,
    /// Wrong answer produced when the fact is unknown.
    #[serde(default)]
    pub hallucination: Option<String>,
    /// Extra weighted candidates mixed into the answer distribution. The
    /// primary candidate has weight 1.
    #[serde(default)]
    pub alternatives: Vec<(String, f64)>,
    #[serde(default)]
    pub ptrue: Option<f64>,
    /// A retrieved context makes the model answer wrongly.
    #[serde(default)]
    pub context_hurts: bool,
}

fn default_model_id() -> String {
    "mock-llm".into()
}
fn default_unknown_sharpness() -> f64 {
    0.0
}
fn default_context_sharpness() -> f64 {
    8.0
}
fn default_ptrue_known() -> f64 {
    0.8
}
fn default_ptrue_unknown() -> f64 {
    0.3
}
fn default_hidden_spread() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockLlmSpec {
    #[serde(default = "default_model_id")]
    pub model_id: String,
    pub vocabulary: Vec<String>,
    /// Facts keyed by question id.
    pub knowledge: BTreeMap<String, MockFact>,
    /// Peakedness for known questions.
    #[serde(with = "sharpness_serde")]
    pub sharpness: f64,
    #[serde(with = "sharpness_serde", default = "default_unknown_sharpness")]
    pub unknown_sharpness: f64,
    #[serde(with = "sharpness_serde", default = "default_context_sharpness")]
    pub context_sharpness: f64,
    pub seed: u64,
    #[serde(default = "default_ptrue_known")]
    pub ptrue_known: f64,
    #[serde(default = "default_ptrue_unknown")]
    pub ptrue_unknown: f64,
    /// Dimension of synthetic hidden states; 0 disables them.
    #[serde(default)]
    pub hidden_dim: usize,
    #[serde(default = "default_hidden_spread")]
    pub hidden_spread: f64,
}

impl MockLlmSpec {
    pub fn new(vocabulary: Vec<String>, sharpness: f64, seed: u64) -> Self {
        MockLlmSpec {
            model_id: default_model_id(),
            vocabulary,
            knowledge: BTreeMap::new(),
            sharpness,
            unknown_sharpness: default_unknown_sharpness(),
            context_sharpness: default_context_sharpness(),
            seed,
            ptrue_known: default_ptrue_known(),
            ptrue_unknown: default_ptrue_unknown(),
            hidden_dim: 0,
            hidden_spread: default_hidden_spread(),
        }
    }

    /// Appends every word used by the configured answers to the vocabulary.
    pub fn extend_vocabulary_from_facts(&mut self) {
        let mut words: Vec<String> = Vec::new();
        for fact in self.knowledge.values() {
            let texts = std::iter::once(&fact.answer)
                .chain(fact.hallucination.iter())
                .chain(fact.alternatives.iter().map(|(t, _)| t));
            for text in texts {
                words.extend(text.split_whitespace().map(str::to_owned));
            }
        }
        for w in words {
            if !self.vocabulary.contains(&w) {
                self.vocabulary.push(w);
            }
        }
    }
}

type Candidate = (Vec<usize>, f64);

struct Plan {
    candidates: Vec<Candidate>,
    sharpness: f64,
    used_context: bool,
}

#[derive(Debug, Clone)]
pub struct MockLlm {
    spec: MockLlmSpec,
    vocab_index: HashMap<String, usize>,
    by_question: HashMap<String, String>,
    model_id: String,
}

impl MockLlm {
    pub fn new(spec: MockLlmSpec) -> Result<Self> {
        if spec.vocabulary.is_empty() {
            return Err(Error::Config("mock vocabulary is empty".into()));
        }
        let mut vocab_index = HashMap::new();
        for (i, w) in spec.vocabulary.iter().enumerate() {
            if w.is_empty() || w.chars().any(char::is_whitespace) {
                return Err(Error::Config(format!("mock vocabulary entry {w:?} is not a single word")));
            }
            if vocab_index.insert(w.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate vocabulary entry {w:?}")));
            }
        }
        for s in [spec.sharpness, spec.unknown_sharpness, spec.context_sharpness] {
            if !(s >= 0.0) {
                return Err(Error::Config(format!("sharpness must be ≥ 0, got {s}")));
            }
        }
        for p in [spec.ptrue_known, spec.ptrue_unknown] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("ptrue {p} outside [0, 1]")));
            }
        }
        let mut by_question = HashMap::new();
        for (id, fact) in &spec.knowledge {
            let texts = std::iter::once(&fact.answer)
                .chain(fact.hallucination.iter())
                .chain(fact.alternatives.iter().map(|(t, _)| t));
            for text in texts {
                if let Some(w) = text.split_whitespace().find(|w| !vocab_index.contains_key(*w)) {
                    return Err(Error::Config(format!("fact {id}: answer word {w:?} is outside the vocabulary")));
                }
            }
            if fact.alternatives.iter().any(|(_, w)| !(*w > 0.0)) {
                return Err(Error::Config(format!("fact {id}: alternative weights must be positive")));
            }
            if let Some(p) = fact.ptrue {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Config(format!("fact {id}: ptrue {p} outside [0, 1]")));
                }
            }
            by_question.insert(fact.question.trim().to_owned(), id.clone());
        }
        let digest = Sha256::digest(serde_json::to_vec(&spec)?);
        let model_id = format!("{}@{}", spec.model_id, &hex::encode(digest)[..16]);
        Ok(MockLlm { spec, vocab_index, by_question, model_id })
    }

    pub fn spec(&self) -> &MockLlmSpec {
        &self.spec
    }

    pub fn fact_for_question(&self, question: &str) -> Option<(&str, &MockFact)> {
        let id = self.by_question.get(question.trim())?;
        self.spec.knowledge.get_key_value(id).map(|(k, v)| (k.as_str(), v))
    }

    /// Synthetic hidden state for a question: standard normal for known
    /// facts, scaled by `hidden_spread` otherwise.
    pub fn hidden_state(&self, question: &str) -> Option<Vec<f64>> {
        if self.spec.hidden_dim == 0 {
            return None;
        }
        let known = self.fact_for_question(question).is_some_and(|(_, f)| f.known);
        let scale = if known { 1.0 } else { self.spec.hidden_spread };
        let mut rng = self.rng(&["hidden", question.trim()]);
        Some((0..self.spec.hidden_dim).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect())
    }

    fn rng(&self, parts: &[&str]) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.spec.seed.to_le_bytes());
        for p in parts {
            h.update(p.as_bytes());
            h.update([0u8]);
        }
        ChaCha8Rng::from_seed(h.finalize().into())
    }

    fn words_to_ids(&self, text: &str) -> Vec<usize> {
        text.split_whitespace().filter_map(|w| self.vocab_index.get(w).copied()).collect()
    }

    fn hallucination_ids(&self, question: &str, fact: Option<&MockFact>) -> Vec<usize> {
        if let Some(h) = fact.and_then(|f| f.hallucination.as_deref()) {
            return self.words_to_ids(h);
        }
        let avoid = fact.map(|f| self.words_to_ids(&f.answer)).unwrap_or_default();
        let v = self.spec.vocabulary.len();
        let mut rng = self.rng(&["hallucination", question]);
        let mut out = Vec::new();
        for _ in 0..2 {
            out.push(rng.random_range(0..v));
        }
        if out == avoid && v > 1 {
            out[0] = (out[0] + 1) % v;
        }
        out
    }

    fn plan(&self, prompt: &str) -> Plan {
        let Some(question) = extract_question(prompt) else {
            return Plan { candidates: vec![], sharpness: 0.0, used_context: false };
        };
        let context = extract_context(prompt);
        let fact = self.fact_for_question(question).map(|(_, f)| f);
        let context_has_answer = match (context, fact) {
            (Some(ctx), Some(f)) => {
                let a = normalize_answer(&f.answer);
                !a.is_empty() && normalize_answer(ctx).contains(&a)
            }
            _ => false,
        };
        let used_context = context.is_some();
        let correct = |f: &MockFact| {
            let mut c: Vec<Candidate> = vec![(self.words_to_ids(&f.answer), 1.0)];
            c.extend(f.alternatives.iter().map(|(t, w)| (self.words_to_ids(t), *w)));
            c
        };
        match fact {
            Some(f) if used_context && f.context_hurts => Plan {
                candidates: vec![(self.hallucination_ids(question, Some(f)), 1.0)],
                sharpness: self.spec.context_sharpness,
                used_context,
            },
            Some(f) if f.known => Plan { candidates: correct(f), sharpness: self.spec.sharpness, used_context },
            Some(f) if context_has_answer => Plan {
                candidates: vec![(self.words_to_ids(&f.answer), 1.0)],
                sharpness: self.spec.context_sharpness,
                used_context,
            },
            _ => Plan {
                candidates: vec![(self.hallucination_ids(question, fact), 1.0)],
                sharpness: self.spec.unknown_sharpness,
                used_context,
            },
        }
    }

    /// Next-token distribution over the vocabulary given the prefix.
    fn distribution(&self, plan: &Plan, prefix: &[usize]) -> Vec<f64> {
        let v = self.spec.vocabulary.len();
        let t = prefix.len();
        let mut active: Vec<(usize, f64)> = plan
            .candidates
            .iter()
            .filter(|(toks, _)| toks.len() > t && toks.starts_with(prefix))
            .map(|(toks, w)| (toks[t], *w))
            .collect();
        if active.is_empty() {
            // off the candidate paths: keep following the primary candidate
            match plan.candidates.first() {
                Some((toks, _)) if toks.len() > t => active.push((toks[t], 1.0)),
                _ => return vec![1.0 / v as f64; v],
            }
        }
        let (q_target, q_other) = peaked(v, plan.sharpness);
        let total_w: f64 = active.iter().map(|(_, w)| w).sum();
        let mut p = vec![q_other; v];
        for (target, w) in &active {
            p[*target] += (w / total_w) * (q_target - q_other);
        }
        p
    }

    fn target(&self, plan: &Plan, prefix: &[usize]) -> Option<usize> {
        let t = prefix.len();
        plan.candidates
            .iter()
            .find(|(toks, _)| toks.len() > t && toks.starts_with(prefix))
            .or_else(|| plan.candidates.first().filter(|(toks, _)| toks.len() > t))
            .map(|(toks, _)| toks[t])
    }

    fn finished(&self, plan: &Plan, prefix: &[usize]) -> bool {
        let t = prefix.len();
        let compatible: Vec<&Candidate> = plan.candidates.iter().filter(|(toks, _)| toks.starts_with(prefix)).collect();
        if compatible.iter().any(|(toks, _)| toks.len() == t) {
            return true;
        }
        if compatible.is_empty() {
            return plan.candidates.first().is_none_or(|(toks, _)| t >= toks.len());
        }
        false
    }

    fn render(&self, position: usize, id: usize) -> String {
        if position == 0 {
            self.spec.vocabulary[id].clone()
        } else {
            format!(" {}", self.spec.vocabulary[id])
        }
    }

    fn make_step(&self, position: usize, probs: &[f64], chosen: usize, top_k: usize) -> TokenStep {
        let mut order: Vec<usize> = (0..probs.len()).collect();
        order.sort_by(|a, b| probs[*b].total_cmp(&probs[*a]));
        let mut kept: Vec<usize> = order.iter().copied().take(top_k.max(1)).collect();
        if !kept.contains(&chosen) {
            kept.push(chosen);
        }
        let listed: f64 = kept.iter().map(|i| probs[*i]).sum();
        let alternatives = kept.iter().map(|i| (self.render(position, *i), floored_ln(probs[*i]))).collect();
        TokenStep {
            token_text: self.render(position, chosen),
            chosen_logprob: floored_ln(probs[chosen]),
            alternatives,
            tail_mass: (1.0 - listed).clamp(0.0, 1.0),
        }
    }

    fn generate_one(&self, prompt: &str, cfg: &DecodeConfig, sample_index: u32) -> Result<GenerationTrace> {
        cfg.validate()?;
        if extract_proposed_answer(prompt).is_some() {
            return Ok(self.probe(prompt, cfg));
        }
        let plan = self.plan(prompt);
        let cfg_json = serde_json::to_string(cfg)?;
        let mut rng = self.rng(&["generate", prompt, &cfg_json, &sample_index.to_string()]);
        let mut prefix = Vec::new();
        let mut steps = Vec::new();
        while prefix.len() < cfg.max_tokens as usize && !self.finished(&plan, &prefix) {
            let probs = self.distribution(&plan, &prefix);
            let chosen = if cfg.temperature == 0.0 {
                // a flat distribution still follows the planned answer
                match self.target(&plan, &prefix) {
                    Some(t) if probs[t] >= probs[argmax(&probs)] => t,
                    _ => argmax(&probs),
                }
            } else {
                sample_tempered(&probs, cfg.temperature, &mut rng)
            };
            steps.push(self.make_step(prefix.len(), &probs, chosen, cfg.top_k_logprobs as usize));
            prefix.push(chosen);
        }
        Ok(GenerationTrace::from_steps(prompt_key(prompt), steps, plan.used_context))
    }

    fn probe(&self, prompt: &str, cfg: &DecodeConfig) -> GenerationTrace {
        let fact = extract_question(prompt).and_then(|q| self.fact_for_question(q)).map(|(_, f)| f);
        let p = match fact {
            Some(f) => f.ptrue.unwrap_or(if f.known { self.spec.ptrue_known } else { self.spec.ptrue_unknown }),
            None => self.spec.ptrue_unknown,
        };
        let mut alts: Vec<(String, f64)> = [("True", p), ("False", 1.0 - p)]
            .into_iter()
            .filter(|(_, q)| *q > 0.0)
            .map(|(t, q)| (t.to_owned(), q.ln()))
            .collect();
        alts.sort_by(|a, b| b.1.total_cmp(&a.1));
        alts.truncate(cfg.top_k_logprobs.max(1) as usize);
        let listed: f64 = alts.iter().map(|(_, lp)| lp.exp()).sum();
        let step = TokenStep {
            token_text: alts[0].0.clone(),
            chosen_logprob: alts[0].1,
            alternatives: alts,
            tail_mass: (1.0 - listed).clamp(0.0, 1.0),
        };
        GenerationTrace::from_steps(prompt_key(prompt), vec![step], false)
    }
}

fn peaked(v: usize, sharpness: f64) -> (f64, f64) {
    if v == 1 {
        return (1.0, 0.0);
    }
    let e = (-sharpness).exp();
    let denom = 1.0 + (v as f64 - 1.0) * e;
    (1.0 / denom, e / denom)
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

fn sample_tempered(p: &[f64], temperature: f64, rng: &mut ChaCha8Rng) -> usize {
    let weights: Vec<f64> = p.iter().map(|q| if *q > 0.0 { q.powf(1.0 / temperature) } else { 0.0 }).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    argmax(p)
}

impl LanguageModel for MockLlm {
    fn model_id(&self) -> String {
        self.model_id.clone()
    }

    fn generate(&self, prompt: &str, cfg: &DecodeConfig) -> Result<GenerationTrace> {
        self.generate_one(prompt, cfg, 0)
    }

    fn generate_n(&self, prompt: &str, cfg: &DecodeConfig) -> Result<SampleSet> {
        let samples = (0..cfg.n_samples).map(|i| self.generate_one(prompt, cfg, i)).collect::<Result<Vec<_>>>()?;
        Ok(SampleSet {
            prompt_key: prompt_key(prompt),
            samples,
            sampling_temperature: if cfg.temperature > 0.0 { cfg.temperature } else { 1.0 },
            sequential_fallback: false,
        })
    }

    fn score_continuation(&self, prompt: &str, continuation: &[String], cfg: &DecodeConfig) -> Result<GenerationTrace> {
        let plan = self.plan(prompt);
        let mut prefix = Vec::new();
        let mut steps = Vec::new();
        for tok in continuation {
            let word = tok.trim_start();
            let id = *self
                .vocab_index
                .get(word)
                .ok_or_else(|| Error::invalid(format!("token {tok:?} is outside the mock vocabulary")))?;
            let probs = self.distribution(&plan, &prefix);
            steps.push(self.make_step(prefix.len(), &probs, id, cfg.top_k_logprobs as usize));
            prefix.push(id);
        }
        Ok(GenerationTrace::from_steps(prompt_key(prompt), steps, plan.used_context))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::prompt::{render_probe, PromptTemplate};
    use crate::model::validate_trace;

    fn vocab(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    fn spec_with(fact: MockFact, sharpness: f64) -> MockLlmSpec {
        let mut spec = MockLlmSpec::new(vocab(&["paris", "london", "rome", "berlin"]), sharpness, 7);
        spec.knowledge.insert("q1".into(), fact);
        spec
    }

    fn fact(known: bool) -> MockFact {
        MockFact {
            question: "What is the capital of France?".into(),
            answer: "paris".into(),
            known,
            hallucination: Some("rome".into()),
            alternatives: vec![],
            ptrue: None,
            context_hurts: false,
        }
    }

    fn prompt() -> String {
        PromptTemplate::default().render_qa("What is the capital of France?", None)
    }

    #[test]
    fn infinite_sharpness_gives_certain_tokens() {
        let llm = MockLlm::new(spec_with(fact(true), f64::INFINITY)).unwrap();
        let t = llm.generate(&prompt(), &DecodeConfig::greedy()).unwrap();
        assert_eq!(t.text, "paris");
        assert!(t.steps.iter().all(|s| s.chosen_logprob == 0.0));
        assert!(validate_trace(&t).is_empty(), "{:?}", validate_trace(&t));
    }

    #[test]
    fn zero_sharpness_is_uniform() {
        let mut spec = spec_with(fact(false), 5.0);
        spec.unknown_sharpness = 0.0;
        let llm = MockLlm::new(spec).unwrap();
        let t = llm.generate(&prompt(), &DecodeConfig::greedy()).unwrap();
        for s in &t.steps {
            assert_eq!(s.alternatives.len(), 4);
            for (_, lp) in &s.alternatives {
                assert!((lp - 0.25f64.ln()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn distributions_conserve_mass_with_truncation() {
        let llm = MockLlm::new(spec_with(fact(true), 1.3)).unwrap();
        let cfg = DecodeConfig { top_k_logprobs: 2, ..DecodeConfig::sampling(7) };
        let set = llm.generate_n(&prompt(), &cfg).unwrap();
        for t in &set.samples {
            assert!(validate_trace(t).is_empty(), "{:?}", validate_trace(t));
        }
    }

    #[test]
    fn context_with_answer_rescues_unknown_fact() {
        let llm = MockLlm::new(spec_with(fact(false), 5.0)).unwrap();
        let p = PromptTemplate::default()
            .render_qa("What is the capital of France?", Some("[1] France: its capital is Paris."));
        let t = llm.generate(&p, &DecodeConfig::greedy()).unwrap();
        assert_eq!(t.text, "paris");
        assert!(t.used_context);
        let t = llm.generate(&prompt(), &DecodeConfig::greedy()).unwrap();
        assert_eq!(t.text, "rome");
    }

    #[test]
    fn equiprobable_alternatives_split_samples() {
        let mut f = fact(true);
        f.alternatives = vec![("london".into(), 1.0)];
        let llm = MockLlm::new(spec_with(f, f64::INFINITY)).unwrap();
        let set = llm.generate_n(&prompt(), &DecodeConfig::sampling(1000)).unwrap();
        let paris = set.samples.iter().filter(|s| s.text == "paris").count() as f64 / 1000.0;
        let london = set.samples.iter().filter(|s| s.text == "london").count() as f64 / 1000.0;
        assert!((0.45..=0.55).contains(&paris), "{paris}");
        assert!((0.45..=0.55).contains(&london), "{london}");
    }

    #[test]
    fn probe_forces_ptrue() {
        for p in [0.9, 0.0] {
            let mut f = fact(true);
            f.ptrue = Some(p);
            let llm = MockLlm::new(spec_with(f, 3.0)).unwrap();
            let t = llm
                .generate(&render_probe("What is the capital of France?", "paris"), &DecodeConfig::greedy())
                .unwrap();
            let read = crate::llm::read_ptrue(&t).unwrap();
            assert!((read.p_true - p).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_answers_outside_vocabulary() {
        let mut f = fact(true);
        f.answer = "madrid".into();
        assert!(MockLlm::new(spec_with(f.clone(), 1.0)).is_err());
        let mut spec = spec_with(f, 1.0);
        spec.extend_vocabulary_from_facts();
        assert!(MockLlm::new(spec).is_ok());
    }

    #[test]
    fn spec_json_accepts_inf() {
        let spec = spec_with(fact(true), f64::INFINITY);
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"inf\""));
        let back: MockLlmSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn force_scoring_follows_given_tokens() {
        let llm = MockLlm::new(spec_with(fact(true), 2.0)).unwrap();
        let t = llm.score_continuation(&prompt(), &["london".to_owned()], &DecodeConfig::greedy()).unwrap();
        assert_eq!(t.text, "london");
        let uncond = llm
            .score_continuation(
                &PromptTemplate::default().render_answer_only(),
                &["paris".to_owned()],
                &DecodeConfig::greedy(),
            )
            .unwrap();
        assert!((uncond.total_logprob - 0.25f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn hidden_states_are_deterministic() {
        let mut spec = spec_with(fact(true), 2.0);
        spec.hidden_dim = 3;
        let llm = MockLlm::new(spec).unwrap();
        let a = llm.hidden_state("What is the capital of France?").unwrap();
        assert_eq!(a, llm.hidden_state("What is the capital of France?").unwrap());
        assert_eq!(a.len(), 3);
    }
}
