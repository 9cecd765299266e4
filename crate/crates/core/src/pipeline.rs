//! Answering strategies with exact LM- and retriever-call accounting.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deciders::{DeciderModel, DecisionRow, DecisionTable};
use crate::error::{Error, Result};
use crate::estimators::hybrid::{assemble_hybrid, HybridStats, Manifest};
use crate::estimators::similarity::Similarity;
use crate::estimators::{compute, DensityModels, EstimatorSettings, MethodId, Requirements, ScoreInputs};
use crate::evalkit::{exact_match, f1, in_accuracy};
use crate::llm::prompt::PromptTemplate;
use crate::llm::{DecodeConfig, Gateway, MockLlm};
use crate::model::{GenerationTrace, QaExample, RunRecord, SampleSet, Strategy};
use crate::retrieval::{render_context, Retriever, DEFAULT_CONTEXT_K};

pub const NO_CONTEXT_FLAG: &str = "no-context-retrieved";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub context_k: usize,
    pub template: PromptTemplate,
    pub greedy: DecodeConfig,
    pub sampling: DecodeConfig,
    pub estimators: EstimatorSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            context_k: DEFAULT_CONTEXT_K,
            template: PromptTemplate::default(),
            greedy: DecodeConfig::greedy(),
            sampling: DecodeConfig::sampling(crate::llm::DEFAULT_SAMPLES),
            estimators: EstimatorSettings::default(),
        }
    }
}

/// Where hidden-state features come from.
#[derive(Clone)]
pub enum HiddenSource {
    /// Synthetic states from the mock model, keyed by question text.
    Mock(Arc<MockLlm>),
    /// Precomputed vectors keyed by example id.
    Table(Arc<HashMap<String, Vec<f64>>>),
}

impl HiddenSource {
    pub fn get(&self, ex: &QaExample) -> Option<Vec<f64>> {
        match self {
            HiddenSource::Mock(m) => m.hidden_state(&ex.question),
            HiddenSource::Table(t) => t.get(&ex.id).cloned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub trace: GenerationTrace,
    pub text: String,
}

impl Answer {
    fn from_trace(trace: GenerationTrace) -> Self {
        Answer { text: trace.text.trim().to_owned(), trace }
    }
}

/// Scores gathered for one question and the auxiliary LM calls they cost.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreBundle {
    pub scores: BTreeMap<MethodId, f64>,
    pub aux_calls: u32,
    pub samples: Option<SampleSet>,
}

/// Estimator manifest plus the decider trained on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveScorer {
    pub manifest: Manifest,
    /// Training-split statistics when the features are a Hybrid vector.
    pub hybrid: Option<HybridStats>,
    pub decider: DeciderModel,
}

impl AdaptiveScorer {
    pub fn check(&self) -> Result<()> {
        if self.decider.manifest_hash != self.manifest.hash() {
            return Err(Error::Config(format!(
                "decider was trained on manifest {} but the estimator manifest hashes to {}",
                self.decider.manifest_hash,
                self.manifest.hash()
            )));
        }
        if let Some(h) = &self.hybrid {
            if h.manifest != self.manifest {
                return Err(Error::Config("hybrid statistics were fitted on a different manifest".into()));
            }
        } else if self.manifest.len() != 1 {
            return Err(Error::Config("a multi-method manifest needs hybrid statistics".into()));
        }
        if self.decider.dim() != self.manifest.len() {
            return Err(Error::Config(format!(
                "decider expects {} features, manifest has {}",
                self.decider.dim(),
                self.manifest.len()
            )));
        }
        Ok(())
    }

    /// Decider input for one question.
    pub fn features(&self, example_id: &str, scores: &BTreeMap<MethodId, f64>) -> Result<Vec<f64>> {
        match &self.hybrid {
            Some(stats) => Ok(assemble_hybrid(example_id, scores, stats).z),
            None => {
                let m = self.manifest.methods()[0];
                scores
                    .get(&m)
                    .copied()
                    .map(|v| vec![v])
                    .ok_or_else(|| Error::data(format!("{example_id}: no {m} score")))
            }
        }
    }
}

pub struct Pipeline {
    pub gateway: Arc<Gateway>,
    pub retriever: Arc<dyn Retriever>,
    pub similarity: Arc<dyn Similarity>,
    pub hidden: Option<HiddenSource>,
    pub density: Option<DensityModels>,
    pub cfg: PipelineConfig,
}

fn record(
    ex: &QaExample,
    strategy: Strategy,
    decision: u8,
    answer: &str,
    lm_calls: u32,
    retrieval_calls: u32,
    scores: &BTreeMap<MethodId, f64>,
    flags: Vec<String>,
) -> RunRecord {
    RunRecord {
        example_id: ex.id.clone(),
        strategy,
        decision,
        answer: answer.to_owned(),
        correct_in_acc: in_accuracy(answer, &ex.golds),
        correct_em: exact_match(answer, &ex.golds),
        f1: f1(answer, &ex.golds),
        lm_calls,
        retrieval_calls,
        scores: scores.iter().map(|(k, v)| (k.id().to_owned(), *v)).collect(),
        flags,
    }
}

impl Pipeline {
    fn tag<T>(ex: &QaExample, r: Result<T>) -> Result<T> {
        r.map_err(|e| e.context(format!("example {}", ex.id)))
    }

    pub fn no_rag_prompt(&self, ex: &QaExample) -> String {
        self.cfg.template.render_qa(&ex.question, None)
    }

    /// Retrieves the top-k context and renders the with-context prompt.
    pub fn rag_prompt(&self, ex: &QaExample) -> Result<(String, Vec<String>)> {
        let hits = Self::tag(ex, self.retriever.search(&ex.question, self.cfg.context_k))?;
        let docs: Vec<_> = hits.iter().filter_map(|h| self.retriever.document(&h.doc_id)).collect();
        let mut flags = Vec::new();
        if docs.is_empty() {
            flags.push(NO_CONTEXT_FLAG.to_owned());
        }
        Ok((self.cfg.template.render_qa(&ex.question, Some(&render_context(&docs))), flags))
    }

    /// One greedy completion from the question-only prompt.
    pub fn answer_no_rag(&self, ex: &QaExample) -> Result<Answer> {
        Self::tag(ex, self.gateway.complete(&self.no_rag_prompt(ex), &self.cfg.greedy)).map(Answer::from_trace)
    }

    /// One retrieval followed by one completion with the retrieved context.
    pub fn answer_with_rag(&self, ex: &QaExample) -> Result<(Answer, Vec<String>)> {
        let (prompt, flags) = self.rag_prompt(ex)?;
        let trace = Self::tag(ex, self.gateway.complete(&prompt, &self.cfg.greedy))?;
        Ok((Answer::from_trace(trace), flags))
    }

    /// Scores for `methods` around an existing greedy answer. Samples share
    /// the greedy call's accounting; force-scoring and probing are billed as
    /// auxiliary calls.
    pub fn score(&self, ex: &QaExample, greedy: &Answer, methods: &[MethodId]) -> Result<ScoreBundle> {
        let req = methods.iter().fold(Requirements::default(), |acc, m| acc.union(m.requirements()));
        let samples = if req.samples {
            Some(Self::tag(ex, self.gateway.sample_n(&self.no_rag_prompt(ex), &self.cfg.sampling))?)
        } else {
            None
        };
        let unconditional = if req.unconditional {
            let tokens: Vec<String> = greedy.trace.steps.iter().map(|s| s.token_text.clone()).collect();
            let prompt = self.cfg.template.render_answer_only();
            Some(Self::tag(ex, self.gateway.force_score(&prompt, &tokens, &self.cfg.greedy))?)
        } else {
            None
        };
        let ptrue = if req.ptrue {
            let probe = self.gateway.ptrue_probe(&ex.question, &greedy.text, self.cfg.greedy.top_k_logprobs);
            Some(Self::tag(ex, probe)?.p_true)
        } else {
            None
        };
        let hidden = if req.hidden {
            let source =
                self.hidden.as_ref().ok_or_else(|| Error::Config("no hidden-feature source configured".into()))?;
            Some(source.get(ex).ok_or_else(|| Error::data(format!("example {}: no hidden features", ex.id)))?)
        } else {
            None
        };
        let inputs = ScoreInputs {
            greedy: Some(&greedy.trace),
            samples: samples.as_ref(),
            unconditional: unconditional.as_ref(),
            ptrue,
            hidden: hidden.as_deref(),
        };
        let mut scores = BTreeMap::new();
        for m in methods {
            let s = compute(*m, &inputs, &self.cfg.estimators, self.similarity.as_ref(), self.density.as_ref());
            scores.insert(*m, Self::tag(ex, s)?.value);
        }
        Ok(ScoreBundle { scores, aux_calls: req.aux_calls(), samples })
    }

    pub fn run_never(&self, ex: &QaExample) -> Result<RunRecord> {
        let a = self.answer_no_rag(ex)?;
        Ok(record(ex, Strategy::Never, 0, &a.text, 1, 0, &BTreeMap::new(), vec![]))
    }

    pub fn run_always(&self, ex: &QaExample) -> Result<RunRecord> {
        let (a, flags) = self.answer_with_rag(ex)?;
        Ok(record(ex, Strategy::Always, 1, &a.text, 1, 1, &BTreeMap::new(), flags))
    }

    pub fn run_adaptive(&self, ex: &QaExample, scorer: &AdaptiveScorer) -> Result<RunRecord> {
        scorer.check()?;
        let initial = self.answer_no_rag(ex)?;
        let bundle = self.score(ex, &initial, scorer.manifest.methods())?;
        let x = scorer.features(&ex.id, &bundle.scores)?;
        let decision = Self::tag(ex, scorer.decider.predict(&x))?;
        let (text, flags) = if decision == 1 {
            let (a, flags) = self.answer_with_rag(ex)?;
            (a.text, flags)
        } else {
            (initial.text, vec![])
        };
        let lm = 1 + u32::from(decision) + bundle.aux_calls;
        Ok(record(ex, Strategy::Adaptive, decision, &text, lm, u32::from(decision), &bundle.scores, flags))
    }

    /// Retrieves exactly when the label says the no-retrieval answer was wrong.
    pub fn run_ideal(&self, ex: &QaExample, label: Option<u8>) -> Result<RunRecord> {
        let y = label.ok_or_else(|| Error::data(format!("example {}: no self-knowledge label", ex.id)))?;
        if y > 1 {
            return Err(Error::data(format!("example {}: label {y} is not binary", ex.id)));
        }
        let initial = self.answer_no_rag(ex)?;
        let (text, flags) = if y == 1 {
            let (a, flags) = self.answer_with_rag(ex)?;
            (a.text, flags)
        } else {
            (initial.text, vec![])
        };
        Ok(record(ex, Strategy::Ideal, y, &text, 1 + u32::from(y), u32::from(y), &BTreeMap::new(), flags))
    }

    /// Both answers, their correctness and every requested score for one
    /// question.
    pub fn score_row(&self, ex: &QaExample, methods: &[MethodId]) -> Result<ScoredRow> {
        let norag = self.answer_no_rag(ex)?;
        let (rag, _) = self.answer_with_rag(ex)?;
        let bundle = self.score(ex, &norag, methods)?;
        Ok(ScoredRow {
            example_id: ex.id.clone(),
            answer_norag: norag.text.clone(),
            answer_rag: rag.text.clone(),
            correct_norag: in_accuracy(&norag.text, &ex.golds),
            correct_rag: in_accuracy(&rag.text, &ex.golds),
            scores: bundle.scores.iter().map(|(k, v)| (k.id().to_owned(), *v)).collect(),
            error: None,
        })
    }

    /// Scores every example in parallel; failures become rows carrying the
    /// error instead of aborting the run. Output order follows the input.
    pub fn score_dataset(&self, examples: &[QaExample], methods: &[MethodId]) -> Vec<ScoredRow> {
        examples
            .par_iter()
            .map(|ex| {
                self.score_row(ex, methods).unwrap_or_else(|e| {
                    log::warn!("{e}");
                    ScoredRow::failed(&ex.id, &e)
                })
            })
            .collect()
    }
}

/// One question's answers, correctness and estimator scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRow {
    pub example_id: String,
    pub answer_norag: String,
    pub answer_rag: String,
    pub correct_norag: bool,
    pub correct_rag: bool,
    /// Keyed by method id.
    pub scores: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ScoredRow {
    pub fn failed(example_id: &str, e: &Error) -> Self {
        ScoredRow {
            example_id: example_id.to_owned(),
            answer_norag: String::new(),
            answer_rag: String::new(),
            correct_norag: false,
            correct_rag: false,
            scores: BTreeMap::new(),
            error: Some(e.to_string()),
        }
    }

    pub fn y(&self) -> u8 {
        u8::from(!self.correct_norag)
    }

    pub fn method_scores(&self) -> Result<BTreeMap<MethodId, f64>> {
        self.scores.iter().map(|(k, v)| Ok((k.parse::<MethodId>()?, *v))).collect()
    }
}

/// Decision table over successfully scored rows: one scalar column for a
/// single-method manifest, z-scored Hybrid vectors when `hybrid` is given.
pub fn build_decision_table(
    rows: &[ScoredRow],
    manifest: &Manifest,
    hybrid: Option<&HybridStats>,
) -> Result<DecisionTable> {
    if hybrid.is_none() && manifest.len() != 1 {
        return Err(Error::invalid("a multi-method table needs hybrid statistics"));
    }
    let mut out = Vec::with_capacity(rows.len());
    for r in rows.iter().filter(|r| r.error.is_none()) {
        let scores = r.method_scores()?;
        let features = match hybrid {
            Some(stats) => assemble_hybrid(&r.example_id, &scores, stats).z,
            None => {
                let m = manifest.methods()[0];
                vec![*scores.get(&m).ok_or_else(|| Error::data(format!("{}: no {m} score", r.example_id)))?]
            }
        };
        out.push(DecisionRow {
            example_id: r.example_id.clone(),
            features,
            y: r.y(),
            correct_norag: r.correct_norag,
            correct_rag: r.correct_rag,
        });
    }
    let names = manifest.methods().iter().map(|m| m.id().to_owned()).collect();
    DecisionTable::new(names, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deciders::{fit, DeciderKind, FitOptions};
    use crate::estimators::similarity::LexicalSimilarity;
    use crate::llm::{MockFact, MockLlmSpec};
    use crate::model::{Document, HopClass};
    use crate::retrieval::{Bm25Index, Bm25Params};

    fn setup(known: &[bool]) -> (Pipeline, Vec<QaExample>) {
        let vocab: Vec<String> = (0..30).map(|i| format!("w{i}")).collect();
        let mut spec = MockLlmSpec::new(vocab, 6.0, 1);
        let mut docs = Vec::new();
        let mut examples = Vec::new();
        for (i, k) in known.iter().enumerate() {
            let answer = format!("ans{i}");
            spec.knowledge.insert(
                format!("q{i}"),
                MockFact {
                    question: format!("question number {i}?"),
                    answer: answer.clone(),
                    known: *k,
                    hallucination: None,
                    alternatives: vec![],
                    ptrue: None,
                    context_hurts: false,
                },
            );
            docs.push(Document {
                doc_id: format!("d{i}"),
                title: format!("t{i}"),
                body: format!("number {i} is {answer}"),
            });
            examples.push(QaExample {
                id: format!("q{i}"),
                question: format!("question number {i}?"),
                golds: vec![answer],
                dataset: "toy".into(),
                hop_class: HopClass::Single,
            });
        }
        spec.extend_vocabulary_from_facts();
        let llm = Arc::new(MockLlm::new(spec).unwrap());
        let p = Pipeline {
            gateway: Arc::new(Gateway::new(llm)),
            retriever: Arc::new(Bm25Index::build(docs, Bm25Params::default()).unwrap()),
            similarity: Arc::new(LexicalSimilarity),
            hidden: None,
            density: None,
            cfg: PipelineConfig::default(),
        };
        (p, examples)
    }

    #[test]
    fn fixed_strategy_accounting() {
        let (p, ex) = setup(&[true, false]);
        let n = p.run_never(&ex[0]).unwrap();
        assert_eq!((n.lm_calls, n.retrieval_calls), (1, 0));
        assert!(n.correct_in_acc);
        let a = p.run_always(&ex[1]).unwrap();
        assert_eq!((a.lm_calls, a.retrieval_calls), (1, 1));
        assert!(a.correct_in_acc);
    }

    #[test]
    fn adaptive_paths_and_manifest_check() {
        let (p, ex) = setup(&[true, false, true, false]);
        let manifest = Manifest::parse(&["max_entropy"]).unwrap();
        let rows = p.score_dataset(&ex, manifest.methods());
        let table = build_decision_table(&rows, &manifest, None).unwrap();
        assert_eq!(table.labels(), vec![0, 1, 0, 1]);
        let decider = fit(DeciderKind::Threshold, &table, &FitOptions::default(), &manifest.hash()).unwrap();
        let scorer = AdaptiveScorer { manifest: manifest.clone(), hybrid: None, decider };
        let skip = p.run_adaptive(&ex[0], &scorer).unwrap();
        assert_eq!((skip.decision, skip.lm_calls, skip.retrieval_calls), (0, 1, 0));
        let ret = p.run_adaptive(&ex[1], &scorer).unwrap();
        assert_eq!((ret.decision, ret.lm_calls, ret.retrieval_calls), (1, 2, 1));
        assert!(ret.correct_in_acc);

        let mut bad = scorer.clone();
        bad.decider.manifest_hash = "0000".into();
        let before = p.gateway.lm_calls();
        assert!(p.run_adaptive(&ex[0], &bad).is_err());
        assert_eq!(p.gateway.lm_calls(), before);
    }

    #[test]
    fn ideal_requires_label() {
        let (p, ex) = setup(&[false]);
        assert!(p.run_ideal(&ex[0], None).is_err());
        let r = p.run_ideal(&ex[0], Some(1)).unwrap();
        assert_eq!((r.lm_calls, r.retrieval_calls), (2, 1));
    }
}
