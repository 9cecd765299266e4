//! Generator for the bundled toy experiment: a synthetic corpus, a mock LLM
//! that knows most facts, and a one-estimator configuration.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use ragate_core::estimators::LexicalSimilarity;
use ragate_core::llm::{Gateway, MockFact, MockLlm, MockLlmSpec};
use ragate_core::model::{Document, HopClass, QaExample};
use ragate_core::pipeline::{Pipeline, PipelineConfig};
use ragate_core::retrieval::{Bm25Index, Bm25Params};

use crate::error::CliResult;
use crate::workspace::{write_bytes, write_json, write_jsonl};

pub const TOY_SEED: u64 = 17;

const SYLLABLES: [&str; 16] =
    ["ka", "lo", "mi", "ren", "sa", "tor", "vel", "dun", "ish", "pra", "gol", "fen", "ut", "bar", "zy", "hom"];

const ANSWERS: [&str; 24] = [
    "amber", "basalt", "cobalt", "dunes", "ember", "falcons", "granite", "harbors", "indigo", "jasper", "kelp",
    "lanterns", "marble", "nectar", "obsidian", "pearls", "quartz", "rivers", "saffron", "tides", "umber", "violets",
    "willows", "zinc",
];

const FILLER: [&str; 16] = [
    "the", "a", "it", "is", "of", "and", "known", "for", "its", "many", "old", "new", "great", "small", "town",
    "famous",
];

/// Entity names are unique for indices below 256.
fn entity(i: usize) -> String {
    let a = SYLLABLES[i % 16];
    let b = SYLLABLES[(i / 16) % 16];
    let c = SYLLABLES[(i * 7 + 3) % 16];
    let mut name = format!("{a}{b}{c}");
    if let Some(first) = name.get_mut(0..1) {
        first.make_ascii_uppercase();
    }
    name
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyOptions {
    pub seed: u64,
    pub per_split: usize,
    /// Exact fraction of unknown facts in each split (rounded).
    pub unknown_rate: f64,
    /// Chance that a known fact is answered wrongly once context is added.
    pub context_hurts_rate: f64,
    /// Chance that a known fact gets a competing wrong answer, sometimes
    /// weighted above the correct one.
    pub ambiguous_rate: f64,
    pub known_sharpness: f64,
    pub unknown_sharpness: f64,
}

impl Default for ToyOptions {
    fn default() -> Self {
        ToyOptions {
            seed: TOY_SEED,
            per_split: 100,
            unknown_rate: 0.3,
            context_hurts_rate: 0.08,
            ambiguous_rate: 0.25,
            known_sharpness: 6.0,
            unknown_sharpness: 4.0,
        }
    }
}

pub struct ToyFixture {
    pub corpus: Vec<Document>,
    pub train: Vec<QaExample>,
    pub test: Vec<QaExample>,
    pub spec: MockLlmSpec,
}

impl ToyFixture {
    /// Mock-backed pipeline over an in-memory index of the corpus.
    pub fn pipeline(&self) -> ragate_core::Result<Pipeline> {
        let llm = Arc::new(MockLlm::new(self.spec.clone())?);
        Ok(Pipeline {
            gateway: Arc::new(Gateway::new(llm)),
            retriever: Arc::new(Bm25Index::build(self.corpus.clone(), Bm25Params::default())?),
            similarity: Arc::new(LexicalSimilarity),
            hidden: None,
            density: None,
            cfg: PipelineConfig::default(),
        })
    }
}

/// The bundled toy: 200 questions split evenly, one document each.
pub fn build() -> ToyFixture {
    build_with(&ToyOptions::default())
}

pub fn build_with(opts: &ToyOptions) -> ToyFixture {
    assert!(opts.per_split > 0 && 2 * opts.per_split <= 256, "toy splits hold 1 to 128 questions");
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let n = 2 * opts.per_split;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_unknown = (opts.unknown_rate * opts.per_split as f64).round() as usize;
    let mut known = vec![true; n];
    for split in order.chunks(opts.per_split) {
        let mut ids = split.to_vec();
        ids.shuffle(&mut rng);
        for i in &ids[..n_unknown.min(ids.len())] {
            known[*i] = false;
        }
    }
    let mut corpus = Vec::with_capacity(n);
    let mut examples = Vec::with_capacity(n);
    let mut knowledge = BTreeMap::new();
    for (i, known) in known.into_iter().enumerate() {
        let name = entity(i);
        let pos = rng.random_range(0..ANSWERS.len());
        let answer = ANSWERS[pos];
        let wrong = ANSWERS[(pos + rng.random_range(1..ANSWERS.len())) % ANSWERS.len()];
        let id = format!("toy-{i:03}");
        let question = format!("What is {name} known for?");
        corpus.push(Document {
            doc_id: format!("doc-{i:03}"),
            title: name.clone(),
            body: format!("{name} is a small town known for its {answer}."),
        });
        let context_hurts = known && rng.random_bool(opts.context_hurts_rate);
        let alternatives = if known && rng.random_bool(opts.ambiguous_rate) {
            vec![(wrong.to_owned(), rng.random_range(0.3..1.5))]
        } else {
            Vec::new()
        };
        knowledge.insert(
            id.clone(),
            MockFact {
                question: question.clone(),
                answer: answer.to_owned(),
                known,
                hallucination: Some(wrong.to_owned()),
                alternatives,
                ptrue: None,
                context_hurts,
            },
        );
        examples.push(QaExample {
            id,
            question,
            golds: vec![answer.to_owned()],
            dataset: "toy".into(),
            hop_class: HopClass::Single,
        });
    }
    let mut train: Vec<QaExample> = order[..opts.per_split].iter().map(|i| examples[*i].clone()).collect();
    let mut test: Vec<QaExample> = order[opts.per_split..].iter().map(|i| examples[*i].clone()).collect();
    train.sort_by(|a, b| a.id.cmp(&b.id));
    test.sort_by(|a, b| a.id.cmp(&b.id));
    let mut spec = MockLlmSpec::new(FILLER.iter().map(|w| (*w).to_owned()).collect(), opts.known_sharpness, opts.seed);
    spec.model_id = "toy-mock".into();
    spec.unknown_sharpness = opts.unknown_sharpness;
    spec.knowledge = knowledge;
    spec.extend_vocabulary_from_facts();
    ToyFixture { corpus, train, test, spec }
}

/// Writes the fixture and its configuration into `dir`.
pub fn write_fixture(dir: &Path) -> CliResult<()> {
    let fx = build();
    write_jsonl(&dir.join("corpus.jsonl"), &fx.corpus)?;
    write_jsonl(&dir.join("train.jsonl"), &fx.train)?;
    write_jsonl(&dir.join("test.jsonl"), &fx.test)?;
    write_json(&dir.join("mock_spec.json"), &fx.spec)?;
    let config = json!({
        "datasets": [{"name": "toy", "train": "train.jsonl", "test": "test.jsonl"}],
        "corpus": "corpus.jsonl",
        "llm": {"mock": {"spec": "mock_spec.json"}},
        "estimators": ["max_entropy"],
        "decider_kinds": ["threshold"],
        "selection_mode": "holdout",
        "n_samples": 5,
        "context_k": 5,
        "seed": TOY_SEED,
        "rademacher_draws": 20,
        "output_dir": "out"
    });
    write_json(&dir.join("config.json"), &config)?;
    write_bytes(&dir.join(".gitignore"), b"out/\n")?;
    Ok(())
}
