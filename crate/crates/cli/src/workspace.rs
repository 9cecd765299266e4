//! Shared construction of models, retrievers and pipelines for the stages.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use ragate_core::estimators::{DensityModels, MethodId};
use ragate_core::io;
use ragate_core::llm::{
    DecodeConfig, Gateway, GenerationCache, LanguageModel, MockLlm, MockLlmSpec, OpenAiClient, OpenAiConfig,
};
use ragate_core::model::QaExample;
use ragate_core::pipeline::{HiddenSource, Pipeline, PipelineConfig};
use ragate_core::retrieval::{Bm25Index, Bm25Params, RemoteSearch, Retriever};

use crate::config::{DatasetRef, ExperimentConfig, LlmConfig};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub const BOTH: [Split; 2] = [Split::Train, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> CliResult<()> {
    write_bytes(path, &io::to_jsonl_bytes(items)?)
}

/// Reads a prior stage's JSON output, pointing at `stage` when absent.
pub fn read_json<T: DeserializeOwned>(path: &Path, stage: &'static str) -> CliResult<T> {
    if !path.is_file() {
        return Err(CliError::upstream(path, stage));
    }
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path, stage: &'static str) -> CliResult<Vec<T>> {
    if !path.is_file() {
        return Err(CliError::upstream(path, stage));
    }
    Ok(io::read_jsonl(path)?)
}

/// Everything built once per command from the configuration.
pub struct Workspace {
    pub cfg: ExperimentConfig,
    pub gateway: Arc<Gateway>,
    pub retriever: Arc<dyn Retriever>,
    pub mock: Option<Arc<MockLlm>>,
}

pub fn load_mock(path: &Path) -> CliResult<MockLlm> {
    let text = std::fs::read_to_string(path)?;
    let spec: MockLlmSpec =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("mock spec {}: {e}", path.display())))?;
    Ok(MockLlm::new(spec)?)
}

pub fn index_path(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.join("index").join("bm25.json")
}

/// The persisted index when `ragate index` has run, else one built from the
/// corpus in memory.
pub fn build_retriever(cfg: &ExperimentConfig) -> CliResult<Arc<dyn Retriever>> {
    if let Some(endpoint) = &cfg.retriever_endpoint {
        return Ok(Arc::new(RemoteSearch::new(endpoint, Duration::from_secs(30), 3)));
    }
    let idx = index_path(cfg);
    if idx.is_file() {
        let index: Bm25Index = read_json(&idx, "index")?;
        return Ok(Arc::new(index));
    }
    let corpus = cfg.corpus.as_ref().ok_or_else(|| CliError::Config("no corpus configured".into()))?;
    Ok(Arc::new(Bm25Index::build(io::load_corpus(corpus)?, Bm25Params::default())?))
}

impl Workspace {
    pub fn open(cfg: &ExperimentConfig) -> CliResult<Self> {
        let (backend, mock): (Arc<dyn LanguageModel>, Option<Arc<MockLlm>>) = match &cfg.llm {
            LlmConfig::Mock { spec } => {
                let m = Arc::new(load_mock(spec)?);
                (m.clone(), Some(m))
            }
            LlmConfig::Endpoint { api_base, model, timeout_secs, max_attempts } => {
                let oc = OpenAiConfig {
                    api_base: api_base.clone().unwrap_or_default(),
                    api_key: std::env::var("LLM_API_KEY").ok(),
                    model: model.clone().unwrap_or_default(),
                    timeout_secs: *timeout_secs,
                    max_attempts: *max_attempts,
                };
                (Arc::new(OpenAiClient::new(oc)), None)
            }
        };
        let cache = GenerationCache::open(cfg.cache_dir())?;
        let gateway = Gateway::new(backend).with_cache(cache).with_max_in_flight(cfg.max_in_flight);
        Ok(Workspace { cfg: cfg.clone(), gateway: Arc::new(gateway), retriever: build_retriever(cfg)?, mock })
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            context_k: self.cfg.context_k,
            sampling: DecodeConfig::sampling(self.cfg.n_samples),
            estimators: self.cfg.estimator_settings.clone(),
            ..PipelineConfig::default()
        }
    }

    pub fn examples(&self, d: &DatasetRef, split: Split) -> CliResult<Vec<QaExample>> {
        let path = match split {
            Split::Train => &d.train,
            Split::Test => &d.test,
        };
        Ok(io::load_dataset(path)?)
    }

    /// Hidden features from configured files, falling back to the mock.
    pub fn hidden_source(&self, d: &DatasetRef) -> CliResult<Option<HiddenSource>> {
        let files: Vec<&PathBuf> = [d.hidden_train.as_ref(), d.hidden_test.as_ref()].into_iter().flatten().collect();
        if !files.is_empty() {
            let mut map = HashMap::new();
            for f in files {
                let feats = io::load_hidden_features(f)?;
                io::validate_hidden_features(&feats)?;
                for h in feats {
                    map.insert(h.example_id, h.vector);
                }
            }
            return Ok(Some(HiddenSource::Table(Arc::new(map))));
        }
        Ok(self.mock.as_ref().filter(|m| m.spec().hidden_dim > 0).map(|m| HiddenSource::Mock(m.clone())))
    }

    /// Density models for the hidden-state estimators: fitted on this
    /// dataset's training split, with every dataset's training split pooled
    /// as the background.
    pub fn density(&self, d: &DatasetRef, methods: &[MethodId]) -> CliResult<Option<DensityModels>> {
        if !methods.iter().any(|m| m.requirements().hidden) {
            return Ok(None);
        }
        let mut per_dataset: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
        for other in &self.cfg.datasets {
            let source = self.hidden_source(other)?.ok_or_else(|| {
                CliError::Config(format!("dataset {}: hidden-state estimators need features", other.name))
            })?;
            let rows: Vec<Vec<f64>> =
                self.examples(other, Split::Train)?.iter().filter_map(|ex| source.get(ex)).collect();
            per_dataset.insert(other.name.clone(), rows);
        }
        let train = per_dataset.get(&d.name).cloned().unwrap_or_default();
        if train.len() < 2 {
            return Err(CliError::Config(format!("dataset {}: too few hidden feature rows", d.name)));
        }
        let background: Vec<Vec<f64>> = per_dataset.values().flatten().cloned().collect();
        Ok(Some(DensityModels::fit(&train, Some(&background), &self.cfg.estimator_settings)?))
    }

    pub fn pipeline(&self, d: &DatasetRef, methods: &[MethodId]) -> CliResult<Pipeline> {
        Ok(Pipeline {
            gateway: self.gateway.clone(),
            retriever: self.retriever.clone(),
            similarity: Arc::from(self.cfg.estimator_settings.similarity.build()),
            hidden: self.hidden_source(d)?,
            density: self.density(d, methods)?,
            cfg: self.pipeline_config(),
        })
    }
}
