//! Experiment configuration: one JSON file, `--override` patches and
//! environment variables for endpoint settings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use ragate_core::deciders::{DeciderKind, SelectionMode, ThresholdMode};
use ragate_core::estimators::{EstimatorSettings, MethodId};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRef {
    pub name: String,
    pub train: PathBuf,
    pub test: PathBuf,
    /// JSONL of `{"example_id", "vector"}` for hidden-state estimators.
    #[serde(default)]
    pub hidden_train: Option<PathBuf>,
    #[serde(default)]
    pub hidden_test: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LlmConfig {
    Mock {
        spec: PathBuf,
    },
    Endpoint {
        #[serde(default)]
        api_base: Option<String>,
        #[serde(default)]
        model: Option<String>,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
        #[serde(default = "default_attempts")]
        max_attempts: u32,
    },
}

fn default_timeout() -> u64 {
    60
}
fn default_attempts() -> u32 {
    3
}
fn default_kinds() -> Vec<DeciderKind> {
    DeciderKind::TRAINABLE.to_vec()
}
fn default_mode() -> SelectionMode {
    SelectionMode::Holdout
}
fn default_threshold_mode() -> ThresholdMode {
    ThresholdMode::LogGrid200
}
fn default_samples() -> u32 {
    ragate_core::llm::DEFAULT_SAMPLES
}
fn default_k() -> usize {
    ragate_core::retrieval::DEFAULT_CONTEXT_K
}
fn default_draws() -> usize {
    50
}
fn default_in_flight() -> usize {
    ragate_core::llm::DEFAULT_MAX_IN_FLIGHT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetRef>,
    #[serde(default)]
    pub corpus: Option<PathBuf>,
    #[serde(default)]
    pub retriever_endpoint: Option<String>,
    pub llm: LlmConfig,
    /// Method ids; `hybrid` adds a decider over all listed methods.
    pub estimators: Vec<String>,
    #[serde(default = "default_kinds")]
    pub decider_kinds: Vec<DeciderKind>,
    #[serde(default = "default_mode")]
    pub selection_mode: SelectionMode,
    #[serde(default = "default_threshold_mode")]
    pub threshold_mode: ThresholdMode,
    #[serde(default = "default_samples")]
    pub n_samples: u32,
    #[serde(default = "default_k")]
    pub context_k: usize,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub estimator_settings: EstimatorSettings,
    #[serde(default = "default_draws")]
    pub rademacher_draws: usize,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
}

pub const HYBRID: &str = "hybrid";

/// Sets `dotted.key` in a JSON object; the value is parsed as JSON and
/// falls back to a plain string.
pub fn apply_override(root: &mut Value, assignment: &str) -> CliResult<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {assignment:?} is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert((*part).to_owned(), value);
                    return Ok(());
                }
                map.entry((*part).to_owned()).or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| CliError::Config(format!("override key {key:?}: {part:?} is not an index")))?;
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| CliError::Config(format!("override key {key:?}: index {idx} out of range")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(CliError::Config(format!("override key {key:?} descends into a scalar"))),
        };
    }
    Err(CliError::Config("empty override key".into()))
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path, overrides: &[String]) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut root: Value =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        for o in overrides {
            apply_override(&mut root, o)?;
        }
        let mut cfg: ExperimentConfig =
            serde_json::from_value(root).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.resolve_paths(&base);
        cfg.apply_env();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        for d in &mut self.datasets {
            resolve(base, &mut d.train);
            resolve(base, &mut d.test);
            for h in [&mut d.hidden_train, &mut d.hidden_test].into_iter().flatten() {
                resolve(base, h);
            }
        }
        if let Some(c) = &mut self.corpus {
            resolve(base, c);
        }
        if let LlmConfig::Mock { spec } = &mut self.llm {
            resolve(base, spec);
        }
        resolve(base, &mut self.output_dir);
        if let Some(c) = &mut self.cache_dir {
            resolve(base, c);
        }
    }

    /// `RAGATE_CACHE_DIR` and the `LLM_*` endpoint variables win over the file.
    pub fn apply_env(&mut self) {
        if let Ok(dir) = std::env::var("RAGATE_CACHE_DIR") {
            if !dir.is_empty() {
                self.cache_dir = Some(PathBuf::from(dir));
            }
        }
        if let LlmConfig::Endpoint { api_base, model, .. } = &mut self.llm {
            if let Ok(v) = std::env::var("LLM_API_BASE") {
                *api_base = Some(v);
            }
            if let Ok(v) = std::env::var("LLM_MODEL") {
                *model = Some(v);
            }
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.datasets.is_empty() {
            return bad("no datasets configured".into());
        }
        let mut names: Vec<&str> = self.datasets.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("dataset names must be unique".into());
        }
        for d in &self.datasets {
            if d.name.is_empty() || d.name.contains(['/', '\\']) {
                return bad(format!("dataset name {:?} is not a plain identifier", d.name));
            }
            for p in
                [Some(&d.train), Some(&d.test), d.hidden_train.as_ref(), d.hidden_test.as_ref()].into_iter().flatten()
            {
                if !p.is_file() {
                    return bad(format!("dataset {}: file {} does not exist", d.name, p.display()));
                }
            }
        }
        match (&self.corpus, &self.retriever_endpoint) {
            (Some(c), None) if !c.is_file() => return bad(format!("corpus {} does not exist", c.display())),
            (Some(_), Some(_)) => return bad("set either corpus or retriever_endpoint, not both".into()),
            (None, None) => return bad("a corpus or a retriever_endpoint is required".into()),
            _ => {}
        }
        match &self.llm {
            LlmConfig::Mock { spec } if !spec.is_file() => {
                return bad(format!("mock spec {} does not exist", spec.display()))
            }
            LlmConfig::Endpoint { api_base: None, .. } => {
                return bad("LLM endpoint needs api_base or LLM_API_BASE".into())
            }
            LlmConfig::Endpoint { model: None, .. } => return bad("LLM endpoint needs model or LLM_MODEL".into()),
            _ => {}
        }
        self.methods()?;
        if self.estimators.is_empty() {
            return bad("no estimators configured".into());
        }
        if self.decider_kinds.is_empty() {
            return bad("no decider kinds configured".into());
        }
        if self.n_samples == 0 || self.context_k == 0 || self.max_in_flight == 0 {
            return bad("n_samples, context_k and max_in_flight must be positive".into());
        }
        Ok(())
    }

    /// Scalar methods in configuration order.
    pub fn methods(&self) -> CliResult<Vec<MethodId>> {
        let mut out = Vec::new();
        for e in self.estimators.iter().filter(|e| *e != HYBRID) {
            let m: MethodId = e.parse().map_err(|err: ragate_core::Error| CliError::Config(err.to_string()))?;
            if m == MethodId::Hybrid {
                continue;
            }
            if out.contains(&m) {
                return Err(CliError::Config(format!("estimator {m} listed twice")));
            }
            out.push(m);
        }
        Ok(out)
    }

    pub fn hybrid(&self) -> bool {
        self.estimators.iter().any(|e| e == HYBRID || e.eq_ignore_ascii_case("Hybrid"))
    }

    /// Names of the deciders fitted per dataset: every method id, plus
    /// `hybrid` when enabled.
    pub fn decider_names(&self) -> CliResult<Vec<String>> {
        let mut names: Vec<String> = self.methods()?.iter().map(|m| m.id().to_owned()).collect();
        if self.hybrid() {
            names.push(HYBRID.to_owned());
        }
        Ok(names)
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.output_dir.join("cache"))
    }
}
