//! LLM gateway: greedy generation with log-probabilities, batched sampling,
//! P(True) probing and answer force-scoring, behind a persistent cache and
//! an LM-call counter.
//!
//! The counter counts *logical* calls that reached the backend: a batched
//! N-sample request counts once, and cache hits are free.

mod cache;
pub mod mock;
pub mod openai;
pub mod prompt;

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use cache::{CacheEntry, GenerationCache};
pub use mock::{MockFact, MockLlm, MockLlmSpec};
pub use openai::{OpenAiClient, OpenAiConfig};

use crate::error::{Error, Result};
use crate::model::{GenerationTrace, SampleSet};

pub const DEFAULT_TOP_K: u32 = 20;
pub const DEFAULT_SAMPLES: u32 = 5;
pub const DEFAULT_MAX_IN_FLIGHT: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub temperature: f64,
    pub max_tokens: u32,
    pub top_k_logprobs: u32,
    pub n_samples: u32,
}

impl DecodeConfig {
    pub fn greedy() -> Self {
        DecodeConfig { temperature: 0.0, max_tokens: 32, top_k_logprobs: DEFAULT_TOP_K, n_samples: 1 }
    }

    pub fn sampling(n_samples: u32) -> Self {
        DecodeConfig { temperature: 1.0, n_samples, ..Self::greedy() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature >= 0.0) || !self.temperature.is_finite() {
            return Err(Error::Config(format!("temperature must be ≥ 0, got {}", self.temperature)));
        }
        if self.max_tokens == 0 {
            return Err(Error::Config("max_tokens must be positive".into()));
        }
        if self.top_k_logprobs == 0 {
            return Err(Error::Config("top_k_logprobs must be ≥ 1".into()));
        }
        if self.n_samples == 0 {
            return Err(Error::Config("n_samples must be ≥ 1".into()));
        }
        Ok(())
    }
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self::greedy()
    }
}

/// A completion backend: a hosted endpoint or the deterministic mock.
pub trait LanguageModel: Send + Sync {
    fn model_id(&self) -> String;

    fn generate(&self, prompt: &str, cfg: &DecodeConfig) -> Result<GenerationTrace>;

    /// `cfg.n_samples` generations for one prompt in a single logical request.
    fn generate_n(&self, prompt: &str, cfg: &DecodeConfig) -> Result<SampleSet>;

    /// Log-probabilities of a fixed continuation under `prompt`.
    fn score_continuation(&self, prompt: &str, continuation: &[String], cfg: &DecodeConfig) -> Result<GenerationTrace>;
}

/// Opaque key identifying a prompt.
pub fn prompt_key(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

fn request_key(kind: &str, model: &str, prompt: &str, cfg: &DecodeConfig, extra: &[String]) -> Result<String> {
    let mut h = Sha256::new();
    for part in [kind, model, prompt, &serde_json::to_string(cfg)?] {
        h.update(part.as_bytes());
        h.update([0u8]);
    }
    for part in extra {
        h.update(part.as_bytes());
        h.update([0u8]);
    }
    Ok(hex::encode(h.finalize()))
}

/// Probability of the affirmative first token in a P(True) probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PTrueProbe {
    pub p_true: f64,
    /// The affirmative token was absent from the top-K list while more than
    /// half of the mass sat in the unlisted tail.
    pub low_fidelity: bool,
}

/// Reads the affirmative mass from the first step of a probe trace.
pub fn read_ptrue(trace: &GenerationTrace) -> Result<PTrueProbe> {
    let first = trace.steps.first().ok_or(Error::EmptyGeneration)?;
    let mut matched = false;
    let mut p = 0.0;
    for (tok, lp) in &first.alternatives {
        if tok.trim().eq_ignore_ascii_case("true") {
            matched = true;
            p += lp.exp();
        }
    }
    Ok(PTrueProbe { p_true: p.clamp(0.0, 1.0), low_fidelity: !matched && first.tail_mass > 0.5 })
}

/// Counting semaphore bounding in-flight backend requests.
struct Limiter {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn new(n: usize) -> Self {
        Limiter { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut free = self.0.free.lock().unwrap_or_else(|e| e.into_inner());
        *free += 1;
        self.0.cv.notify_one();
    }
}

pub struct Gateway {
    backend: Arc<dyn LanguageModel>,
    cache: Option<GenerationCache>,
    lm_calls: AtomicU64,
    limiter: Limiter,
    key_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl Gateway {
    pub fn new(backend: Arc<dyn LanguageModel>) -> Self {
        Gateway {
            backend,
            cache: None,
            lm_calls: AtomicU64::new(0),
            limiter: Limiter::new(DEFAULT_MAX_IN_FLIGHT),
            key_locks: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_cache(mut self, cache: GenerationCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.limiter = Limiter::new(n);
        self
    }

    pub fn model_id(&self) -> String {
        self.backend.model_id()
    }

    /// Logical LM calls that reached the backend so far.
    pub fn lm_calls(&self) -> u64 {
        self.lm_calls.load(Ordering::SeqCst)
    }

    pub fn cache(&self) -> Option<&GenerationCache> {
        self.cache.as_ref()
    }

    pub fn complete(&self, prompt: &str, cfg: &DecodeConfig) -> Result<GenerationTrace> {
        cfg.validate()?;
        let key = request_key("complete", &self.model_id(), prompt, cfg, &[])?;
        self.cached(&key, CacheEntry::Trace, CacheEntry::into_trace, || self.backend.generate(prompt, cfg))
    }

    pub fn sample_n(&self, prompt: &str, cfg: &DecodeConfig) -> Result<SampleSet> {
        cfg.validate()?;
        let key = request_key("sample_n", &self.model_id(), prompt, cfg, &[])?;
        self.cached(&key, CacheEntry::Samples, CacheEntry::into_samples, || self.backend.generate_n(prompt, cfg))
    }

    pub fn force_score(&self, prompt: &str, continuation: &[String], cfg: &DecodeConfig) -> Result<GenerationTrace> {
        cfg.validate()?;
        let key = request_key("force_score", &self.model_id(), prompt, cfg, continuation)?;
        self.cached(&key, CacheEntry::Trace, CacheEntry::into_trace, || {
            self.backend.score_continuation(prompt, continuation, cfg)
        })
    }

    pub fn ptrue_probe(&self, question: &str, answer: &str, top_k: u32) -> Result<PTrueProbe> {
        let prompt = prompt::render_probe(question, answer);
        let cfg = DecodeConfig { temperature: 0.0, max_tokens: 1, top_k_logprobs: top_k, n_samples: 1 };
        read_ptrue(&self.complete(&prompt, &cfg)?)
    }

    /// Whether a request would be served from the cache.
    pub fn is_cached_completion(&self, prompt: &str, cfg: &DecodeConfig) -> Result<bool> {
        let key = request_key("complete", &self.model_id(), prompt, cfg, &[])?;
        Ok(self.cache.as_ref().is_some_and(|c| c.contains(&key)))
    }

    pub fn completion_key(&self, prompt: &str, cfg: &DecodeConfig) -> Result<String> {
        request_key("complete", &self.model_id(), prompt, cfg, &[])
    }

    pub fn samples_key(&self, prompt: &str, cfg: &DecodeConfig) -> Result<String> {
        request_key("sample_n", &self.model_id(), prompt, cfg, &[])
    }

    fn key_lock(&self, key: &str) -> Arc<Mutex<()>> {
        let mut locks = self.key_locks.lock().unwrap_or_else(|e| e.into_inner());
        locks.entry(key.to_owned()).or_default().clone()
    }

    fn cached<T, W, U, F>(&self, key: &str, wrap: W, unwrap: U, call: F) -> Result<T>
    where
        T: Serialize + DeserializeOwned,
        W: FnOnce(T) -> CacheEntry,
        U: Fn(CacheEntry) -> Option<T>,
        F: FnOnce() -> Result<T>,
    {
        let Some(cache) = &self.cache else {
            return self.call_backend(call);
        };
        let lock = self.key_lock(key);
        let _held = lock.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(entry) = cache.get(key)? {
            return unwrap(entry).ok_or_else(|| Error::data(format!("cache entry {key} has the wrong kind")));
        }
        let fresh = self.call_backend(call)?;
        let bytes = cache.put(key, &wrap(fresh))?;
        let stored: CacheEntry = serde_json::from_slice(&bytes)?;
        unwrap(stored).ok_or_else(|| Error::data(format!("cache entry {key} has the wrong kind")))
    }

    fn call_backend<T>(&self, call: impl FnOnce() -> Result<T>) -> Result<T> {
        let _permit = self.limiter.acquire();
        let out = call()?;
        self.lm_calls.fetch_add(1, Ordering::SeqCst);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TokenStep;

    #[test]
    fn decode_config_validation() {
        assert!(DecodeConfig::greedy().validate().is_ok());
        assert!(DecodeConfig { n_samples: 0, ..DecodeConfig::greedy() }.validate().is_err());
        assert!(DecodeConfig { top_k_logprobs: 0, ..DecodeConfig::greedy() }.validate().is_err());
        assert!(DecodeConfig { temperature: -1.0, ..DecodeConfig::greedy() }.validate().is_err());
    }

    fn probe_trace(alts: &[(&str, f64)], tail: f64) -> GenerationTrace {
        let alternatives: Vec<(String, f64)> = alts.iter().map(|(t, p)| (t.to_string(), p.ln())).collect();
        let step = TokenStep {
            token_text: alternatives[0].0.clone(),
            chosen_logprob: alternatives[0].1,
            alternatives,
            tail_mass: tail,
        };
        GenerationTrace::from_steps("k", vec![step], false)
    }

    #[test]
    fn ptrue_reads_affirmative_mass() {
        let p = read_ptrue(&probe_trace(&[("True", 0.6), ("False", 0.4)], 0.0)).unwrap();
        assert!((p.p_true - 0.6).abs() < 1e-12 && !p.low_fidelity);
        let p = read_ptrue(&probe_trace(&[(" true", 0.3), ("TRUE", 0.2), ("no", 0.5)], 0.0)).unwrap();
        assert!((p.p_true - 0.5).abs() < 1e-12);
        let p = read_ptrue(&probe_trace(&[("False", 0.4)], 0.6)).unwrap();
        assert_eq!(p.p_true, 0.0);
        assert!(p.low_fidelity);
    }
}
