//! Client for OpenAI-compatible completion endpoints.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{prompt_key, DecodeConfig, LanguageModel};
use crate::error::{Error, Result};
use crate::http::HttpClient;
use crate::model::{GenerationTrace, SampleSet, TokenStep};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenAiConfig {
    pub api_base: String,
    #[serde(default, skip_serializing)]
    pub api_key: Option<String>,
    pub model: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
}

fn default_timeout() -> u64 {
    60
}
fn default_attempts() -> u32 {
    3
}

impl OpenAiConfig {
    /// Reads `LLM_API_BASE`, `LLM_API_KEY` and `LLM_MODEL`.
    pub fn from_env() -> Result<Self> {
        let api_base = std::env::var("LLM_API_BASE").map_err(|_| Error::Config("LLM_API_BASE is not set".into()))?;
        let model = std::env::var("LLM_MODEL").map_err(|_| Error::Config("LLM_MODEL is not set".into()))?;
        Ok(OpenAiConfig {
            api_base,
            api_key: std::env::var("LLM_API_KEY").ok(),
            model,
            timeout_secs: default_timeout(),
            max_attempts: default_attempts(),
        })
    }
}

pub struct OpenAiClient {
    cfg: OpenAiConfig,
    http: HttpClient,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Debug, Deserialize)]
struct ChatChoice {
    #[serde(default)]
    logprobs: Option<ChatLogprobs>,
}

#[derive(Debug, Deserialize)]
struct ChatLogprobs {
    #[serde(default)]
    content: Option<Vec<ChatTokenLogprob>>,
}

#[derive(Debug, Deserialize)]
struct ChatTokenLogprob {
    token: String,
    logprob: f64,
    #[serde(default)]
    top_logprobs: Vec<TopLogprob>,
}

#[derive(Debug, Deserialize)]
struct TopLogprob {
    token: String,
    logprob: f64,
}

#[derive(Debug, Deserialize)]
struct CompletionResponse {
    choices: Vec<CompletionChoice>,
}

#[derive(Debug, Deserialize)]
struct CompletionChoice {
    logprobs: Option<CompletionLogprobs>,
}

#[derive(Debug, Deserialize)]
struct CompletionLogprobs {
    tokens: Vec<String>,
    token_logprobs: Vec<Option<f64>>,
    #[serde(default)]
    top_logprobs: Option<Vec<Option<std::collections::BTreeMap<String, f64>>>>,
    text_offset: Vec<usize>,
}

/// Builds a step from an endpoint's chosen token and its top-K list. The
/// chosen token is inserted if the list omits it; any excess mass from
/// rounding is normalized away.
pub fn step_from_endpoint(token: &str, logprob: f64, top: &[(String, f64)]) -> TokenStep {
    let chosen_lp = logprob.min(0.0);
    let mut alts: Vec<(String, f64)> = Vec::with_capacity(top.len() + 1);
    for (t, lp) in top {
        if !alts.iter().any(|(u, _)| u == t) {
            alts.push((t.clone(), lp.min(0.0)));
        }
    }
    if !alts.iter().any(|(t, _)| t == token) {
        alts.push((token.to_owned(), chosen_lp));
    }
    let mass: f64 = alts.iter().map(|(_, lp)| lp.exp()).sum();
    if mass > 1.0 {
        let shift = mass.ln();
        for (_, lp) in &mut alts {
            *lp -= shift;
        }
    }
    alts.sort_by(|a, b| b.1.total_cmp(&a.1));
    let listed: f64 = alts.iter().map(|(_, lp)| lp.exp()).sum();
    let chosen_logprob = alts.iter().find(|(t, _)| t == token).map(|(_, lp)| *lp).unwrap_or(chosen_lp);
    TokenStep {
        token_text: token.to_owned(),
        chosen_logprob,
        alternatives: alts,
        tail_mass: (1.0 - listed).clamp(0.0, 1.0),
    }
}

impl OpenAiClient {
    pub fn new(cfg: OpenAiConfig) -> Self {
        let http = HttpClient::new(Duration::from_secs(cfg.timeout_secs), cfg.max_attempts);
        OpenAiClient { cfg, http }
    }

    pub fn with_http(cfg: OpenAiConfig, http: HttpClient) -> Self {
        OpenAiClient { cfg, http }
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.cfg.api_base.trim_end_matches('/'), path)
    }

    fn chat(&self, prompt: &str, cfg: &DecodeConfig, n: u32) -> Result<std::result::Result<ChatResponse, String>> {
        let body = json!({
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_tokens,
            "logprobs": true,
            "top_logprobs": cfg.top_k_logprobs,
            "n": n,
        });
        let resp = self.http.post_json(&self.url("chat/completions"), self.cfg.api_key.as_deref(), &body)?;
        if resp.status >= 400 {
            return Ok(Err(format!("HTTP {}: {}", resp.status, resp.body)));
        }
        serde_json::from_str(&resp.body).map(Ok).map_err(|e| Error::Protocol(format!("malformed chat response: {e}")))
    }

    fn traces(&self, prompt: &str, resp: ChatResponse) -> Result<Vec<GenerationTrace>> {
        let key = prompt_key(prompt);
        resp.choices
            .into_iter()
            .map(|choice| {
                let content = choice.logprobs.and_then(|l| l.content).ok_or_else(|| {
                    Error::Config("endpoint returned no token logprobs; the `logprobs` capability is required".into())
                })?;
                let steps = content
                    .iter()
                    .map(|t| {
                        let top: Vec<(String, f64)> =
                            t.top_logprobs.iter().map(|a| (a.token.clone(), a.logprob)).collect();
                        step_from_endpoint(&t.token, t.logprob, &top)
                    })
                    .collect();
                Ok(GenerationTrace::from_steps(key.clone(), steps, false))
            })
            .collect()
    }
}

impl LanguageModel for OpenAiClient {
    fn model_id(&self) -> String {
        format!("openai:{}", self.cfg.model)
    }

    fn generate(&self, prompt: &str, cfg: &DecodeConfig) -> Result<GenerationTrace> {
        match self.chat(prompt, cfg, 1)? {
            Ok(resp) => self
                .traces(prompt, resp)?
                .into_iter()
                .next()
                .ok_or_else(|| Error::Protocol("chat response has no choices".into())),
            Err(msg) => Err(Error::Protocol(msg)),
        }
    }

    fn generate_n(&self, prompt: &str, cfg: &DecodeConfig) -> Result<SampleSet> {
        let n = cfg.n_samples as usize;
        let batched = match self.chat(prompt, cfg, cfg.n_samples)? {
            Ok(resp) => {
                let traces = self.traces(prompt, resp)?;
                (traces.len() == n).then_some(traces)
            }
            Err(msg) => {
                log::warn!("endpoint refused n={n}: {msg}; falling back to sequential sampling");
                None
            }
        };
        let (samples, sequential_fallback) = match batched {
            Some(t) => (t, false),
            None => {
                let single = DecodeConfig { n_samples: 1, ..cfg.clone() };
                let samples = (0..n).map(|_| self.generate(prompt, &single)).collect::<Result<Vec<_>>>()?;
                (samples, true)
            }
        };
        Ok(SampleSet {
            prompt_key: prompt_key(prompt),
            samples,
            sampling_temperature: if cfg.temperature > 0.0 { cfg.temperature } else { 1.0 },
            sequential_fallback,
        })
    }

    fn score_continuation(&self, prompt: &str, continuation: &[String], cfg: &DecodeConfig) -> Result<GenerationTrace> {
        let cont: String = continuation.concat();
        let full = format!("{prompt}{cont}");
        let body = json!({
            "model": self.cfg.model,
            "prompt": full,
            "max_tokens": 1,
            "echo": true,
            "logprobs": cfg.top_k_logprobs,
            "temperature": 0.0,
        });
        let resp = self.http.post_json(&self.url("completions"), self.cfg.api_key.as_deref(), &body)?;
        if resp.status >= 400 {
            return Err(Error::Unsupported(format!(
                "endpoint cannot echo prompt logprobs (HTTP {}): {}",
                resp.status, resp.body
            )));
        }
        let parsed: CompletionResponse = serde_json::from_str(&resp.body)
            .map_err(|e| Error::Protocol(format!("malformed completion response: {e}")))?;
        let lp = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.logprobs)
            .ok_or_else(|| Error::Config("endpoint returned no echo logprobs".into()))?;
        let start = prompt.len();
        let end = full.len();
        let mut steps = Vec::new();
        for (i, tok) in lp.tokens.iter().enumerate() {
            let off = *lp.text_offset.get(i).ok_or_else(|| Error::Protocol("text_offset too short".into()))?;
            if off < start || off >= end {
                continue;
            }
            let logprob = lp
                .token_logprobs
                .get(i)
                .copied()
                .flatten()
                .ok_or_else(|| Error::Protocol(format!("missing logprob for echoed token {i}")))?;
            let top: Vec<(String, f64)> = lp
                .top_logprobs
                .as_ref()
                .and_then(|v| v.get(i).cloned().flatten())
                .map(|m| m.into_iter().collect())
                .unwrap_or_default();
            steps.push(step_from_endpoint(tok, logprob, &top));
        }
        let trace = GenerationTrace::from_steps(prompt_key(prompt), steps, false);
        if trace.text != cont {
            return Err(Error::Protocol(format!("echoed continuation {:?} does not match {:?}", trace.text, cont)));
        }
        Ok(trace)
    }
}
