//! Pairwise answer similarity shared by the consistency scores and SAR.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::http::HttpClient;
use crate::text::{token_f1, tokenize};

/// Symmetric similarity in [0, 1] with `sim(a, a) = 1`.
pub trait Similarity: Send + Sync {
    fn similarity(&self, a: &str, b: &str) -> Result<f64>;
}

/// Token-F1 between the analyzed token multisets of both texts.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalSimilarity;

impl Similarity for LexicalSimilarity {
    fn similarity(&self, a: &str, b: &str) -> Result<f64> {
        Ok(token_f1(&tokenize(a), &tokenize(b)))
    }
}

/// Scorer behind `POST /sim {"a", "b"} → {"score"}`. Pairs are sent in a
/// canonical order and scores clamped so the contract holds whatever the
/// service returns.
pub struct ExternalSimilarity {
    url: String,
    http: HttpClient,
}

#[derive(Deserialize)]
struct SimResponse {
    score: f64,
}

impl ExternalSimilarity {
    pub fn new(endpoint: &str, timeout: Duration, max_attempts: u32) -> Self {
        ExternalSimilarity {
            url: format!("{}/sim", endpoint.trim_end_matches('/')),
            http: HttpClient::new(timeout, max_attempts),
        }
    }
}

impl Similarity for ExternalSimilarity {
    fn similarity(&self, a: &str, b: &str) -> Result<f64> {
        if a == b {
            return Ok(1.0);
        }
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let resp = self.http.post_json(&self.url, None, &serde_json::json!({ "a": a, "b": b }))?;
        if resp.status >= 400 {
            return Err(Error::Protocol(format!("similarity service returned HTTP {}", resp.status)));
        }
        let parsed: SimResponse = serde_json::from_str(&resp.body)
            .map_err(|e| Error::Protocol(format!("malformed similarity response: {e}")))?;
        if !parsed.score.is_finite() {
            return Err(Error::Protocol("similarity score is not finite".into()));
        }
        Ok(parsed.score.clamp(0.0, 1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimilarityFn {
    #[default]
    LexicalTokenF1,
    ExternalScorer {
        endpoint: String,
    },
}

impl SimilarityFn {
    pub fn build(&self) -> Box<dyn Similarity> {
        match self {
            SimilarityFn::LexicalTokenF1 => Box::new(LexicalSimilarity),
            SimilarityFn::ExternalScorer { endpoint } => {
                Box::new(ExternalSimilarity::new(endpoint, Duration::from_secs(30), 3))
            }
        }
    }
}
