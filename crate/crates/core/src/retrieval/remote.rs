//! Client for a remote search service speaking `GET /search?q=&k=`.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::Deserialize;

use super::{Retriever, SearchHit};
use crate::error::{Error, Result};
use crate::http::HttpClient;
use crate::model::Document;

#[derive(Debug, Deserialize)]
struct Response {
    hits: Vec<RemoteHit>,
}

#[derive(Debug, Deserialize)]
struct RemoteHit {
    doc_id: String,
    score: f64,
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    body: Option<String>,
}

pub struct RemoteSearch {
    base: String,
    http: HttpClient,
    calls: AtomicU64,
    seen: std::sync::Mutex<std::collections::HashMap<String, Document>>,
}

impl RemoteSearch {
    pub fn new(base: impl Into<String>, timeout: Duration, max_attempts: u32) -> Self {
        Self::with_http(base, HttpClient::new(timeout, max_attempts))
    }

    pub fn with_http(base: impl Into<String>, http: HttpClient) -> Self {
        RemoteSearch { base: base.into(), http, calls: AtomicU64::new(0), seen: Default::default() }
    }

    /// Search invocations made so far; retries inside one invocation count once.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn remote_search(&self, query: &str, k: usize) -> Result<Vec<SearchHit>> {
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        self.calls.fetch_add(1, Ordering::SeqCst);
        let url = format!("{}/search", self.base.trim_end_matches('/'));
        let resp = self.http.get(&url, &[("q", query.to_owned()), ("k", k.to_string())])?;
        if resp.status >= 400 {
            return Err(Error::Protocol(format!("search returned HTTP {}: {}", resp.status, resp.body)));
        }
        let parsed: Response =
            serde_json::from_str(&resp.body).map_err(|e| Error::Protocol(format!("malformed search response: {e}")))?;
        let mut seen = self.seen.lock().unwrap_or_else(|e| e.into_inner());
        let mut scored = Vec::with_capacity(parsed.hits.len());
        for h in parsed.hits {
            if !h.score.is_finite() {
                return Err(Error::Protocol(format!("non-finite score for {}", h.doc_id)));
            }
            if let Some(body) = h.body {
                seen.insert(
                    h.doc_id.clone(),
                    Document { doc_id: h.doc_id.clone(), title: h.title.unwrap_or_default(), body },
                );
            }
            scored.push((h.doc_id, h.score));
        }
        Ok(super::rank_hits(scored, k))
    }
}

impl Retriever for RemoteSearch {
    fn search(&self, query: &str, k: usize) -> Result<Vec<SearchHit>> {
        self.remote_search(query, k)
    }

    /// Documents are known only once a search has returned their text.
    fn document(&self, doc_id: &str) -> Option<Document> {
        self.seen.lock().unwrap_or_else(|e| e.into_inner()).get(doc_id).cloned()
    }
}
