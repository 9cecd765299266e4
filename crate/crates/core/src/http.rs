//! Blocking JSON-over-HTTP helper with bounded retries, shared by the LLM,
//! search and similarity clients.

use std::time::Duration;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct HttpClient {
    agent: ureq::Agent,
    max_attempts: u32,
    backoff: Duration,
}

/// Final non-retried response.
#[derive(Debug, Clone)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

impl HttpClient {
    pub fn new(timeout: Duration, max_attempts: u32) -> Self {
        let config = ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build();
        HttpClient { agent: config.into(), max_attempts: max_attempts.max(1), backoff: Duration::from_millis(50) }
    }

    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    pub fn post_json(&self, url: &str, bearer: Option<&str>, body: &impl Serialize) -> Result<HttpResponse> {
        let payload = serde_json::to_vec(body)?;
        self.with_retries(|| {
            let mut req = self.agent.post(url).header("Content-Type", "application/json");
            if let Some(key) = bearer {
                req = req.header("Authorization", format!("Bearer {key}"));
            }
            req.send(&payload[..])
        })
    }

    pub fn get(&self, url: &str, query: &[(&str, String)]) -> Result<HttpResponse> {
        self.with_retries(|| {
            let mut req = self.agent.get(url);
            for (k, v) in query {
                req = req.query(*k, v);
            }
            req.call()
        })
    }

    fn with_retries<F>(&self, send: F) -> Result<HttpResponse>
    where
        F: Fn() -> std::result::Result<ureq::http::Response<ureq::Body>, ureq::Error>,
    {
        let mut last = String::new();
        for attempt in 1..=self.max_attempts {
            match send() {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    let body = resp
                        .body_mut()
                        .read_to_string()
                        .map_err(|e| Error::Protocol(format!("unreadable response body: {e}")))?;
                    if status == 429 || status >= 500 {
                        last = format!("HTTP {status}: {}", truncate(&body));
                    } else {
                        return Ok(HttpResponse { status, body });
                    }
                }
                Err(e) => last = e.to_string(),
            }
            if attempt < self.max_attempts {
                std::thread::sleep(self.backoff * attempt);
            }
        }
        Err(Error::Transport { attempts: self.max_attempts, message: last })
    }
}

fn truncate(s: &str) -> &str {
    match s.char_indices().nth(200) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}
