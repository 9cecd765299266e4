//! Sparse retrieval behind one search contract: an embedded BM25 index and a
//! remote search client.

mod bm25;
mod remote;

use serde::{Deserialize, Serialize};

pub use bm25::{Bm25Index, Bm25Params};
pub use remote::RemoteSearch;

use crate::error::Result;
use crate::model::Document;

pub const DEFAULT_CONTEXT_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub doc_id: String,
    pub score: f64,
    pub rank: usize,
}

pub trait Retriever: Send + Sync {
    /// Top-`k` hits sorted by descending score, ties by ascending doc id.
    fn search(&self, query: &str, k: usize) -> Result<Vec<SearchHit>>;

    fn document(&self, doc_id: &str) -> Option<Document>;
}

/// Sorts scored documents and keeps the top `k`, assigning 1-based ranks.
pub fn rank_hits(mut scored: Vec<(String, f64)>, k: usize) -> Vec<SearchHit> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, (doc_id, score))| SearchHit { doc_id, score, rank: i + 1 })
        .collect()
}

/// Retrieved passages in rank order, one per line as `[i] Title: body`.
pub fn render_context(docs: &[Document]) -> String {
    docs.iter()
        .enumerate()
        .map(|(i, d)| format!("[{}] {}: {}", i + 1, d.title, d.body.replace('\n', " ")))
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_break_by_doc_id() {
        let hits = rank_hits(vec![("b".into(), 1.0), ("a".into(), 1.0), ("c".into(), 2.0)], 3);
        let ids: Vec<&str> = hits.iter().map(|h| h.doc_id.as_str()).collect();
        assert_eq!(ids, ["c", "a", "b"]);
        assert_eq!(hits[2].rank, 3);
    }
}
