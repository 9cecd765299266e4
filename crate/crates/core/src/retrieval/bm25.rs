//! Embedded Okapi BM25 over an in-memory inverted index.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{rank_hits, Retriever, SearchHit};
use crate::error::{Error, Result};
use crate::model::Document;
use crate::text::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bm25Index {
    pub params: Bm25Params,
    /// term → (document position, term frequency), positions ascending.
    pub postings: BTreeMap<String, Vec<(u32, u32)>>,
    pub doc_lengths: Vec<u32>,
    pub avgdl: f64,
    pub documents: Vec<Document>,
}

impl Bm25Index {
    pub fn build(docs: impl IntoIterator<Item = Document>, params: Bm25Params) -> Result<Self> {
        if !(params.k1 >= 0.0) || !(0.0..=1.0).contains(&params.b) {
            return Err(Error::invalid(format!("bad BM25 parameters k1={} b={}", params.k1, params.b)));
        }
        let mut documents = Vec::new();
        let mut seen = HashMap::new();
        let mut postings: BTreeMap<String, Vec<(u32, u32)>> = BTreeMap::new();
        let mut doc_lengths = Vec::new();
        for doc in docs {
            let pos = documents.len() as u32;
            if seen.insert(doc.doc_id.clone(), pos).is_some() {
                return Err(Error::data(format!("duplicate doc_id {:?}", doc.doc_id)));
            }
            let tokens = tokenize(&format!("{} {}", doc.title, doc.body));
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in &tokens {
                *tf.entry(t.clone()).or_default() += 1;
            }
            for (t, f) in tf {
                postings.entry(t).or_default().push((pos, f));
            }
            doc_lengths.push(tokens.len() as u32);
            documents.push(doc);
        }
        if documents.is_empty() {
            return Err(Error::data("cannot index an empty corpus"));
        }
        let avgdl = doc_lengths.iter().map(|l| f64::from(*l)).sum::<f64>() / doc_lengths.len() as f64;
        Ok(Bm25Index { params, postings, doc_lengths, avgdl, documents })
    }

    pub fn n_docs(&self) -> usize {
        self.documents.len()
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.n_docs() as f64;
        let df = self.postings.get(term).map_or(0, Vec::len) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// Term weight for frequency `tf` in a document of length `len`.
    pub fn term_score(&self, idf: f64, tf: f64, len: f64) -> f64 {
        let Bm25Params { k1, b } = self.params;
        // avgdl is 0 only when every document is empty; length then carries no signal
        let norm = if self.avgdl > 0.0 { len / self.avgdl } else { 1.0 };
        idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * norm))
    }

    /// Scores for every document that shares a term with the query. Each
    /// query token contributes once per occurrence.
    pub fn score_all(&self, query: &str) -> Vec<(u32, f64)> {
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        for term in tokenize(query) {
            let Some(list) = self.postings.get(&term) else {
                continue;
            };
            let idf = self.idf(&term);
            for (pos, tf) in list {
                let len = f64::from(self.doc_lengths[*pos as usize]);
                *acc.entry(*pos).or_default() += self.term_score(idf, f64::from(*tf), len);
            }
        }
        acc.into_iter().collect()
    }

    pub fn search(&self, query: &str, k: usize) -> Result<Vec<SearchHit>> {
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        let scored = self
            .score_all(query)
            .into_iter()
            .map(|(pos, s)| (self.documents[pos as usize].doc_id.clone(), s))
            .collect();
        Ok(rank_hits(scored, k))
    }
}

impl Retriever for Bm25Index {
    fn search(&self, query: &str, k: usize) -> Result<Vec<SearchHit>> {
        Bm25Index::search(self, query, k)
    }

    fn document(&self, doc_id: &str) -> Option<Document> {
        self.documents.iter().find(|d| d.doc_id == doc_id).cloned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, body: &str) -> Document {
        Document { doc_id: id.into(), title: String::new(), body: body.into() }
    }

    #[test]
    fn build_statistics() {
        let idx = Bm25Index::build(
            vec![doc("a", "x y"), doc("b", "x z w v"), doc("c", "q r s t u v")],
            Bm25Params::default(),
        )
        .unwrap();
        assert_eq!(idx.avgdl, 4.0);
        assert_eq!(idx.postings["x"].len(), 2);
        assert!(Bm25Index::build(Vec::new(), Bm25Params::default()).is_err());
        let err = Bm25Index::build(vec![doc("a", "x"), doc("a", "y")], Bm25Params::default()).unwrap_err();
        assert!(err.to_string().contains("\"a\""));
    }

    #[test]
    fn search_examples() {
        let idx =
            Bm25Index::build(vec![doc("a", "unique term"), doc("b", "other words")], Bm25Params::default()).unwrap();
        assert_eq!(idx.search("unique", 5).unwrap()[0].doc_id, "a");
        let one = Bm25Index::build(vec![doc("a", "hello world")], Bm25Params::default()).unwrap();
        assert_eq!(one.search("hello", 5).unwrap().len(), 1);
        assert!(one.search("?!", 5).unwrap().is_empty());
        assert!(one.search("hello", 0).is_err());
    }

    #[test]
    fn shorter_document_wins_at_equal_tf() {
        let idx = Bm25Index::build(
            vec![doc("long", "apple b c d e f"), doc("short", "apple b"), doc("x", "zzz")],
            Bm25Params::default(),
        )
        .unwrap();
        let hits = idx.search("apple", 5).unwrap();
        assert_eq!(hits[0].doc_id, "short");
        // closed form: N=3, n=2, avgdl=3
        let idf = (1.0 + (3.0 - 2.0 + 0.5) / 2.5f64).ln();
        let f = |len: f64| idf * 2.2 / (1.0 + 1.2 * (0.25 + 0.75 * len / 3.0));
        assert!((hits[0].score - f(2.0)).abs() < 1e-12);
        assert!((hits[1].score - f(6.0)).abs() < 1e-12);
    }
}
