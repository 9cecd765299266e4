//! Uncertainty-gated adaptive retrieval-augmented generation.
//!
//! The crate decides, per question, whether a language model should consult
//! an external retriever. It scores the model's uncertainty from token
//! log-probabilities, sampled answers or hidden features, feeds the score to
//! a trained retrieve/skip classifier, and accounts for every LM and
//! retriever call. The evaluation side computes QA, efficiency and
//! self-knowledge metrics, out-of-distribution transfer statistics and
//! functional-complexity measures.

pub mod analysis;
pub mod deciders;
pub mod error;
pub mod estimators;
pub mod evalkit;
mod http;
pub mod io;
pub mod llm;
pub mod model;
pub mod pipeline;
pub mod retrieval;
pub mod text;

pub use error::{Error, Result};
