//! Versioned prompt templates. The mock LLM reads prompts back through the
//! markers defined here.

use serde::{Deserialize, Serialize};

pub const QUESTION_MARKER: &str = "Question: ";
pub const CONTEXT_MARKER: &str = "Context:\n";
pub const PROPOSED_MARKER: &str = "Proposed Answer: ";
pub const ANSWER_CUE: &str = "Answer:";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub id: String,
    pub instruction: String,
    /// Few-shot demonstrations as (question, answer) pairs.
    pub few_shot: Vec<(String, String)>,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate {
            id: "qa-v1".into(),
            instruction: "Answer the question with a short phrase.".into(),
            few_shot: vec![
                ("Who wrote Hamlet?".into(), "William Shakespeare".into()),
                ("What is the capital of France?".into(), "Paris".into()),
            ],
        }
    }
}

impl PromptTemplate {
    fn header(&self) -> String {
        let mut out = self.instruction.clone();
        out.push_str("\n\n");
        for (q, a) in &self.few_shot {
            out.push_str(&format!("Q: {q}\nA: {a}\n"));
        }
        out
    }

    pub fn render_qa(&self, question: &str, context: Option<&str>) -> String {
        let mut out = self.header();
        if let Some(ctx) = context {
            out.push('\n');
            out.push_str(CONTEXT_MARKER);
            out.push_str(ctx);
            out.push('\n');
        }
        out.push('\n');
        out.push_str(QUESTION_MARKER);
        out.push_str(question);
        out.push('\n');
        out.push_str(ANSWER_CUE);
        out
    }

    /// Prompt without the question, used to score an answer unconditionally.
    pub fn render_answer_only(&self) -> String {
        let mut out = self.header();
        out.push('\n');
        out.push_str(ANSWER_CUE);
        out
    }
}

pub fn render_probe(question: &str, answer: &str) -> String {
    format!(
        "{QUESTION_MARKER}{question}\n{PROPOSED_MARKER}{answer}\nIs the proposed answer true or false?\nAnswer (True or False):"
    )
}

/// The question on the last `Question:` line of a prompt.
pub fn extract_question(prompt: &str) -> Option<&str> {
    prompt.lines().rev().find_map(|l| l.strip_prefix(QUESTION_MARKER)).map(str::trim)
}

pub fn extract_context(prompt: &str) -> Option<&str> {
    let start = prompt.find(CONTEXT_MARKER)? + CONTEXT_MARKER.len();
    let rest = &prompt[start..];
    let end = rest.find(&format!("\n\n{QUESTION_MARKER}")).unwrap_or(rest.len());
    Some(&rest[..end])
}

pub fn extract_proposed_answer(prompt: &str) -> Option<&str> {
    prompt.lines().find_map(|l| l.strip_prefix(PROPOSED_MARKER)).map(str::trim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn markers_roundtrip() {
        let t = PromptTemplate::default();
        let p = t.render_qa("Who is X?", Some("[1] X: X is a person.\n[2] Y: other"));
        assert_eq!(extract_question(&p), Some("Who is X?"));
        assert_eq!(extract_context(&p), Some("[1] X: X is a person.\n[2] Y: other"));
        let p = t.render_qa("Who is X?", None);
        assert_eq!(extract_context(&p), None);
        assert_eq!(extract_question(&t.render_answer_only()), None);
        let probe = render_probe("Q?", "an answer");
        assert_eq!(extract_proposed_answer(&probe), Some("an answer"));
        assert_eq!(extract_question(&probe), Some("Q?"));
    }
}
