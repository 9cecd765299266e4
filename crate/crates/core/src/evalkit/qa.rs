//! Answer normalization and the QA correctness metrics.

use crate::text::token_f1;

/// Lowercase, drop punctuation and the articles a/an/the, collapse whitespace.
pub fn normalize_answer(text: &str) -> String {
    let lowered: String = text.chars().flat_map(char::to_lowercase).filter(|c| !is_punctuation(*c)).collect();
    lowered.split_whitespace().filter(|w| !matches!(*w, "a" | "an" | "the")).collect::<Vec<_>>().join(" ")
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation() || (!c.is_alphanumeric() && !c.is_whitespace())
}

/// The normalized prediction contains some normalized gold answer.
pub fn in_accuracy<S: AsRef<str>>(pred: &str, golds: &[S]) -> bool {
    let p = normalize_answer(pred);
    golds.iter().any(|g| {
        let g = normalize_answer(g.as_ref());
        // an empty gold would match everything
        !g.is_empty() && p.contains(&g)
    }) || (p.is_empty() && golds.iter().any(|g| normalize_answer(g.as_ref()).is_empty()))
}

pub fn exact_match<S: AsRef<str>>(pred: &str, golds: &[S]) -> bool {
    let p = normalize_answer(pred);
    golds.iter().any(|g| normalize_answer(g.as_ref()) == p)
}

/// Best token-level F1 against any gold.
pub fn f1<S: AsRef<str>>(pred: &str, golds: &[S]) -> f64 {
    let p = normalize_answer(pred);
    let p: Vec<&str> = p.split_whitespace().collect();
    golds
        .iter()
        .map(|g| {
            let g = normalize_answer(g.as_ref());
            let g: Vec<&str> = g.split_whitespace().collect();
            token_f1(&g, &p)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_rules() {
        assert_eq!(normalize_answer("The Eiffel Tower!"), "eiffel tower");
        assert_eq!(normalize_answer(""), "");
        assert_eq!(normalize_answer("A  dog"), "dog");
        assert_eq!(normalize_answer("Theatre"), "theatre");
    }

    #[test]
    fn correctness_flags() {
        assert!(in_accuracy("it is paris, france", &["Paris"]));
        assert!(!in_accuracy("london", &["Paris"]));
        assert!(!in_accuracy("", &["Paris"]));
        assert!(exact_match("Paris", &["paris"]));
        assert!(!exact_match("in Paris", &["Paris"]));
        assert!(exact_match("b", &["a x", "b"]));
    }

    #[test]
    fn f1_examples() {
        assert!((f1("the quick fox", &["quick brown fox"]) - 0.8).abs() < 1e-15);
        assert_eq!(f1("same words", &["same words"]), 1.0);
        assert_eq!(f1("alpha", &["beta"]), 0.0);
        assert_eq!(f1("", &[""]), 1.0);
        assert_eq!(f1("", &["x"]), 0.0);
    }
}
