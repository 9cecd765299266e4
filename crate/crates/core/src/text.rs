//! Shared text analysis.

/// Lowercase, replace every non-alphanumeric character with a space and
/// split on whitespace. Used by BM25 and the lexical similarity.
pub fn tokenize(text: &str) -> Vec<String> {
    let cleaned: String =
        text.chars().flat_map(char::to_lowercase).map(|c| if c.is_alphanumeric() { c } else { ' ' }).collect();
    cleaned.split_whitespace().map(str::to_owned).collect()
}

/// F1 between two token multisets. Two empty sides count as identical.
pub fn token_f1<S: AsRef<str>>(a: &[S], b: &[S]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut counts = std::collections::HashMap::<&str, i64>::new();
    for t in a {
        *counts.entry(t.as_ref()).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in b {
        if let Some(c) = counts.get_mut(t.as_ref()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    // harmonic mean of precision and recall, with a single rounding
    (2 * overlap) as f64 / (a.len() + b.len()) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_strips_punctuation_and_case() {
        assert_eq!(tokenize("Hello, World! x-ray"), vec!["hello", "world", "x", "ray"]);
        assert!(tokenize("  ?! ").is_empty());
        assert_eq!(tokenize("Ünïcode ÄB"), vec!["ünïcode", "äb"]);
    }

    #[test]
    fn token_f1_counts_multisets() {
        let a = ["a", "b", "c"];
        let b = ["a", "d", "e"];
        assert!((token_f1(&a, &b) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(token_f1(&a, &a), 1.0);
        let empty: [&str; 0] = [];
        assert_eq!(token_f1(&empty, &empty), 1.0);
        assert_eq!(token_f1(&a, &empty), 0.0);
        // repeated tokens only match once each
        assert!((token_f1(&["x", "x"], &["x"]) - 2.0 / 3.0).abs() < 1e-15);
    }
}
