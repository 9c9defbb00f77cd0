/// Interrogative openers that mark a sentence as a question.
pub const START_WORDS: &[&str] = &[
    "who", "what", "when", "where", "why", "how", "is", "can", "does", "do", "did", "will",
    "would", "could", "should", "are", "was", "were", "has", "have", "had", "which", "whom",
    "whose",
];

/// A sentence is a question if it ends with `?` or its first word is one of
/// [`START_WORDS`] (case-insensitive, whole word).
pub fn is_question(sentence: &str) -> bool {
    let lower = sentence.to_lowercase();
    if lower.ends_with('?') {
        return true;
    }
    START_WORDS.iter().any(|w| {
        lower.starts_with(w) && lower[w.len()..].chars().next().is_none_or(|c| !c.is_alphanumeric())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert!(is_question("When was the movie released"));
        assert!(is_question("Tell me the score?"));
        assert!(!is_question("He scored 30 points."));
    }

    #[test]
    fn whole_word_prefix_only() {
        assert!(!is_question("Island nations are small."));
        assert!(!is_question("Howard left."));
        assert!(is_question("What's the time."));
        assert!(is_question("how"));
        assert!(is_question("WHO IS THERE"));
    }
}
