//! Rule-based sentence segmentation.
//!
//! Line breaks are hard boundaries. Inside a line, a sentence ends after a
//! run of `.`, `!` or `?` (plus any closing quotes or brackets) when the next
//! non-space character is uppercase, a digit or an opening quote. A period
//! ending one of [`ABBREVIATIONS`] or a single-letter initial never ends a
//! sentence. Whitespace inside a sentence is collapsed to single spaces.

/// Lowercased tokens, including their final period, that suppress a split.
pub const ABBREVIATIONS: &[&str] = &[
    "mr.", "mrs.", "ms.", "dr.", "st.", "vs.", "etc.", "e.g.", "i.e.", "no.", "u.s.", "jr.",
    "sr.", "prof.",
];

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}')
}

fn opens_sentence(c: char) -> bool {
    c.is_uppercase()
        || c.is_ascii_digit()
        || matches!(c, '"' | '\'' | '(' | '[' | '\u{201c}' | '\u{2018}')
}

pub fn split_sentences(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|l| !l.is_empty())
        .flat_map(|l| split_line(&l))
        .collect()
}

fn split_line(line: &str) -> Vec<String> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        if !is_terminator(chars[i]) {
            i += 1;
            continue;
        }
        let term_start = i;
        let mut j = i;
        while j < chars.len() && is_terminator(chars[j]) {
            j += 1;
        }
        let term_end = j;
        while j < chars.len() && is_closer(chars[j]) {
            j += 1;
        }
        // j is one past the sentence end candidate
        if j < chars.len()
            && chars[j] == ' '
            && j + 1 < chars.len()
            && opens_sentence(chars[j + 1])
            && !(chars[term_start] == '.' && term_end - term_start == 1 && guarded(&chars[start..term_end]))
        {
            out.push(chars[start..j].iter().collect());
            start = j + 1;
            i = j + 1;
        } else {
            i = j.max(i + 1);
        }
    }
    if start < chars.len() {
        out.push(chars[start..].iter().collect());
    }
    out
}

/// Whether the word ending at the final period is an abbreviation or initial.
fn guarded(sentence_so_far: &[char]) -> bool {
    let word_start = sentence_so_far
        .iter()
        .rposition(|c| *c == ' ')
        .map(|p| p + 1)
        .unwrap_or(0);
    let word: String = sentence_so_far[word_start..]
        .iter()
        .collect::<String>()
        .trim_start_matches(['"', '\'', '(', '[', '\u{201c}', '\u{2018}'])
        .to_lowercase();
    if ABBREVIATIONS.contains(&word.as_str()) {
        return true;
    }
    let stem: Vec<char> = sentence_so_far[word_start..sentence_so_far.len() - 1]
        .iter()
        .copied()
        .filter(|c| c.is_alphanumeric())
        .collect();
    stem.len() == 1 && stem[0].is_uppercase()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn splits_on_periods() {
        assert_eq!(split_sentences("A b. C d."), s(&["A b.", "C d."]));
    }

    #[test]
    fn splits_on_question_marks() {
        assert_eq!(split_sentences("Who won? He did."), s(&["Who won?", "He did."]));
    }

    #[test]
    fn abbreviation_guard() {
        assert_eq!(
            split_sentences("Mr. Smith arrived. He left."),
            s(&["Mr. Smith arrived.", "He left."])
        );
        assert_eq!(
            split_sentences("Prices rose in the U.S. Markets fell."),
            s(&["Prices rose in the U.S. Markets fell."])
        );
        assert_eq!(
            split_sentences("Fruit, e.g. Apples, are good. Yes."),
            s(&["Fruit, e.g. Apples, are good.", "Yes."])
        );
    }

    #[test]
    fn initials_do_not_split() {
        assert_eq!(
            split_sentences("John F. Kennedy spoke. Crowds cheered."),
            s(&["John F. Kennedy spoke.", "Crowds cheered."])
        );
    }

    #[test]
    fn lowercase_continuation_does_not_split() {
        assert_eq!(split_sentences("It costs 3.5 dollars. ok then."), s(&["It costs 3.5 dollars. ok then."]));
    }

    #[test]
    fn closing_quotes_stay_with_sentence() {
        assert_eq!(
            split_sentences("He said \"stop.\" Then he left!! 42 people saw."),
            s(&["He said \"stop.\"", "Then he left!!", "42 people saw."])
        );
    }

    #[test]
    fn newlines_are_boundaries() {
        assert_eq!(
            split_sentences("Heading\n\n  Body   text here.\nNext line"),
            s(&["Heading", "Body text here.", "Next line"])
        );
    }

    #[test]
    fn empty_and_blank() {
        assert!(split_sentences("").is_empty());
        assert!(split_sentences(" \n\t ").is_empty());
    }

    #[test]
    fn preserves_non_whitespace_content() {
        let text = "Dr. No. 5 is here!? Yes... \"Quoted.\" (Paren.) Then 2.5% e.g. Odd.";
        let joined: String = split_sentences(text).concat().split_whitespace().collect();
        let expected: String = text.split_whitespace().collect();
        assert_eq!(joined, expected);
    }
}
