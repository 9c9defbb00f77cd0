use serde::{Deserialize, Serialize};

use crate::attributes::is_question;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChunkKind {
    QuestionLed,
    Plain,
    TruncatedLongSentence,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextChunk {
    pub text: String,
    pub source_page: String,
    pub kind: ChunkKind,
    /// Index of the first input sentence in this chunk.
    pub first_sentence: usize,
    pub sentence_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkConfig {
    pub sentence_char_cap: usize,
    pub chunk_char_budget: usize,
    pub group_size: usize,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        Self { sentence_char_cap: 200, chunk_char_budget: 600, group_size: 3 }
    }
}

fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Groups sentences into retrieval chunks.
///
/// Rules, applied in document order:
/// 1. a sentence longer than `sentence_char_cap` characters becomes its own
///    chunk, cut to exactly `sentence_char_cap` characters;
/// 2. a question starts a chunk that absorbs the following sentences while the
///    joined text stays within `chunk_char_budget` (another question or an
///    over-long sentence ends it);
/// 3. everything else is grouped in runs of `group_size`, closing a run early
///    if the next sentence would push it over `chunk_char_budget`.
///
/// Sentences are joined with a single space.
pub fn build_chunks(sentences: &[String], page_name: &str, cfg: &ChunkConfig) -> Vec<TextChunk> {
    let mut out = Vec::new();
    let mut run: Vec<usize> = Vec::new();
    let mut i = 0;

    let flush = |run: &mut Vec<usize>, out: &mut Vec<TextChunk>| {
        if let Some(&first) = run.first() {
            out.push(TextChunk {
                text: join(sentences, first, run.len()),
                source_page: page_name.to_string(),
                kind: ChunkKind::Plain,
                first_sentence: first,
                sentence_count: run.len(),
            });
            run.clear();
        }
    };

    while i < sentences.len() {
        let s = &sentences[i];
        let len = char_len(s);
        if len > cfg.sentence_char_cap {
            flush(&mut run, &mut out);
            out.push(TextChunk {
                text: s.chars().take(cfg.sentence_char_cap).collect(),
                source_page: page_name.to_string(),
                kind: ChunkKind::TruncatedLongSentence,
                first_sentence: i,
                sentence_count: 1,
            });
            i += 1;
        } else if is_question(s) {
            flush(&mut run, &mut out);
            let first = i;
            let mut total = len;
            i += 1;
            while i < sentences.len() {
                let next = &sentences[i];
                let next_len = char_len(next);
                if next_len > cfg.sentence_char_cap
                    || is_question(next)
                    || total + 1 + next_len > cfg.chunk_char_budget
                {
                    break;
                }
                total += 1 + next_len;
                i += 1;
            }
            out.push(TextChunk {
                text: join(sentences, first, i - first),
                source_page: page_name.to_string(),
                kind: ChunkKind::QuestionLed,
                first_sentence: first,
                sentence_count: i - first,
            });
        } else {
            let current: usize = run.iter().map(|&k| char_len(&sentences[k]) + 1).sum();
            if !run.is_empty() && current + len > cfg.chunk_char_budget {
                flush(&mut run, &mut out);
            }
            run.push(i);
            if run.len() == cfg.group_size {
                flush(&mut run, &mut out);
            }
            i += 1;
        }
    }
    flush(&mut run, &mut out);
    out
}

fn join(sentences: &[String], first: usize, count: usize) -> String {
    sentences[first..first + count].join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sents(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn seven_plain_sentences_group_3_3_1() {
        let input: Vec<String> = (0..7).map(|k| format!("Sentence {k}.")).collect();
        let chunks = build_chunks(&input, "p", &ChunkConfig::default());
        let sizes: Vec<usize> = chunks.iter().map(|c| c.sentence_count).collect();
        assert_eq!(sizes, vec![3, 3, 1]);
        assert!(chunks.iter().all(|c| c.kind == ChunkKind::Plain));
        assert_eq!(chunks[0].text, "Sentence 0. Sentence 1. Sentence 2.");
    }

    #[test]
    fn question_absorbs_following_text() {
        let chunks = build_chunks(&sents(&["What is X?", "X is Y.", "Z."]), "p", &ChunkConfig::default());
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].kind, ChunkKind::QuestionLed);
        assert_eq!(chunks[0].text, "What is X? X is Y. Z.");
    }

    #[test]
    fn question_stops_at_budget() {
        let cfg = ChunkConfig { sentence_char_cap: 20, chunk_char_budget: 25, group_size: 3 };
        let chunks = build_chunks(&sents(&["Why not?", "Because it is.", "Fine then."]), "p", &cfg);
        assert_eq!(chunks[0].text, "Why not? Because it is.");
        assert_eq!(chunks[1].text, "Fine then.");
        assert_eq!(chunks[1].kind, ChunkKind::Plain);
    }

    #[test]
    fn question_never_absorbs_question() {
        let chunks = build_chunks(&sents(&["Who?", "Where?", "Here."]), "p", &ChunkConfig::default());
        let texts: Vec<&str> = chunks.iter().map(|c| c.text.as_str()).collect();
        assert_eq!(texts, vec!["Who?", "Where? Here."]);
    }

    #[test]
    fn long_sentence_truncated_exactly() {
        let long = "x".repeat(10_000);
        let chunks = build_chunks(&[long], "p", &ChunkConfig::default());
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].kind, ChunkKind::TruncatedLongSentence);
        assert_eq!(chunks[0].text.chars().count(), 200);
    }

    #[test]
    fn truncation_respects_code_points() {
        let long = "é".repeat(300);
        let chunks = build_chunks(&[long], "p", &ChunkConfig::default());
        assert_eq!(chunks[0].text.chars().count(), 200);
        assert_eq!(chunks[0].text, "é".repeat(200));
    }

    #[test]
    fn long_sentence_breaks_plain_run() {
        let mut input = sents(&["A.", "B."]);
        input.push("y".repeat(250));
        input.push("C.".into());
        let chunks = build_chunks(&input, "p", &ChunkConfig::default());
        let kinds: Vec<ChunkKind> = chunks.iter().map(|c| c.kind).collect();
        assert_eq!(
            kinds,
            vec![ChunkKind::Plain, ChunkKind::TruncatedLongSentence, ChunkKind::Plain]
        );
        assert_eq!(chunks[0].text, "A. B.");
    }

    #[test]
    fn full_length_run_closes_early_to_stay_in_budget() {
        let s200 = format!("{}.", "a".repeat(199));
        let chunks = build_chunks(&vec![s200; 3], "p", &ChunkConfig::default());
        assert_eq!(chunks.iter().map(|c| c.sentence_count).collect::<Vec<_>>(), vec![2, 1]);
        assert!(chunks.iter().all(|c| c.text.chars().count() <= 600));
    }

    #[test]
    fn empty_input() {
        assert!(build_chunks(&[], "p", &ChunkConfig::default()).is_empty());
    }
}
