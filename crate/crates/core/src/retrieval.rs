//! Cosine ranking of chunks and tables against the question.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{MarkdownTable, TextChunk};
use crate::provider::{Embedder, EmbeddingVector, ProviderError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RetrievalError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("zero vector")]
    ZeroVector,
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredChunk {
    pub chunk: TextChunk,
    pub score: f64,
}

pub fn cosine(q: &EmbeddingVector, c: &EmbeddingVector) -> Result<f64, RetrievalError> {
    if q.dim() != c.dim() {
        return Err(RetrievalError::DimensionMismatch(q.dim(), c.dim()));
    }
    let (mut dot, mut nq, mut nc) = (0.0, 0.0, 0.0);
    for (a, b) in q.0.iter().zip(&c.0) {
        dot += a * b;
        nq += a * a;
        nc += b * b;
    }
    if nq == 0.0 || nc == 0.0 {
        return Err(RetrievalError::ZeroVector);
    }
    Ok((dot / (nq.sqrt() * nc.sqrt())).clamp(-1.0, 1.0))
}

/// Indices of `scores` sorted by descending score, ties by ascending index.
pub fn rank_indices(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// Scores every candidate against the query with one batched embed call.
fn score_all(query: &str, candidates: Vec<String>, provider: &dyn Embedder) -> Result<Vec<f64>, RetrievalError> {
    let mut texts = Vec::with_capacity(candidates.len() + 1);
    texts.push(query.to_string());
    texts.extend(candidates);
    let vectors = provider.embed(&texts)?;
    let (q, rest) = vectors.split_first().ok_or(ProviderError::EmptyInput)?;
    rest.iter().map(|c| cosine(q, c)).collect()
}

/// Top `k` chunks by cosine similarity to `query`.
///
/// Chunks whose text is blank cannot be embedded; they are never returned.
pub fn top_k_chunks(
    query: &str,
    chunks: &[TextChunk],
    k: usize,
    provider: &dyn Embedder,
) -> Result<Vec<ScoredChunk>, RetrievalError> {
    let usable: Vec<&TextChunk> = chunks.iter().filter(|c| !c.text.trim().is_empty()).collect();
    if usable.is_empty() || k == 0 {
        return Ok(Vec::new());
    }
    let scores = score_all(query, usable.iter().map(|c| c.text.clone()).collect(), provider)?;
    Ok(rank_indices(&scores)
        .into_iter()
        .take(k)
        .map(|i| ScoredChunk { chunk: usable[i].clone(), score: scores[i] })
        .collect())
}

/// Picks tables for a prompt under a character budget.
///
/// With `rank` set, tables are ordered by cosine similarity to the query;
/// otherwise document order is kept. Tables are taken greedily; the one that
/// crosses the budget is cut at the budget and selection stops.
pub fn select_tables(
    query: &str,
    tables: &[MarkdownTable],
    char_budget: usize,
    rank: bool,
    provider: &dyn Embedder,
) -> Result<Vec<MarkdownTable>, RetrievalError> {
    if tables.is_empty() || char_budget == 0 {
        return Ok(Vec::new());
    }
    let order = if rank {
        rank_indices(&score_all(query, tables.iter().map(|t| t.markdown.clone()).collect(), provider)?)
    } else {
        (0..tables.len()).collect()
    };
    let mut used = 0;
    let mut out = Vec::new();
    for i in order {
        let t = &tables[i];
        let len = t.markdown.chars().count();
        if used + len <= char_budget {
            used += len;
            out.push(t.clone());
        } else {
            let room = char_budget - used;
            if room > 0 {
                out.push(MarkdownTable {
                    markdown: t.markdown.chars().take(room).collect(),
                    source_page: t.source_page.clone(),
                });
            }
            break;
        }
        if used == char_budget {
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::ChunkKind;
    use crate::provider::HashedBagOfWords;

    fn v(x: &[f64]) -> EmbeddingVector {
        EmbeddingVector(x.to_vec())
    }

    fn chunk(t: &str) -> TextChunk {
        TextChunk {
            text: t.into(),
            source_page: "p".into(),
            kind: ChunkKind::Plain,
            first_sentence: 0,
            sentence_count: 1,
        }
    }

    fn table(t: &str) -> MarkdownTable {
        MarkdownTable { markdown: t.into(), source_page: "p".into() }
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&v(&[1.0, 0.0]), &v(&[1.0, 0.0])).unwrap(), 1.0);
        assert_eq!(cosine(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        assert!((cosine(&v(&[1.0, 0.0]), &v(&[0.6, 0.8])).unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn cosine_errors() {
        assert_eq!(
            cosine(&v(&[1.0]), &v(&[1.0, 0.0])),
            Err(RetrievalError::DimensionMismatch(1, 2))
        );
        assert_eq!(cosine(&v(&[0.0, 0.0]), &v(&[1.0, 0.0])), Err(RetrievalError::ZeroVector));
    }

    #[test]
    fn cosine_scale_invariant() {
        let q = v(&[0.3, -2.0, 5.5]);
        for alpha in [1e-6, 0.5, 3.0, 1e6] {
            let scaled = v(&q.0.iter().map(|x| x * alpha).collect::<Vec<_>>());
            assert!((cosine(&q, &scaled).unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn top_k_picks_matching_chunk() {
        let p = HashedBagOfWords::default();
        let out = top_k_chunks("alpha", &[chunk("alpha"), chunk("beta")], 1, &p).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].chunk.text, "alpha");
        assert!((out[0].score - 1.0).abs() < 1e-9);
    }

    #[test]
    fn top_k_clamps() {
        let p = HashedBagOfWords::default();
        let out = top_k_chunks("q", &[chunk("a"), chunk("b"), chunk("c")], 10, &p).unwrap();
        assert_eq!(out.len(), 3);
    }

    #[test]
    fn ties_keep_earlier_index() {
        let p = HashedBagOfWords::default();
        let mut a = chunk("same text");
        a.first_sentence = 0;
        let mut b = chunk("same text");
        b.first_sentence = 1;
        let out = top_k_chunks("unrelated", &[a, b], 2, &p).unwrap();
        assert_eq!(out[0].chunk.first_sentence, 0);
        assert_eq!(out[1].chunk.first_sentence, 1);
    }

    #[test]
    fn tables_empty() {
        let p = HashedBagOfWords::default();
        assert!(select_tables("q", &[], 4000, true, &p).unwrap().is_empty());
    }

    #[test]
    fn oversized_table_cut_at_budget() {
        let p = HashedBagOfWords::default();
        let big = table(&"x".repeat(10_000));
        let out = select_tables("q", &[big], 4000, true, &p).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].markdown.chars().count(), 4000);
    }

    #[test]
    fn small_tables_in_rank_order() {
        let p = HashedBagOfWords::default();
        let t = [table("| goals | 3 |"), table("| rebounds | 12 |")];
        let out = select_tables("rebounds", &t, 4000, true, &p).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].markdown, "| rebounds | 12 |");
        let unranked = select_tables("rebounds", &t, 4000, false, &p).unwrap();
        assert_eq!(unranked[0].markdown, "| goals | 3 |");
    }

    #[test]
    fn second_table_cut() {
        let p = HashedBagOfWords::default();
        let t = [table(&"a".repeat(30)), table(&"b".repeat(30))];
        let out = select_tables("q", &t, 40, false, &p).unwrap();
        assert_eq!(out[1].markdown, "b".repeat(10));
    }
}
