use sha2::{Digest, Sha256};

use super::{check_embed_input, Embedder, EmbeddingVector, ProviderResult};

pub const OFFLINE_EMBED_DIM: usize = 256;

/// Signed feature hashing over lowercase alphanumeric tokens, L2-normalized.
///
/// The bucket index and the sign come from disjoint bytes of the token's
/// SHA-256 digest. A text with no tokens maps to the unit vector e1 so that
/// cosine similarity is always defined.
#[derive(Debug, Clone)]
pub struct HashedBagOfWords {
    dim: usize,
}

impl Default for HashedBagOfWords {
    fn default() -> Self {
        Self { dim: OFFLINE_EMBED_DIM }
    }
}

impl HashedBagOfWords {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn embed_one(&self, text: &str) -> EmbeddingVector {
        let mut v = vec![0.0f64; self.dim];
        for token in tokenize(text) {
            let digest = Sha256::digest(token.as_bytes());
            let bucket = u64::from_le_bytes(digest[0..8].try_into().unwrap()) % self.dim as u64;
            let sign = if digest[8] & 1 == 0 { 1.0 } else { -1.0 };
            v[bucket as usize] += sign;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            v[0] = 1.0;
        } else {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        EmbeddingVector(v)
    }
}

pub(crate) fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
}

impl Embedder for HashedBagOfWords {
    fn embed(&self, texts: &[String]) -> ProviderResult<Vec<EmbeddingVector>> {
        check_embed_input(texts)?;
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }

    fn fingerprint(&self) -> String {
        format!("hashed-bow-sha256-d{}", self.dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::ProviderError;

    fn dot(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
        a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn one_vector_per_text() {
        let p = HashedBagOfWords::default();
        let out = p.embed(&["abc".to_string()]).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].dim(), OFFLINE_EMBED_DIM);
    }

    #[test]
    fn deterministic() {
        let p = HashedBagOfWords::default();
        let out = p.embed(&["abc".to_string(), "abc".to_string()]).unwrap();
        assert_eq!(out[0], out[1]);
        let again = p.embed(&["abc".to_string()]).unwrap();
        assert_eq!(out[0], again[0]);
    }

    #[test]
    fn self_cosine_is_one() {
        let p = HashedBagOfWords::default();
        for t in ["x", "y", "The quick brown fox", "ÉCOLE école 42"] {
            let v = p.embed_one(t);
            assert!((dot(&v, &v) - 1.0).abs() < 1e-9, "{t}");
        }
    }

    #[test]
    fn case_and_punctuation_insensitive() {
        let p = HashedBagOfWords::default();
        assert_eq!(p.embed_one("Hello, World!"), p.embed_one("hello world"));
    }

    #[test]
    fn tokenless_text_maps_to_e1() {
        let p = HashedBagOfWords::default();
        let v = p.embed_one("?!...");
        assert_eq!(v.0[0], 1.0);
        assert_eq!(v.0.iter().filter(|x| **x != 0.0).count(), 1);
    }

    #[test]
    fn rejects_empty_input() {
        let p = HashedBagOfWords::default();
        assert_eq!(p.embed(&[]), Err(ProviderError::EmptyInput));
        assert_eq!(p.embed(&["  ".to_string()]), Err(ProviderError::EmptyInput));
    }

    #[test]
    fn values_are_finite() {
        let p = HashedBagOfWords::default();
        let v = p.embed_one(&"word ".repeat(10_000));
        assert!(v.0.iter().all(|x| x.is_finite()));
    }
}
