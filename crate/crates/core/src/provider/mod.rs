//! Embedding and generation backends.
//!
//! Everything downstream talks to models through the [`Embedder`] and
//! [`Generator`] traits. Two offline implementations make the whole pipeline
//! runnable without a model server: [`HashedBagOfWords`] for embeddings and
//! [`ScriptedGenerator`] for completions. [`RemoteProvider`] speaks the JSON
//! wire protocol of the model sidecar.

mod offline;
mod remote;
mod scripted;

pub use offline::{HashedBagOfWords, OFFLINE_EMBED_DIM};
pub use remote::{RemoteProvider, DEFAULT_TIMEOUT};
pub use scripted::{fingerprint, ScriptedGenerator};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("provider unreachable: {0}")]
    Unreachable(String),
    #[error("empty input")]
    EmptyInput,
    #[error("no scripted completions for prompt fingerprint {0}")]
    UnscriptedPrompt(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("malformed provider response: {0}")]
    BadResponse(String),
}

pub type ProviderResult<T> = std::result::Result<T, ProviderError>;

/// A dense embedding. All vectors from one provider share a dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(pub Vec<f64>);

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub system_prompt: String,
    pub user_prompt: String,
    pub n_samples: usize,
    pub temperature: f64,
    pub max_tokens: usize,
}

impl GenerationRequest {
    pub fn new(system_prompt: impl Into<String>, user_prompt: impl Into<String>) -> Self {
        Self {
            system_prompt: system_prompt.into(),
            user_prompt: user_prompt.into(),
            n_samples: 1,
            temperature: 0.0,
            max_tokens: 512,
        }
    }

    pub fn with_samples(mut self, n: usize) -> Self {
        self.n_samples = n;
        self
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn with_max_tokens(mut self, n: usize) -> Self {
        self.max_tokens = n;
        self
    }

    pub fn validate(&self) -> ProviderResult<()> {
        if self.n_samples == 0 {
            return Err(ProviderError::InvalidRequest("n_samples must be >= 1".into()));
        }
        if self.max_tokens == 0 {
            return Err(ProviderError::InvalidRequest("max_tokens must be >= 1".into()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(ProviderError::InvalidRequest(
                "temperature must be non-negative".into(),
            ));
        }
        if self.system_prompt.trim().is_empty() || self.user_prompt.trim().is_empty() {
            return Err(ProviderError::InvalidRequest("prompts must be non-empty".into()));
        }
        Ok(())
    }

    /// Stable 64-bit fingerprint of the prompt pair, used as the script key.
    pub fn fingerprint(&self) -> String {
        fingerprint(&self.system_prompt, &self.user_prompt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub completions: Vec<String>,
}

pub trait Embedder: Send + Sync {
    fn embed(&self, texts: &[String]) -> ProviderResult<Vec<EmbeddingVector>>;

    /// Identifies the embedding space; persisted alongside trained models.
    fn fingerprint(&self) -> String;
}

pub trait Generator: Send + Sync {
    fn generate(&self, req: &GenerationRequest) -> ProviderResult<GenerationResult>;

    fn fingerprint(&self) -> String;
}

pub(crate) fn check_embed_input(texts: &[String]) -> ProviderResult<()> {
    if texts.is_empty() || texts.iter().any(|t| t.trim().is_empty()) {
        return Err(ProviderError::EmptyInput);
    }
    Ok(())
}
