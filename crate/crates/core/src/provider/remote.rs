use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{
    check_embed_input, Embedder, EmbeddingVector, GenerationRequest, GenerationResult, Generator,
    ProviderError, ProviderResult,
};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Serialize)]
struct EmbedBody<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedReply {
    vectors: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct GenerateBody<'a> {
    system: &'a str,
    user: &'a str,
    n: usize,
    temperature: f64,
    max_tokens: usize,
}

#[derive(Deserialize)]
struct GenerateReply {
    completions: Vec<String>,
}

#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
pub struct SidecarInfo {
    pub embed_dim: usize,
    #[serde(default)]
    pub models: serde_json::Value,
}

/// HTTP client for the model sidecar (`POST /embed`, `POST /generate`, `GET /info`).
#[derive(Debug, Clone)]
pub struct RemoteProvider {
    base: String,
    agent: ureq::Agent,
}

impl RemoteProvider {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        let base = endpoint.into().trim_end_matches('/').to_string();
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        Self { base, agent }
    }

    /// Reads the endpoint from `MODEL_ENDPOINT`.
    pub fn from_env() -> Option<Self> {
        std::env::var("MODEL_ENDPOINT")
            .ok()
            .filter(|s| !s.trim().is_empty())
            .map(|e| Self::new(e, DEFAULT_TIMEOUT))
    }

    pub fn endpoint(&self) -> &str {
        &self.base
    }

    pub fn info(&self) -> ProviderResult<SidecarInfo> {
        let resp = self
            .agent
            .get(&format!("{}/info", self.base))
            .call()
            .map_err(map_err)?;
        resp.into_json().map_err(|e| ProviderError::BadResponse(e.to_string()))
    }

    /// `GET /health`; any 2xx answer counts as healthy.
    pub fn health(&self) -> ProviderResult<()> {
        self.agent
            .get(&format!("{}/health", self.base))
            .call()
            .map(|_| ())
            .map_err(map_err)
    }
}

fn map_err(e: ureq::Error) -> ProviderError {
    match e {
        ureq::Error::Status(code, resp) => {
            let body = resp.into_string().unwrap_or_default();
            if code == 400 {
                ProviderError::InvalidRequest(body)
            } else {
                ProviderError::Unreachable(format!("status {code}: {body}"))
            }
        }
        ureq::Error::Transport(t) => ProviderError::Unreachable(t.to_string()),
    }
}

impl Embedder for RemoteProvider {
    fn embed(&self, texts: &[String]) -> ProviderResult<Vec<EmbeddingVector>> {
        check_embed_input(texts)?;
        let reply: EmbedReply = self
            .agent
            .post(&format!("{}/embed", self.base))
            .send_json(EmbedBody { texts })
            .map_err(map_err)?
            .into_json()
            .map_err(|e| ProviderError::BadResponse(e.to_string()))?;
        if reply.vectors.len() != texts.len() {
            return Err(ProviderError::BadResponse(format!(
                "expected {} vectors, got {}",
                texts.len(),
                reply.vectors.len()
            )));
        }
        let dim = reply.vectors[0].len();
        if dim == 0 || reply.vectors.iter().any(|v| v.len() != dim) {
            return Err(ProviderError::BadResponse("inconsistent embedding dimension".into()));
        }
        if reply.vectors.iter().flatten().any(|x| !x.is_finite()) {
            return Err(ProviderError::BadResponse("non-finite embedding value".into()));
        }
        Ok(reply.vectors.into_iter().map(EmbeddingVector).collect())
    }

    fn fingerprint(&self) -> String {
        format!("remote:{}", self.base)
    }
}

impl Generator for RemoteProvider {
    fn generate(&self, req: &GenerationRequest) -> ProviderResult<GenerationResult> {
        req.validate()?;
        let reply: GenerateReply = self
            .agent
            .post(&format!("{}/generate", self.base))
            .send_json(GenerateBody {
                system: &req.system_prompt,
                user: &req.user_prompt,
                n: req.n_samples,
                temperature: req.temperature,
                max_tokens: req.max_tokens,
            })
            .map_err(map_err)?
            .into_json()
            .map_err(|e| ProviderError::BadResponse(e.to_string()))?;
        if reply.completions.len() != req.n_samples {
            return Err(ProviderError::BadResponse(format!(
                "expected {} completions, got {}",
                req.n_samples,
                reply.completions.len()
            )));
        }
        Ok(GenerationResult { completions: reply.completions })
    }

    fn fingerprint(&self) -> String {
        format!("remote:{}", self.base)
    }
}
