use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{GenerationRequest, GenerationResult, Generator, ProviderError, ProviderResult};

/// Hex of the first 8 bytes of SHA-256 over `system ++ 0x00 ++ user`.
pub fn fingerprint(system_prompt: &str, user_prompt: &str) -> String {
    let mut h = Sha256::new();
    h.update(system_prompt.as_bytes());
    h.update([0u8]);
    h.update(user_prompt.as_bytes());
    let digest = h.finalize();
    let mut out = String::with_capacity(16);
    for b in &digest[..8] {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Replays canned completions keyed by prompt fingerprint.
///
/// The script is immutable once loaded. A request for more samples than the
/// script holds cycles through the entries; fewer samples truncate.
#[derive(Debug, Clone, Default)]
pub struct ScriptedGenerator {
    script: BTreeMap<String, Vec<String>>,
}

impl ScriptedGenerator {
    pub fn new(script: BTreeMap<String, Vec<String>>) -> Self {
        Self { script }
    }

    pub fn from_json(json: &str) -> ProviderResult<Self> {
        let script: BTreeMap<String, Vec<String>> = serde_json::from_str(json)
            .map_err(|e| ProviderError::BadResponse(format!("script: {e}")))?;
        Ok(Self { script })
    }

    pub fn from_file(path: impl AsRef<Path>) -> ProviderResult<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Unreachable(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn insert(&mut self, system_prompt: &str, user_prompt: &str, completions: Vec<String>) {
        self.script.insert(fingerprint(system_prompt, user_prompt), completions);
    }

    pub fn insert_for(&mut self, req: &GenerationRequest, completions: Vec<String>) {
        self.insert(&req.system_prompt, &req.user_prompt, completions);
    }

    pub fn contains(&self, req: &GenerationRequest) -> bool {
        self.script.contains_key(&req.fingerprint())
    }

    pub fn len(&self) -> usize {
        self.script.len()
    }

    pub fn is_empty(&self) -> bool {
        self.script.is_empty()
    }

    /// Pretty JSON with sorted keys, suitable for committing as a fixture.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.script).expect("script serializes")
    }
}

impl Generator for ScriptedGenerator {
    fn generate(&self, req: &GenerationRequest) -> ProviderResult<GenerationResult> {
        req.validate()?;
        let key = req.fingerprint();
        let canned = self
            .script
            .get(&key)
            .ok_or_else(|| ProviderError::UnscriptedPrompt(key.clone()))?;
        if canned.is_empty() {
            return Err(ProviderError::BadResponse(format!("script entry {key} is empty")));
        }
        let completions = canned.iter().cycle().take(req.n_samples).cloned().collect();
        Ok(GenerationResult { completions })
    }

    fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in &self.script {
            h.update(k.as_bytes());
            for c in v {
                h.update([0u8]);
                h.update(c.as_bytes());
            }
            h.update([1u8]);
        }
        let d = h.finalize();
        format!("scripted-{:02x}{:02x}{:02x}{:02x}", d[0], d[1], d[2], d[3])
    }
}
