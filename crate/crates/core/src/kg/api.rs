use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{EndpointRegistry, FunctionCall, KgError};

pub const DEFAULT_KG_TIMEOUT: Duration = Duration::from_secs(2);

pub trait KgApi: Send + Sync {
    fn call(&self, call: &FunctionCall) -> Result<Value, KgError>;
}

/// Mock-API client: `POST <base><path>` with body `{"args": [...]}`.
#[derive(Debug, Clone)]
pub struct HttpKgApi {
    base: String,
    registry: EndpointRegistry,
    agent: ureq::Agent,
}

impl HttpKgApi {
    pub fn new(base: impl Into<String>, registry: EndpointRegistry, timeout: Duration) -> Self {
        let base = base.into().trim_end_matches('/').to_string();
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        Self { base, registry, agent }
    }

    /// Reads the base URL from `KG_ENDPOINT`.
    pub fn from_env(registry: EndpointRegistry) -> Option<Self> {
        std::env::var("KG_ENDPOINT")
            .ok()
            .filter(|s| !s.trim().is_empty())
            .map(|e| Self::new(e, registry, DEFAULT_KG_TIMEOUT))
    }
}

impl KgApi for HttpKgApi {
    fn call(&self, call: &FunctionCall) -> Result<Value, KgError> {
        let path = self
            .registry
            .path_for(&call.function_name)
            .ok_or_else(|| KgError::UnknownFunction(call.function_name.clone()))?;
        let resp = self
            .agent
            .post(&format!("{}{}", self.base, path))
            .send_json(json!({ "args": call.args }))
            .map_err(|e| match e {
                ureq::Error::Status(code, _) => KgError::BadResponse(format!("status {code}")),
                ureq::Error::Transport(t) => KgError::Unreachable(t.to_string()),
            })?;
        resp.into_json().map_err(|e| KgError::BadResponse(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StubResponse {
    pub args: Vec<String>,
    pub response: Value,
}

/// In-process mock API answering from a fixed table. Arguments match
/// case-insensitively; unlisted calls fail.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StubKgApi {
    table: BTreeMap<String, Vec<StubResponse>>,
}

impl StubKgApi {
    pub fn from_json(text: &str) -> Result<Self, KgError> {
        serde_json::from_str(text).map_err(|e| KgError::BadRegistry(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self, KgError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| KgError::BadRegistry(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn insert(&mut self, call: FunctionCall, response: Value) {
        self.table
            .entry(call.function_name)
            .or_default()
            .push(StubResponse { args: call.args, response });
    }

    pub fn lookup(&self, call: &FunctionCall) -> Option<&Value> {
        let same = |a: &[String], b: &[String]| {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_lowercase() == y.to_lowercase())
        };
        self.table
            .get(&call.function_name)?
            .iter()
            .find(|r| same(&r.args, &call.args))
            .map(|r| &r.response)
    }
}

impl KgApi for StubKgApi {
    fn call(&self, call: &FunctionCall) -> Result<Value, KgError> {
        self.lookup(call)
            .cloned()
            .ok_or_else(|| KgError::BadResponse(format!("no data for {}", call.signature())))
    }
}

#[cfg(test)]
mod tests {
    use super::super::execute_plan;
    use super::*;

    fn stub() -> StubKgApi {
        let mut s = StubKgApi::default();
        s.insert(FunctionCall::new("music_get_members", &["eagles"]), json!({"members": ["Don Henley"]}));
        s.insert(FunctionCall::new("finance_get_market_capitalization", &["hri"]), json!(4.2e9));
        s
    }

    #[test]
    fn stub_fact_rendering() {
        let facts = execute_plan(&[FunctionCall::new("music_get_members", &["Eagles"])], &stub());
        assert_eq!(facts.len(), 1);
        assert_eq!(facts[0].text, r#"music_get_members("Eagles") -> {"members":["Don Henley"]}"#);
    }

    #[test]
    fn failed_call_skipped_in_order() {
        let plan = [
            FunctionCall::new("finance_get_market_capitalization", &["hri"]),
            FunctionCall::new("finance_get_market_capitalization", &["missing"]),
            FunctionCall::new("music_get_members", &["eagles"]),
        ];
        let facts = execute_plan(&plan, &stub());
        assert_eq!(facts.len(), 2);
        assert_eq!(facts[0].source_call, plan[0]);
        assert_eq!(facts[1].source_call, plan[2]);
    }

    #[test]
    fn unreachable_http_gives_no_facts() {
        let api = HttpKgApi::new("http://127.0.0.1:9", EndpointRegistry::default(), Duration::from_millis(200));
        assert!(execute_plan(&[FunctionCall::new("music_get_members", &["eagles"])], &api).is_empty());
    }

    #[test]
    fn stub_json_shape() {
        let s = StubKgApi::from_json(r#"{"music_get_members": [{"args": ["eagles"], "response": {"members": []}}]}"#).unwrap();
        assert!(s.lookup(&FunctionCall::new("music_get_members", &["EAGLES"])).is_some());
    }
}
