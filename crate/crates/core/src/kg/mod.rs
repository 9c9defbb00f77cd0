//! Knowledge-graph references: an entity-extraction call feeding per-domain
//! rules, or a generated function-calling plan, executed against the mock API.

mod api;

pub use api::{HttpKgApi, KgApi, StubKgApi, StubResponse, DEFAULT_KG_TIMEOUT};

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::attributes::Domain;
use crate::provider::{GenerationRequest, Generator};

/// Calls beyond this many are dropped from a plan before execution.
pub const MAX_CALLS: usize = 8;
pub const MAX_ENTITIES: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KgError {
    #[error("malformed plan: {0}")]
    MalformedPlan(String),
    #[error("unknown function {0:?}")]
    UnknownFunction(String),
    #[error("knowledge graph api unreachable: {0}")]
    Unreachable(String),
    #[error("bad knowledge graph response: {0}")]
    BadResponse(String),
    #[error("bad endpoint registry: {0}")]
    BadRegistry(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionCall {
    pub function_name: String,
    pub args: Vec<String>,
}

impl FunctionCall {
    pub fn new(name: &str, args: &[&str]) -> Self {
        Self { function_name: name.to_string(), args: args.iter().map(|a| a.to_string()).collect() }
    }

    /// `name("a", "b")`, with arguments as JSON strings.
    pub fn signature(&self) -> String {
        let args: Vec<String> = self.args.iter().map(|a| json_string(a)).collect();
        format!("{}({})", self.function_name, args.join(", "))
    }
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KGFact {
    pub text: String,
    pub source_call: FunctionCall,
}

impl KGFact {
    pub fn render(call: &FunctionCall, response: &Value) -> Self {
        Self { text: format!("{} -> {}", call.signature(), response), source_call: call.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Endpoint {
    /// Request path; `{name}` expands to the function name.
    #[serde(default = "default_path")]
    pub path: String,
    pub params: Vec<String>,
    #[serde(default)]
    pub description: String,
}

fn default_path() -> String {
    "/{name}".to_string()
}

impl Endpoint {
    pub fn arity(&self) -> usize {
        self.params.len()
    }
}

/// Registered mock-API endpoints, keyed by function name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EndpointRegistry {
    endpoints: BTreeMap<String, Endpoint>,
}

impl Default for EndpointRegistry {
    fn default() -> Self {
        let entries = [
            ("finance_get_market_capitalization", &["ticker"][..], "Market capitalization of a company, by ticker symbol."),
            ("finance_get_pe_ratio", &["ticker"][..], "Price-to-earnings ratio of a company, by ticker symbol."),
            ("music_get_members", &["band"][..], "Current members of a band."),
            ("music_get_artist_birth_date", &["artist"][..], "Birth date of a musical artist."),
            ("movie_get_movie_info", &["title"][..], "Release date, director, cast and budget of a movie."),
        ];
        let endpoints = entries
            .iter()
            .map(|(name, params, desc)| {
                (
                    name.to_string(),
                    Endpoint {
                        path: default_path(),
                        params: params.iter().map(|p| p.to_string()).collect(),
                        description: desc.to_string(),
                    },
                )
            })
            .collect();
        Self { endpoints }
    }
}

impl EndpointRegistry {
    pub fn from_json(text: &str) -> Result<Self, KgError> {
        let reg: Self = serde_json::from_str(text).map_err(|e| KgError::BadRegistry(e.to_string()))?;
        if reg.endpoints.is_empty() {
            return Err(KgError::BadRegistry("no endpoints".into()));
        }
        Ok(reg)
    }

    pub fn from_file(path: &Path) -> Result<Self, KgError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| KgError::BadRegistry(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn get(&self, name: &str) -> Option<&Endpoint> {
        self.endpoints.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.endpoints.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.endpoints.keys().map(String::as_str)
    }

    pub fn path_for(&self, name: &str) -> Option<String> {
        self.get(name).map(|e| e.path.replace("{name}", name))
    }

    /// One line per endpoint, as listed in the function-calling prompt.
    pub fn describe(&self) -> String {
        self.endpoints
            .iter()
            .map(|(name, e)| format!("- {}({}): {}\n", name, e.params.join(", "), e.description))
            .collect()
    }

    fn accepts(&self, call: &FunctionCall) -> bool {
        match self.get(&call.function_name) {
            None => {
                log::warn!("dropping call to unregistered function {:?}", call.function_name);
                false
            }
            Some(e) if e.arity() != call.args.len() => {
                log::warn!(
                    "dropping {}: expected {} args, got {}",
                    call.function_name,
                    e.arity(),
                    call.args.len()
                );
                false
            }
            Some(_) => true,
        }
    }
}

/// The first complete JSON array in `text`, skipping prose, code fences and
/// bracketed text that is not JSON.
fn first_json_array(text: &str) -> Option<Vec<Value>> {
    text.match_indices('[').find_map(|(i, _)| {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(Value::Array(items))) => Some(items),
            _ => None,
        }
    })
}

fn parse_element(v: &Value) -> Result<FunctionCall, String> {
    let obj = v.as_object().ok_or("plan element is not an object")?;
    let name = obj
        .get("function_name")
        .and_then(Value::as_str)
        .ok_or("function_name missing or not a string")?;
    let args = obj
        .get("args")
        .and_then(Value::as_array)
        .ok_or("args missing or not an array")?
        .iter()
        .map(|a| a.as_str().map(str::to_string).ok_or("args must be strings"))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FunctionCall { function_name: name.to_string(), args })
}

/// Parses a generated function-calling plan. Calls to unregistered functions
/// or with the wrong arity are dropped.
pub fn parse_call_plan(completion: &str, registry: &EndpointRegistry) -> Result<Vec<FunctionCall>, KgError> {
    let items = first_json_array(completion).ok_or_else(|| KgError::MalformedPlan("no JSON array found".into()))?;
    let calls = items
        .iter()
        .map(parse_element)
        .collect::<Result<Vec<_>, _>>()
        .map_err(KgError::MalformedPlan)?;
    Ok(calls.into_iter().filter(|c| registry.accepts(c)).collect())
}

/// Renders a plan in the output format shown in the function-calling prompt.
pub fn render_call_plan(plan: &[FunctionCall]) -> String {
    if plan.is_empty() {
        return "[]".to_string();
    }
    let items: Vec<String> = plan
        .iter()
        .map(|c| {
            let args: Vec<String> = c.args.iter().map(|a| json_string(a)).collect();
            format!(
                "    {{\"function_name\": {}, \"args\": [{}]}}",
                json_string(&c.function_name),
                args.join(", ")
            )
        })
        .collect();
    format!("[\n{}\n]", items.join(",\n"))
}

fn mentions_any(query: &str, needles: &[&str]) -> bool {
    let q = query.to_lowercase();
    needles.iter().any(|n| q.contains(n))
}

/// Whether [`rule_based_plan`] has any rule for the domain.
pub fn has_rules(domain: Domain) -> bool {
    matches!(domain, Domain::Finance | Domain::Music | Domain::Movie)
}

/// Per-domain rule table. `query_time` is accepted for parity with the
/// function-calling path; no current rule depends on it.
pub fn rule_based_plan(query: &str, _query_time: &str, entities: &[String], domain: Domain) -> Vec<FunctionCall> {
    let mut plan = Vec::new();
    for entity in entities {
        let e = entity.as_str();
        match domain {
            Domain::Music => {
                plan.push(FunctionCall::new("music_get_members", &[e]));
                if mentions_any(query, &["born", "birth"]) {
                    plan.push(FunctionCall::new("music_get_artist_birth_date", &[e]));
                }
            }
            Domain::Finance => {
                plan.push(FunctionCall::new("finance_get_market_capitalization", &[e]));
                if mentions_any(query, &["p/e", "pe ratio", "price to earnings", "price-to-earnings"]) {
                    plan.push(FunctionCall::new("finance_get_pe_ratio", &[e]));
                }
            }
            Domain::Movie => plan.push(FunctionCall::new("movie_get_movie_info", &[e])),
            Domain::Sports | Domain::Open => {}
        }
    }
    plan.truncate(MAX_CALLS);
    plan
}

pub const ENTITY_SYSTEM_PROMPT: &str = "You are given a question, the time it was asked and its domain.
Extract the named entities the question is about, such as company names or ticker symbols, bands or artists, and movie titles.
You **MUST** output only a JSON array of lowercase strings that can be read by `json.loads`, for example [\"eagles\"].
Return an empty list if the question names no entity.";

pub fn build_entity_prompt(query: &str, query_time: &str, domain: Domain) -> GenerationRequest {
    let user = format!("Question: {query}\nQuery time: {query_time}\nDomain: {}\n", domain.as_str());
    GenerationRequest::new(ENTITY_SYSTEM_PROMPT, user).with_max_tokens(128)
}

/// Strings from the first JSON array in the completion, lowercased and
/// deduplicated. Anything unparsable yields no entities.
pub fn parse_entities(completion: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for v in first_json_array(completion).unwrap_or_default() {
        if let Some(s) = v.as_str() {
            let s = s.trim().to_lowercase();
            if !s.is_empty() && !out.contains(&s) {
                out.push(s);
            }
        }
    }
    out.truncate(MAX_ENTITIES);
    out
}

pub fn function_call_system_prompt(registry: &EndpointRegistry) -> String {
    format!(
        r#"
You are a helpful assistant in function calling. I have a knowledge graph and a set of functions that can be called. You will be given a question and the query time. Your task is to generate several function calls that can help me answer the question. Here are functions and their descriptions:
{}
Remember your rules:
1. You **MUST** follow the function signature.
2. You **MUST** output the JSON format that can be read by `json.loads`. Return empty list if no useful function calls can be found.
3. For each function call, you should output its function name and corresponding arguments.

Here are examples:

# Example 1:
Query: which company have larger market cap, hri or imppp?
Query time: 03/13/2024, 10:19:56 PT
Output: [
    {{"function_name": "finance_get_market_capitalization", "args": ["hri"]}},
    {{"function_name": "finance_get_market_capitalization", "args": ["imppp"]}}
]

# Example 2:
Query: who are the current members of the band eagles?
Query time: 03/05/2024, 23:17:59 PT
Output: [
    {{"function_name": "music_get_members", "args": ["eagles"]}}
]
"#,
        registry.describe()
    )
}

pub fn build_function_call_prompt(query: &str, query_time: &str, registry: &EndpointRegistry) -> GenerationRequest {
    let mut user = format!("Question: {query}\n");
    user += &format!("Query time: {query_time}\n");
    user += "Using the tools listed above and based on the question, generate useful function calls for me. \n";
    user += "
Remember your rules:
1. You **MUST** follow the function signature.
2. You **MUST** output the JSON format that can be read by `json.loads`.
3. For each function call, you should output its function name and corresponding arguments.
";
    GenerationRequest::new(function_call_system_prompt(registry), user)
}

/// Runs the plan in order, at most [`MAX_CALLS`] calls. Failed calls are
/// skipped.
pub fn execute_plan(plan: &[FunctionCall], api: &dyn KgApi) -> Vec<KGFact> {
    if plan.len() > MAX_CALLS {
        log::warn!("plan has {} calls, executing the first {MAX_CALLS}", plan.len());
    }
    plan.iter()
        .take(MAX_CALLS)
        .filter_map(|call| match api.call(call) {
            Ok(resp) => Some(KGFact::render(call, &resp)),
            Err(e) => {
                log::warn!("{} failed: {e}", call.signature());
                None
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KgMode {
    #[default]
    RuleBased,
    FunctionCalling,
}

impl std::str::FromStr for KgMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rule-based" | "rules" => Ok(KgMode::RuleBased),
            "function-calling" => Ok(KgMode::FunctionCalling),
            other => Err(format!("unknown kg mode {other:?}")),
        }
    }
}

/// Produces the plan for a question. Never fails; generator problems give an
/// empty plan.
pub fn plan_for(
    query: &str,
    query_time: &str,
    domain: Domain,
    mode: KgMode,
    registry: &EndpointRegistry,
    generator: &dyn Generator,
) -> Vec<FunctionCall> {
    let first = |req: GenerationRequest| match generator.generate(&req) {
        Ok(r) => r.completions.into_iter().next(),
        Err(e) => {
            log::warn!("kg planning call failed: {e}");
            None
        }
    };
    match mode {
        KgMode::RuleBased => {
            if !has_rules(domain) {
                return Vec::new();
            }
            let Some(text) = first(build_entity_prompt(query, query_time, domain)) else {
                return Vec::new();
            };
            rule_based_plan(query, query_time, &parse_entities(&text), domain)
                .into_iter()
                .filter(|c| registry.accepts(c))
                .collect()
        }
        KgMode::FunctionCalling => {
            let Some(text) = first(build_function_call_prompt(query, query_time, registry)) else {
                return Vec::new();
            };
            parse_call_plan(&text, registry).unwrap_or_else(|e| {
                log::warn!("{e}");
                Vec::new()
            })
        }
    }
}
