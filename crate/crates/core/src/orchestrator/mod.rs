//! Question pipeline: pages, attributes, references, reasoning, verdict.

mod prompt;

pub use prompt::{
    build_reasoning_prompt, build_summary_prompt, ReferenceBundle, DEFAULT_KG_CHAR_CAP,
    DEFAULT_REASONING_TABLE_BUDGET, REASONING_SYSTEM_PROMPT, SUMMARY_SYSTEM_PROMPT,
};

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attributes::{
    classify_icl, default_examples, Attribute, Domain, Dynamism, LinearClassifier, Method,
    QuestionAttributes, DEFAULT_ICL_SAMPLES,
};
use crate::calculator::{build_calc_prompt, evaluate_samples, CALC_SAMPLES, DEFAULT_CALC_TABLE_BUDGET};
use crate::evalkit::DatasetRecord;
use crate::ingest::{process_pages, ChunkConfig, WebPage};
use crate::kg::{execute_plan, plan_for, EndpointRegistry, KgApi, KgMode};
use crate::knowledge::{extract_knowledge, parse_structured, StructuredOutput, END_MARKER, START_MARKER};
use crate::provider::{Embedder, Generator, ProviderError};
use crate::retrieval::{select_tables, top_k_chunks};

pub const MISSING_ANSWER: &str = "I don't know";
pub const INVALID_ANSWER: &str = "Invalid question";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictKind {
    Answered,
    Missing,
    InvalidQuestion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    /// `None` when timing is disabled, so offline outputs are reproducible.
    pub elapsed_ms: Option<f64>,
    /// First 16 hex digits of the SHA-256 of the stage's raw output.
    pub digest: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub answer: String,
    pub trace: Vec<StageRecord>,
}

impl Verdict {
    pub fn missing(trace: Vec<StageRecord>) -> Self {
        Self { kind: VerdictKind::Missing, answer: MISSING_ANSWER.into(), trace }
    }

    pub fn has_stage(&self, stage: &str) -> bool {
        self.trace.iter().any(|s| s.stage == stage)
    }
}

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub interaction_id: String,
    #[serde(flatten)]
    pub verdict: Verdict,
}

pub fn digest(text: &str) -> String {
    Sha256::digest(text.as_bytes())[..8].iter().map(|b| format!("{b:02x}")).collect()
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn is_invalid_sentinel(answer: &str) -> bool {
    let a = answer.trim().trim_end_matches(['.', '!']).trim_matches(['"', '\'']).trim();
    a.eq_ignore_ascii_case(INVALID_ANSWER)
}

/// Routes a parsed reasoning output to a verdict kind and canonical answer.
pub fn normalize_answer(parsed: &StructuredOutput) -> (VerdictKind, String) {
    if parsed.false_premise == Some(true) || is_invalid_sentinel(&parsed.answer) {
        return (VerdictKind::InvalidQuestion, INVALID_ANSWER.into());
    }
    let answer = collapse_whitespace(&parsed.answer);
    let lowered = answer.to_lowercase().replace('\u{2019}', "'");
    if answer.is_empty() || lowered.contains("i don't know") {
        return (VerdictKind::Missing, MISSING_ANSWER.into());
    }
    (VerdictKind::Answered, answer)
}

/// One-sample summary of an unparsable reasoning output.
pub fn summarize_fallback(query: &str, reasoning_text: &str, provider: &dyn Generator) -> Result<String, ProviderError> {
    let result = provider.generate(&build_summary_prompt(query, reasoning_text))?;
    Ok(result.completions.into_iter().next().unwrap_or_default().trim().to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSettings {
    pub chunk: ChunkConfig,
    pub top_k_chunks: usize,
    pub table_budget_reasoning: usize,
    pub table_budget_calc: usize,
    pub kg_char_cap: usize,
    pub n_icl_samples: usize,
    pub calc_samples: usize,
    pub kg_mode: KgMode,
    /// Run the calculator for every static question.
    pub calc_always: bool,
    /// Order tables by similarity to the query rather than page order.
    pub rank_tables: bool,
    pub record_timing: bool,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        Self {
            chunk: ChunkConfig::default(),
            top_k_chunks: 10,
            table_budget_reasoning: DEFAULT_REASONING_TABLE_BUDGET,
            table_budget_calc: DEFAULT_CALC_TABLE_BUDGET,
            kg_char_cap: DEFAULT_KG_CHAR_CAP,
            n_icl_samples: DEFAULT_ICL_SAMPLES,
            calc_samples: CALC_SAMPLES,
            kg_mode: KgMode::RuleBased,
            calc_always: false,
            rank_tables: true,
            record_timing: false,
        }
    }
}

/// Where question attributes come from.
#[derive(Debug, Clone)]
pub enum AttributeSource {
    Icl,
    Linear { domain: Arc<LinearClassifier>, dynamism: Arc<LinearClassifier> },
    /// The dataset's own labels.
    Gold,
}

pub struct Pipeline<'a> {
    pub embedder: &'a dyn Embedder,
    pub generator: &'a dyn Generator,
    pub kg: &'a dyn KgApi,
    pub registry: EndpointRegistry,
    pub attributes: AttributeSource,
    pub settings: PipelineSettings,
}

struct Tracer {
    timing: bool,
    started: Instant,
    records: Vec<StageRecord>,
}

impl Tracer {
    fn new(timing: bool) -> Self {
        Self { timing, started: Instant::now(), records: Vec::new() }
    }

    fn start(&mut self) {
        self.started = Instant::now();
    }

    fn record(&mut self, stage: &str, raw: &str, detail: impl Into<String>) {
        let elapsed_ms = self.timing.then(|| self.started.elapsed().as_secs_f64() * 1000.0);
        self.records.push(StageRecord { stage: stage.into(), elapsed_ms, digest: digest(raw), detail: detail.into() });
    }
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).unwrap_or_default()
}

impl Pipeline<'_> {
    fn classify(&self, query: &str, attr: Attribute) -> &'static str {
        let label = match &self.attributes {
            AttributeSource::Icl => {
                classify_icl(query, attr, &default_examples(attr), self.generator, self.settings.n_icl_samples)
                    .map_err(|e| e.to_string())
            }
            AttributeSource::Linear { domain, dynamism } => {
                let model = if attr == Attribute::Domain { domain } else { dynamism };
                model.predict(query, self.embedder).map_err(|e| e.to_string()).map(|l| {
                    attr.labels().iter().copied().find(|x| *x == l).unwrap_or(attr.fallback())
                })
            }
            AttributeSource::Gold => unreachable!("gold labels are read from the record"),
        };
        label.unwrap_or_else(|e| {
            log::warn!("{attr:?} classification failed, using {}: {e}", attr.fallback());
            attr.fallback()
        })
    }

    fn attributes(&self, record: &DatasetRecord) -> QuestionAttributes {
        match &self.attributes {
            AttributeSource::Gold => QuestionAttributes {
                domain: Domain::from_label(&record.domain.trim().to_lowercase()).unwrap_or(Domain::Open),
                dynamism: Dynamism::from_gold(&record.static_or_dynamic).unwrap_or(Dynamism::Dynamic),
                method: Method::Fixed,
            },
            source => QuestionAttributes {
                domain: Domain::from_label(self.classify(&record.query, Attribute::Domain)).unwrap_or(Domain::Open),
                dynamism: Dynamism::from_label(self.classify(&record.query, Attribute::Dynamism))
                    .unwrap_or(Dynamism::Dynamic),
                method: if matches!(source, AttributeSource::Icl) { Method::Icl } else { Method::Linear },
            },
        }
    }

    fn wants_calculator(&self, query: &str, domain: Domain) -> bool {
        self.settings.calc_always
            || matches!(domain, Domain::Finance | Domain::Sports)
            || query.chars().any(|c| c.is_ascii_digit())
    }

    fn run(&self, record: &DatasetRecord) -> Verdict {
        let s = &self.settings;
        let query = record.query.as_str();
        let mut t = Tracer::new(s.record_timing);

        t.start();
        let pages: Vec<WebPage> = record
            .search_results
            .iter()
            .map(|r| WebPage { page_name: r.page_name.clone(), url: r.page_url.clone(), html: r.page_html.clone() })
            .collect();
        let content = process_pages(&pages, &s.chunk);
        t.record(
            "pages",
            &json(&content.chunks),
            format!("chunks={} tables={}", content.chunks.len(), content.tables.len()),
        );

        t.start();
        let attrs = self.attributes(record);
        t.record(
            "attributes",
            &json(&attrs),
            format!("domain={} dynamism={}", attrs.domain.as_str(), attrs.dynamism.as_str()),
        );
        if attrs.dynamism == Dynamism::Dynamic {
            return Verdict::missing(t.records);
        }

        let mut bundle = ReferenceBundle::new(query, record.query_time.clone());
        bundle.table_budget = s.table_budget_reasoning;
        bundle.kg_char_cap = s.kg_char_cap;

        t.start();
        bundle.chunks = top_k_chunks(query, &content.chunks, s.top_k_chunks, self.embedder).unwrap_or_else(|e| {
            log::warn!("retrieval failed: {e}");
            Vec::new()
        });
        t.record("retrieval", &json(&bundle.chunks), format!("chunks={}", bundle.chunks.len()));

        t.start();
        let pick = |budget| {
            select_tables(query, &content.tables, budget, s.rank_tables, self.embedder).unwrap_or_else(|e| {
                log::warn!("table selection failed: {e}");
                Vec::new()
            })
        };
        bundle.tables = pick(s.table_budget_reasoning);
        t.record("tables", &json(&bundle.tables), format!("tables={}", bundle.tables.len()));

        t.start();
        let plan = plan_for(query, &record.query_time, attrs.domain, s.kg_mode, &self.registry, self.generator);
        bundle.kg_facts = execute_plan(&plan, self.kg);
        t.record("kg", &json(&bundle.kg_facts), format!("calls={} facts={}", plan.len(), bundle.kg_facts.len()));

        if self.wants_calculator(query, attrs.domain) {
            t.start();
            let calc_tables = pick(s.table_budget_calc);
            let req = build_calc_prompt(query, &bundle.chunks, &calc_tables, s.table_budget_calc)
                .with_samples(s.calc_samples);
            bundle.calc_results = match self.generator.generate(&req) {
                Ok(r) => evaluate_samples(&r.completions),
                Err(e) => {
                    log::warn!("calculator generation failed: {e}");
                    Vec::new()
                }
            };
            t.record("calculator", &json(&bundle.calc_results), format!("results={}", bundle.calc_results.len()));
        }

        t.start();
        let direct = extract_knowledge(query, self.generator);
        t.record("direct-answer", &json(&direct), format!("parse_ok={}", direct.parse_ok));
        bundle.direct_answer = Some(direct);

        t.start();
        let completion = match self.generator.generate(&build_reasoning_prompt(&bundle)) {
            Ok(r) => r.completions.into_iter().next().unwrap_or_default(),
            Err(e) => {
                t.record("reasoning", "", format!("error: {e}"));
                return Verdict::missing(t.records);
            }
        };
        let parsed = parse_structured(&completion).ok().filter(|p| !p.answer.is_empty());
        t.record(
            "reasoning",
            &completion,
            match &parsed {
                Some(p) if p.degraded => "parsed (degraded)",
                Some(_) => "parsed",
                None => "unparsable",
            },
        );
        let parsed = match parsed {
            Some(p) => p,
            None => {
                t.start();
                let summary = match summarize_fallback(query, &completion, self.generator) {
                    Ok(s) => s,
                    Err(e) => {
                        t.record("summarize", "", format!("error: {e}"));
                        return Verdict::missing(t.records);
                    }
                };
                t.record("summarize", &summary, "");
                // A summary in the envelope format is trusted only through its
                // answer section; envelope debris is never an answer.
                parse_structured(&summary).unwrap_or_else(|_| StructuredOutput {
                    reasoning: String::new(),
                    answer: if summary.contains(START_MARKER) || summary.contains(END_MARKER) {
                        String::new()
                    } else {
                        summary
                    },
                    false_premise: None,
                    degraded: true,
                })
            }
        };
        let (kind, answer) = normalize_answer(&parsed);
        Verdict { kind, answer, trace: t.records }
    }

    /// Never fails; any fault, including a panic inside a stage, gives a
    /// missing verdict.
    pub fn answer_question(&self, record: &DatasetRecord) -> Verdict {
        catch_unwind(AssertUnwindSafe(|| self.run(record))).unwrap_or_else(|_| {
            log::error!("pipeline panicked on {}", record.interaction_id);
            Verdict::missing(vec![StageRecord {
                stage: "panic".into(),
                elapsed_ms: None,
                digest: digest(""),
                detail: "pipeline aborted".into(),
            }])
        })
    }

    /// Answers all records on `workers` threads; output order follows input.
    pub fn answer_all(&self, records: &[DatasetRecord], workers: usize) -> Vec<VerdictRecord> {
        use rayon::prelude::*;
        let run = || {
            records
                .par_iter()
                .map(|r| VerdictRecord { interaction_id: r.interaction_id.clone(), verdict: self.answer_question(r) })
                .collect()
        };
        match rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
            Ok(pool) => pool.install(run),
            Err(e) => {
                log::warn!("worker pool unavailable, using the global pool: {e}");
                run()
            }
        }
    }
}
