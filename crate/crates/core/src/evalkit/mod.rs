//! Dataset loading, +1/0/-1 judging and score reports.

mod dataset;

pub use dataset::{load_dataset, parse_dataset, DatasetRecord, SearchResult};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::orchestrator::{Verdict, VerdictKind};

/// Answers are judged on their first this-many whitespace tokens.
pub const MAX_ANSWER_TOKENS: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("{0}")]
    Io(String),
    #[error("malformed record at line {line}: {message}")]
    MalformedRecord { line: usize, message: String },
    #[error("nothing to score")]
    EmptyInput,
    #[error("{judgements} judgements for {records} records")]
    LengthMismatch { judgements: usize, records: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Judgement {
    Correct,
    Missing,
    Hallucination,
}

/// Lowercased whitespace tokens with punctuation stripped from both ends;
/// tokens that are all punctuation are dropped.
pub fn normalize_tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

fn contains_run(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

pub fn judge(verdict: &Verdict, record: &DatasetRecord) -> Judgement {
    match verdict.kind {
        VerdictKind::Missing => Judgement::Missing,
        VerdictKind::InvalidQuestion => {
            if normalize_tokens(&record.answer) == ["invalid", "question"] {
                Judgement::Correct
            } else {
                Judgement::Hallucination
            }
        }
        VerdictKind::Answered => {
            let truncated: Vec<&str> = verdict.answer.split_whitespace().take(MAX_ANSWER_TOKENS).collect();
            let answer = normalize_tokens(&truncated.join(" "));
            let hit = std::iter::once(&record.answer)
                .chain(&record.alt_answers)
                .any(|gold| contains_run(&answer, &normalize_tokens(gold)));
            if hit {
                Judgement::Correct
            } else {
                Judgement::Hallucination
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub n: usize,
    pub correct: f64,
    pub missing: f64,
    pub hallucination: f64,
    pub score: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub breakdowns: BTreeMap<String, BTreeMap<String, ScoreReport>>,
}

impl ScoreReport {
    pub fn from_counts(correct: usize, missing: usize, hallucination: usize) -> Result<Self, EvalError> {
        let n = correct + missing + hallucination;
        if n == 0 {
            return Err(EvalError::EmptyInput);
        }
        let f = |c: usize| c as f64 / n as f64;
        Ok(Self {
            n,
            correct: f(correct),
            missing: f(missing),
            hallucination: f(hallucination),
            score: (correct as f64 - hallucination as f64) / n as f64,
            breakdowns: BTreeMap::new(),
        })
    }

    pub fn from_judgements(judgements: &[Judgement]) -> Result<Self, EvalError> {
        let count = |j: Judgement| judgements.iter().filter(|&&x| x == j).count();
        Self::from_counts(count(Judgement::Correct), count(Judgement::Missing), count(Judgement::Hallucination))
    }
}

pub const BREAKDOWN_ATTRIBUTES: [&str; 3] = ["domain", "question_type", "static_or_dynamic"];

fn attribute_label<'a>(record: &'a DatasetRecord, attribute: &str) -> &'a str {
    let label = match attribute {
        "domain" => &record.domain,
        "question_type" => &record.question_type,
        _ => &record.static_or_dynamic,
    };
    if label.trim().is_empty() {
        "unknown"
    } else {
        label.trim()
    }
}

pub fn score(judgements: &[Judgement], records: &[DatasetRecord]) -> Result<ScoreReport, EvalError> {
    if judgements.len() != records.len() {
        return Err(EvalError::LengthMismatch { judgements: judgements.len(), records: records.len() });
    }
    let mut report = ScoreReport::from_judgements(judgements)?;
    for attribute in BREAKDOWN_ATTRIBUTES {
        let mut groups: BTreeMap<String, Vec<Judgement>> = BTreeMap::new();
        for (j, r) in judgements.iter().zip(records) {
            groups.entry(attribute_label(r, attribute).to_string()).or_default().push(*j);
        }
        let table = groups
            .into_iter()
            .map(|(label, js)| Ok((label, ScoreReport::from_judgements(&js)?)))
            .collect::<Result<_, EvalError>>()?;
        report.breakdowns.insert(attribute.to_string(), table);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Markdown,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

/// Three decimals, never "-0.000".
pub fn fmt3(x: f64) -> String {
    let s = format!("{x:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

pub const CSV_HEADER: &str = "attribute,label,n,correct,missing,hallucination,score";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn md_cell(s: &str) -> String {
    s.replace('|', "\\|")
}

pub fn report(sr: &ScoreReport, format: ReportFormat) -> String {
    let row = |r: &ScoreReport| {
        [r.n.to_string(), fmt3(r.correct), fmt3(r.missing), fmt3(r.hallucination), fmt3(r.score)]
    };
    match format {
        ReportFormat::Csv => {
            let mut out = format!("{CSV_HEADER}\noverall,all,{}\n", row(sr).join(","));
            for (attr, table) in &sr.breakdowns {
                for (label, r) in table {
                    out.push_str(&format!("{},{},{}\n", csv_field(attr), csv_field(label), row(r).join(",")));
                }
            }
            out
        }
        ReportFormat::Markdown => {
            let mut out = String::from("## Overall\n\n| metric | value |\n|---|---|\n");
            out.push_str(&format!("| n | {} |\n", sr.n));
            for (name, v) in [
                ("correct", sr.correct),
                ("missing", sr.missing),
                ("hallucination", sr.hallucination),
                ("score", sr.score),
            ] {
                out.push_str(&format!("| {name} | {} |\n", fmt3(v)));
            }
            for (attr, table) in &sr.breakdowns {
                out.push_str(&format!(
                    "\n## By {attr}\n\n| label | n | correct | missing | hallucination | score |\n|---|---|---|---|---|---|\n"
                ));
                for (label, r) in table {
                    out.push_str(&format!("| {} | {} |\n", md_cell(label), row(r).join(" | ")));
                }
            }
            out
        }
    }
}
