//! Reference-free answers from the generator's own knowledge, and the
//! `===START=== ... ===END===` output format shared with the reasoning stage.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::provider::{GenerationRequest, Generator};

pub const START_MARKER: &str = "===START===";
pub const END_MARKER: &str = "===END===";
pub const REASONING_MARKER: &str = "## Reasoning:";
pub const ANSWER_MARKER: &str = "## Answer:";
pub const FALSE_PREMISE_MARKER: &str = "## False Premise:";
pub const RULE_MARKER: &str = "------";

pub const DIRECT_SYSTEM_PROMPT: &str = r#"You are provided with a question.
Your task is to answer the question with your reasoning process.
If you can't answer it directly based on your knowledge, respond with 'I don't know'.
If you think the premise of the question is wrong, for example, the question asks information about a person's husband, but you are sure that the person doesn't have one, you should answer with "Invalid question" without any other words.
You **MUST** think if the question has a false premise, then think the final answer.
You **MUST** generate the reasoning process before the answer. You **MUST** generate your output with the following format:

===START===
## Reasoning:
- Does it have a false premise?
<YOUR REASONING>
- What is the final answer?
<YOUR REASONING>
------
## Answer:
<YOUR FINAL ANSWER>
===END===

**IMPORTANT RULES**:
- If you can't answer it directly based on your knowledge, respond with 'I don't know'.
- Your generation **MUST** starts with "===START===" and ends with "===END===".
- `<YOUR FINAL ANSWER>` should be succinct, and use as few words as possible.
- `<YOUR REASONING>` should be a detailed reasoning process that explains how you arrived at your answer.
- If you think the premise of the question is wrong, for example, the question asks information about a person's husband, but you are sure that the person doesn't have one, you should answer with "Invalid question" without any other words.
Let's think step by step now!"#;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("no \"## Answer:\" section")]
    NoAnswerSection,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredOutput {
    pub reasoning: String,
    pub answer: String,
    pub false_premise: Option<bool>,
    /// The START/END envelope was missing or incomplete.
    pub degraded: bool,
}

fn marker_line(line: &str, marker: &str) -> Option<String> {
    line.trim().strip_prefix(marker).map(|rest| rest.to_string())
}

fn is_rule(line: &str) -> bool {
    line.trim().starts_with(RULE_MARKER)
}

fn is_section(line: &str) -> bool {
    [REASONING_MARKER, ANSWER_MARKER, FALSE_PREMISE_MARKER]
        .iter()
        .any(|m| line.trim().starts_with(m))
}

/// Text of the section opened at `lines[start]` by `marker`, up to the next
/// line for which `stop` holds.
fn section(lines: &[&str], start: usize, marker: &str, stop: impl Fn(&str) -> bool) -> String {
    let mut parts = vec![marker_line(lines[start], marker).unwrap_or_default()];
    for line in &lines[start + 1..] {
        if stop(line) {
            break;
        }
        parts.push(line.to_string());
    }
    parts.join("\n").trim().to_string()
}

pub fn parse_structured(completion: &str) -> Result<StructuredOutput, ParseError> {
    let all: Vec<&str> = completion.lines().collect();
    let start = all.iter().position(|l| l.trim().starts_with(START_MARKER));
    let (lines, degraded) = match start {
        Some(s) => {
            let body = &all[s + 1..];
            match body.iter().position(|l| l.trim().starts_with(END_MARKER)) {
                Some(e) => (&body[..e], false),
                None => (body, true),
            }
        }
        None => {
            let end = all.iter().position(|l| l.trim().starts_with(END_MARKER)).unwrap_or(all.len());
            (&all[..end], true)
        }
    };

    let answer_at = lines
        .iter()
        .position(|l| l.trim().starts_with(ANSWER_MARKER))
        .ok_or(ParseError::NoAnswerSection)?;
    let answer = section(lines, answer_at, ANSWER_MARKER, |l| l.trim().starts_with(FALSE_PREMISE_MARKER));

    let reasoning = lines[..answer_at]
        .iter()
        .position(|l| l.trim().starts_with(REASONING_MARKER))
        .map(|r| section(lines, r, REASONING_MARKER, |l| is_rule(l) || is_section(l)))
        .unwrap_or_default();

    let false_premise = lines[answer_at..]
        .iter()
        .position(|l| l.trim().starts_with(FALSE_PREMISE_MARKER))
        .and_then(|fp| {
            let text = section(lines, answer_at + fp, FALSE_PREMISE_MARKER, is_section);
            let token = text
                .split_whitespace()
                .next()?
                .trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase();
            match token.as_str() {
                "yes" => Some(true),
                "no" => Some(false),
                _ => None,
            }
        });

    Ok(StructuredOutput { reasoning, answer, false_premise, degraded })
}

/// Renders the output envelope; the inverse of [`parse_structured`] for
/// trimmed section contents that contain no marker lines.
pub fn render_structured(reasoning: &str, answer: &str, false_premise: Option<bool>) -> String {
    let mut s = format!("{START_MARKER}\n{REASONING_MARKER}\n{reasoning}\n{RULE_MARKER}\n{ANSWER_MARKER}\n{answer}\n");
    if let Some(fp) = false_premise {
        s.push_str(&format!("{FALSE_PREMISE_MARKER}\n{}\n", if fp { "yes" } else { "no" }));
    }
    s.push_str(END_MARKER);
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectAnswer {
    pub reasoning: String,
    pub answer: String,
    pub parse_ok: bool,
    /// Recorded for the trace only; routing never uses it.
    pub false_premise: Option<bool>,
}

pub fn build_direct_prompt(query: &str) -> GenerationRequest {
    GenerationRequest::new(DIRECT_SYSTEM_PROMPT, query).with_max_tokens(512)
}

/// Never fails: provider or format problems give `parse_ok = false`, with the
/// raw completion (if any) kept in `reasoning`.
pub fn extract_knowledge(query: &str, provider: &dyn Generator) -> DirectAnswer {
    let failed = |raw: String| DirectAnswer {
        reasoning: raw,
        answer: String::new(),
        parse_ok: false,
        false_premise: None,
    };
    let completion = match provider.generate(&build_direct_prompt(query)) {
        Ok(r) => r.completions.into_iter().next().unwrap_or_default(),
        Err(e) => {
            log::warn!("direct answer generation failed: {e}");
            return failed(String::new());
        }
    };
    match parse_structured(&completion) {
        Ok(p) if !p.answer.is_empty() => DirectAnswer {
            reasoning: p.reasoning,
            answer: p.answer,
            parse_ok: true,
            false_premise: p.false_premise,
        },
        _ => failed(completion),
    }
}
