use serde::{Deserialize, Serialize};

use crate::calculator::{render_references, render_tables, CalcResult};
use crate::ingest::MarkdownTable;
use crate::kg::KGFact;
use crate::knowledge::DirectAnswer;
use crate::provider::GenerationRequest;
use crate::retrieval::ScoredChunk;

pub const DEFAULT_KG_CHAR_CAP: usize = 1000;
pub const DEFAULT_REASONING_TABLE_BUDGET: usize = 4000;
pub const REASONING_MAX_TOKENS: usize = 1024;

pub const REASONING_SYSTEM_PROMPT: &str = r#"You are provided with a question and various references.
Your task is to answer the question with your reasoning process.
There are also some calculation results from another agent, which may be useful for you.
There is an answer from another agent which may be useful. It may have hallucination. You need to judge whether to trust it by yourself.
If the references do not contain the necessary information to answer the question and you can't answer it directly based on your knowledge, respond with 'I don't know'.
If you think the premise of the question is wrong, for example, the question asks information about a person's husband, but you are sure that the person doesn't have one, you should answer with "Invalid question" without any other words.
You **MUST** think if the question has a false premise, then think the final answer.
You **MUST** generate the reasoning process before the answer. You **MUST** generate your output with the following format:

===START===
## Reasoning:
- Does it have a false premise?
<YOUR REASONING>
- What is the final answer?
<YOUR REASONING>
- Can you answer it based on current knowledge?
<YOUR REASONING>
------
## Answer:
<YOUR FINAL ANSWER>
## False Premise:
<HAS_FALSE_PREMISE_OR_NOT>
===END===

**IMPORTANT RULES**:
- If the references do not contain the necessary information to answer the question and you can't answer it directly based on your knowledge, respond with 'I don't know'.
- Your generation **MUST** starts with "===START===" and ends with "===END===".
- `<YOUR FINAL ANSWER>` should be succinct, and use as few words as possible.
- `<YOUR REASONING>` should be a detailed reasoning process that explains how you arrived at your answer.
- `<HAS_FALSE_PREMISE_OR_NOT>` should be "yes" if the premise is wrong and the question is invalid, and "no" otherwise. It can **ONLY** be chosen from these two options.
- If you think the premise of the question is wrong, for example, the question asks information about a person's husband, but you are sure that the person doesn't have one, you should answer with "Invalid question" without any other words.
Let's think step by step now!"#;

const USER_RULES: &str = r#"**Remember your IMPORTANT RULES**:
- If the references do not contain the necessary information to answer the question and you can't answer it directly based on your knowledge, respond with 'I don't know'.
- Your generation **MUST** starts with "===START===" and ends with "===END===".
- `<YOUR FINAL ANSWER>` should be succinct, and use as few words as possible.
- `<YOUR REASONING>` should be a detailed reasoning process that explains how you arrived at your answer.
- `<HAS_FALSE_PREMISE_OR_NOT>` should be "yes" if the question is invalid, and "no" otherwise. It can **ONLY** be chosen from these two options.
- If you think the premise of the question is wrong, for example, the question asks information about a person's husband, but you are sure that the person doesn't have one, you should answer with "Invalid question" without any other words.
"#;

pub const SUMMARY_SYSTEM_PROMPT: &str = "You are provided with a question and a reasoning process from another agent. Your task is to summarize the reasoning process and finally answer the question succinctly, using the fewest words possible.";

/// Everything the reasoning prompt is assembled from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceBundle {
    pub query: String,
    pub query_time: String,
    pub chunks: Vec<ScoredChunk>,
    pub kg_facts: Vec<KGFact>,
    pub tables: Vec<MarkdownTable>,
    pub calc_results: Vec<CalcResult>,
    pub direct_answer: Option<DirectAnswer>,
    pub table_budget: usize,
    pub kg_char_cap: usize,
}

impl ReferenceBundle {
    pub fn new(query: impl Into<String>, query_time: impl Into<String>) -> Self {
        Self {
            query: query.into(),
            query_time: query_time.into(),
            chunks: Vec::new(),
            kg_facts: Vec::new(),
            tables: Vec::new(),
            calc_results: Vec::new(),
            direct_answer: None,
            table_budget: DEFAULT_REASONING_TABLE_BUDGET,
            kg_char_cap: DEFAULT_KG_CHAR_CAP,
        }
    }
}

pub(crate) fn render_kg(facts: &[KGFact], cap: usize) -> String {
    let mut s = String::new();
    for (i, f) in facts.iter().enumerate() {
        s.push_str(&format!("### KG Ref {}: \n{}\n", i + 1, f.text));
    }
    s.chars().take(cap).collect()
}

pub fn build_reasoning_prompt(bundle: &ReferenceBundle) -> GenerationRequest {
    let mut user = String::new();
    // The references separator is emitted even when there are no references.
    user.push_str(&render_references(&bundle.chunks));
    user.push_str("\n------\n\n");
    if !bundle.kg_facts.is_empty() {
        user.push_str("## Knowledge Graph references \n");
        user.push_str(&render_kg(&bundle.kg_facts, bundle.kg_char_cap));
        user.push_str("\n------\n\n");
    }
    if !bundle.tables.is_empty() {
        user.push_str("## Table references \n");
        user.push_str(&render_tables(&bundle.tables, bundle.table_budget));
        user.push_str("\n------\n\n");
    }
    if !bundle.calc_results.is_empty() {
        user.push_str("## Possible useful calculation results \n");
        for (i, c) in bundle.calc_results.iter().enumerate() {
            user.push_str(&format!("### Calculation {}: \n{} = {}\n", i + 1, c.source, c.value));
        }
        user.push_str("\n------\n\n");
    }
    if let Some(d) = bundle.direct_answer.as_ref().filter(|d| d.parse_ok) {
        user.push_str(&format!("# An answer from another agent:\n{}\n------\n\n", d.answer));
    }
    user.push_str(USER_RULES);
    user.push_str("Using the references listed above, answer the following question: \n");
    user.push_str(&format!("Current Time: {}\n", bundle.query_time));
    user.push_str(&format!("Question: {}\n", bundle.query));
    user.push_str("Let's think step by step now!\n");
    GenerationRequest::new(REASONING_SYSTEM_PROMPT, user).with_max_tokens(REASONING_MAX_TOKENS)
}

pub fn build_summary_prompt(query: &str, reasoning_text: &str) -> GenerationRequest {
    let mut user = format!("Question: {query}\n");
    user.push_str(&format!("# Useful Reasoning Process: \n{reasoning_text}\n-----\n\n"));
    user.push_str("Using the reasoning process above, answer the question.");
    GenerationRequest::new(SUMMARY_SYSTEM_PROMPT, user).with_max_tokens(128)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::FunctionCall;

    #[test]
    fn empty_bundle() {
        let req = build_reasoning_prompt(&ReferenceBundle::new("q?", "03/05/2024, 23:17:59 PT"));
        assert!(req.user_prompt.starts_with("\n------\n\n**Remember your IMPORTANT RULES**:\n"));
        assert!(req.user_prompt.ends_with(
            "answer the following question: \nCurrent Time: 03/05/2024, 23:17:59 PT\nQuestion: q?\nLet's think step by step now!\n"
        ));
        for section in ["# References", "## Knowledge Graph", "## Table", "## Possible", "another agent"] {
            assert!(!req.user_prompt.contains(section), "{section}");
        }
    }

    #[test]
    fn calculation_blocks() {
        let mut b = ReferenceBundle::new("q", "t");
        b.calc_results = vec![
            CalcResult { source: "1+1".into(), value: "2".into() },
            CalcResult { source: "3.9 > 3.11".into(), value: "True".into() },
        ];
        let u = build_reasoning_prompt(&b).user_prompt;
        assert!(u.contains("## Possible useful calculation results \n### Calculation 1: \n1+1 = 2\n### Calculation 2: \n3.9 > 3.11 = True\n\n------\n\n"));
    }

    #[test]
    fn kg_section_capped() {
        let mut b = ReferenceBundle::new("q", "t");
        b.kg_facts = vec![KGFact { text: "x".repeat(5000), source_call: FunctionCall::new("f", &[]) }];
        let u = build_reasoning_prompt(&b).user_prompt;
        let start = u.find("## Knowledge Graph references \n").unwrap() + "## Knowledge Graph references \n".len();
        let end = u[start..].find("\n------\n\n").unwrap();
        assert_eq!(u[start..start + end].chars().count(), 1000);
    }

    #[test]
    fn direct_answer_only_when_parsed() {
        let mut b = ReferenceBundle::new("q", "t");
        b.direct_answer = Some(DirectAnswer { reasoning: "r".into(), answer: "".into(), parse_ok: false, false_premise: None });
        assert!(!build_reasoning_prompt(&b).user_prompt.contains("another agent"));
        b.direct_answer = Some(DirectAnswer { reasoning: "r".into(), answer: "Paris".into(), parse_ok: true, false_premise: None });
        assert!(build_reasoning_prompt(&b).user_prompt.contains("# An answer from another agent:\nParis\n------\n\n**Remember"));
    }

    #[test]
    fn summary_prompt_embeds_reasoning() {
        let req = build_summary_prompt("q?", "step one\nstep two");
        assert_eq!(
            req.user_prompt,
            "Question: q?\n# Useful Reasoning Process: \nstep one\nstep two\n-----\n\nUsing the reasoning process above, answer the question."
        );
        assert_eq!(req.n_samples, 1);
    }
}
