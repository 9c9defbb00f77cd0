//! Few-shot classification with self-consistency voting.

use std::collections::BTreeMap;

use regex::Regex;

use super::{Attribute, ClassifyError, FewShotExample};
use crate::provider::{GenerationRequest, Generator};

pub const DEFAULT_ICL_SAMPLES: usize = 5;
pub const FEW_SHOT_NUM: usize = 5;
const ICL_TEMPERATURE: f64 = 0.7;
const ICL_MAX_TOKENS: usize = 16;

fn choices(attribute: Attribute) -> String {
    let quoted: Vec<String> = attribute.labels().iter().map(|l| format!("\"{l}\"")).collect();
    format!("[{}]", quoted.join(", "))
}

pub fn build_icl_prompt(
    query: &str,
    attribute: Attribute,
    examples: &[FewShotExample],
    n_samples: usize,
) -> GenerationRequest {
    let choices = choices(attribute);
    let (task, field, what) = match attribute {
        Attribute::Dynamism => (
            "Your task is to identify whether this question is a static question or a dynamic question. \
             A static question is that the answer is fixed and will not change over time. \
             A dynamic question is that the answer will change over time or needs time information.",
            "Static or Dynamic",
            "the static or dynamic",
        ),
        Attribute::Domain => (
            "Your task is to identify which domain this question belongs to. \
             Questions about stocks, companies and markets are finance; about athletes, teams and games are sports; \
             about artists, bands and songs are music; about films, actors and directors are movie; \
             anything else is open.",
            "Domain",
            "the domain",
        ),
    };
    let mut system = format!(
        "You will be provided with a question. {task} You **MUST** choose from one of the following choices: {choices}. \
         You **MUST** give the question type succinctly, using the fewest words possible.\nHere are some examples:\n"
    );
    for ex in examples.iter().take(FEW_SHOT_NUM) {
        system.push_str(&format!("------\n### Question: {}\n### {field}: {}\n\n", ex.query, ex.label));
    }
    let user = format!(
        "Here is the question: {query}\nRemember your rule: You **MUST** choose from the following choices: {choices}.\nWhat is {what} of this question?"
    );
    GenerationRequest::new(system, user)
        .with_samples(n_samples)
        .with_temperature(ICL_TEMPERATURE)
        .with_max_tokens(ICL_MAX_TOKENS)
}

/// The single closed-set label named in `completion`, matched as a whole
/// word after lowercasing. Zero or several distinct labels give `None`.
pub fn parse_label(completion: &str, attribute: Attribute) -> Option<&'static str> {
    let lower = completion.trim().to_lowercase();
    let found: Vec<&'static str> = attribute
        .labels()
        .iter()
        .copied()
        .filter(|l| {
            let re = Regex::new(&format!(r"(^|[^\p{{Alphabetic}}\p{{Nd}}_]){l}($|[^\p{{Alphabetic}}\p{{Nd}}_])"))
                .expect("label regex");
            re.is_match(&lower)
        })
        .collect();
    match found.as_slice() {
        [one] => Some(one),
        _ => None,
    }
}

/// Majority label among parsable samples; ties go to the attribute's
/// conservative fallback.
pub fn majority_vote(completions: &[String], attribute: Attribute) -> Result<&'static str, ClassifyError> {
    let mut counts: BTreeMap<&'static str, usize> = BTreeMap::new();
    for c in completions {
        if let Some(l) = parse_label(c, attribute) {
            *counts.entry(l).or_default() += 1;
        }
    }
    let best = counts.values().copied().max().ok_or(ClassifyError::NoParsableLabel)?;
    let leaders: Vec<&'static str> = counts.iter().filter(|(_, &n)| n == best).map(|(l, _)| *l).collect();
    if leaders.len() == 1 {
        Ok(leaders[0])
    } else {
        Ok(attribute.fallback())
    }
}

pub fn classify_icl(
    query: &str,
    attribute: Attribute,
    examples: &[FewShotExample],
    provider: &dyn Generator,
    n_samples: usize,
) -> Result<&'static str, ClassifyError> {
    if examples.is_empty() {
        return Err(ClassifyError::NoExamples);
    }
    if n_samples == 0 || n_samples.is_multiple_of(2) {
        return Err(ClassifyError::EvenSampleCount(n_samples));
    }
    let req = build_icl_prompt(query, attribute, examples, n_samples);
    let result = provider.generate(&req)?;
    majority_vote(&result.completions, attribute)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attributes::default_examples;
    use crate::provider::ScriptedGenerator;

    fn scripted(query: &str, attribute: Attribute, samples: &[&str]) -> ScriptedGenerator {
        let mut g = ScriptedGenerator::default();
        let req = build_icl_prompt(query, attribute, &default_examples(attribute), 5);
        g.insert_for(&req, samples.iter().map(|s| s.to_string()).collect());
        g
    }

    #[test]
    fn majority_of_five() {
        let g = scripted("q", Attribute::Dynamism, &["dynamic", "static", "dynamic", "dynamic", "static"]);
        let ex = default_examples(Attribute::Dynamism);
        assert_eq!(classify_icl("q", Attribute::Dynamism, &ex, &g, 5).unwrap(), "dynamic");
    }

    #[test]
    fn unanimous() {
        let g = scripted("q", Attribute::Dynamism, &["static"; 5]);
        let ex = default_examples(Attribute::Dynamism);
        assert_eq!(classify_icl("q", Attribute::Dynamism, &ex, &g, 5).unwrap(), "static");
    }

    #[test]
    fn all_unparsable() {
        let g = scripted("q", Attribute::Dynamism, &["banana"; 5]);
        let ex = default_examples(Attribute::Dynamism);
        assert_eq!(
            classify_icl("q", Attribute::Dynamism, &ex, &g, 5),
            Err(ClassifyError::NoParsableLabel)
        );
    }

    #[test]
    fn label_parsing() {
        assert_eq!(parse_label("  Static ", Attribute::Dynamism), Some("static"));
        assert_eq!(parse_label("The answer: \"dynamic\".", Attribute::Dynamism), Some("dynamic"));
        assert_eq!(parse_label("static or dynamic", Attribute::Dynamism), None);
        assert_eq!(parse_label("statically", Attribute::Dynamism), None);
        assert_eq!(parse_label("Movie", Attribute::Domain), Some("movie"));
        assert_eq!(parse_label("movies", Attribute::Domain), None);
    }

    #[test]
    fn ties_fall_back() {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        assert_eq!(
            majority_vote(&s(&["static", "dynamic", "x", "y", "z"]), Attribute::Dynamism).unwrap(),
            "dynamic"
        );
        assert_eq!(
            majority_vote(&s(&["finance", "sports", "?", "?", "?"]), Attribute::Domain).unwrap(),
            "open"
        );
        assert_eq!(majority_vote(&s(&["music", "music", "open"]), Attribute::Domain).unwrap(), "music");
    }

    #[test]
    fn rejects_even_samples_and_missing_examples() {
        let g = ScriptedGenerator::default();
        let ex = default_examples(Attribute::Dynamism);
        assert_eq!(
            classify_icl("q", Attribute::Dynamism, &ex, &g, 4),
            Err(ClassifyError::EvenSampleCount(4))
        );
        assert_eq!(classify_icl("q", Attribute::Dynamism, &[], &g, 5), Err(ClassifyError::NoExamples));
    }

    #[test]
    fn prompt_has_five_demonstrations() {
        let req = build_icl_prompt("Is it?", Attribute::Dynamism, &default_examples(Attribute::Dynamism), 5);
        assert_eq!(req.system_prompt.matches("### Question:").count(), 5);
        assert!(req.system_prompt.contains("[\"static\", \"dynamic\"]"));
        assert!(req.user_prompt.starts_with("Here is the question: Is it?\n"));
        assert_eq!(req.n_samples, 5);
    }
}
