//! Question attributes: domain and static/dynamic, plus the question
//! detector used by the chunker.

mod icl;
mod linear;
mod question;

pub use icl::{
    build_icl_prompt, classify_icl, majority_vote, parse_label, DEFAULT_ICL_SAMPLES, FEW_SHOT_NUM,
};
pub use linear::{train_linear, LinearClassifier, TrainOptions, MIN_EXAMPLES_PER_CLASS};
pub use question::{is_question, START_WORDS};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::provider::ProviderError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("no sample contained exactly one valid label")]
    NoParsableLabel,
    #[error("no few-shot examples supplied")]
    NoExamples,
    #[error("sample count must be odd and positive, got {0}")]
    EvenSampleCount(usize),
    #[error("insufficient training data: {0}")]
    InsufficientData(String),
    #[error("model trained on {trained} but queried with {given}")]
    EmbedderMismatch { trained: String, given: String },
    #[error("bad model file: {0}")]
    BadModel(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attribute {
    Domain,
    Dynamism,
}

impl Attribute {
    pub fn labels(self) -> &'static [&'static str] {
        match self {
            Attribute::Domain => &["finance", "sports", "music", "movie", "open"],
            Attribute::Dynamism => &["static", "dynamic"],
        }
    }

    /// The label used when voting is inconclusive. Both choices can only turn
    /// a would-be answer into an abstention.
    pub fn fallback(self) -> &'static str {
        match self {
            Attribute::Domain => "open",
            Attribute::Dynamism => "dynamic",
        }
    }
}

impl std::str::FromStr for Attribute {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "domain" => Ok(Attribute::Domain),
            "dynamism" | "static_or_dynamic" => Ok(Attribute::Dynamism),
            other => Err(format!("unknown attribute {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Finance,
    Sports,
    Music,
    Movie,
    Open,
}

impl Domain {
    pub fn from_label(label: &str) -> Option<Self> {
        Some(match label {
            "finance" => Domain::Finance,
            "sports" => Domain::Sports,
            "music" => Domain::Music,
            "movie" => Domain::Movie,
            "open" => Domain::Open,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Finance => "finance",
            Domain::Sports => "sports",
            Domain::Music => "music",
            Domain::Movie => "movie",
            Domain::Open => "open",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dynamism {
    Static,
    Dynamic,
}

impl Dynamism {
    pub fn from_label(label: &str) -> Option<Self> {
        match label {
            "static" => Some(Dynamism::Static),
            "dynamic" => Some(Dynamism::Dynamic),
            _ => None,
        }
    }

    /// Maps the benchmark's four-way timeliness labels onto two classes.
    pub fn from_gold(label: &str) -> Option<Self> {
        match label.trim().to_lowercase().replace('_', "-").as_str() {
            "static" | "stable" | "slow-changing" => Some(Dynamism::Static),
            "dynamic" | "fast-changing" | "real-time" => Some(Dynamism::Dynamic),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Dynamism::Static => "static",
            Dynamism::Dynamic => "dynamic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Icl,
    Linear,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionAttributes {
    pub domain: Domain,
    pub dynamism: Dynamism,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub query: String,
    pub label: String,
}

/// Bundled demonstrations, five per attribute.
pub fn default_examples(attribute: Attribute) -> Vec<FewShotExample> {
    let pairs: &[(&str, &str)] = match attribute {
        Attribute::Dynamism => &[
            ("what is the current stock price of nvidia?", "dynamic"),
            ("who directed the movie inception?", "static"),
            ("how many points did lebron james score last night?", "dynamic"),
            ("in which year was the eiffel tower completed?", "static"),
            ("which team is leading the premier league table right now?", "dynamic"),
        ],
        Attribute::Domain => &[
            ("what is the market cap of apple?", "finance"),
            ("which team won the nba finals in 2016?", "sports"),
            ("who is the lead singer of coldplay?", "music"),
            ("who played the joker in the dark knight?", "movie"),
            ("what is the tallest mountain in africa?", "open"),
        ],
    };
    pairs
        .iter()
        .map(|(q, l)| FewShotExample { query: q.to_string(), label: l.to_string() })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_examples_use_closed_labels() {
        for attr in [Attribute::Domain, Attribute::Dynamism] {
            let ex = default_examples(attr);
            assert_eq!(ex.len(), FEW_SHOT_NUM);
            assert!(ex.iter().all(|e| attr.labels().contains(&e.label.as_str())));
        }
    }

    #[test]
    fn gold_dynamism_collapse() {
        assert_eq!(Dynamism::from_gold("slow-changing"), Some(Dynamism::Static));
        assert_eq!(Dynamism::from_gold("real-time"), Some(Dynamism::Dynamic));
        assert_eq!(Dynamism::from_gold("Fast_Changing"), Some(Dynamism::Dynamic));
        assert_eq!(Dynamism::from_gold("??"), None);
    }
}
