use std::collections::{BTreeMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::EvalError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    #[serde(default)]
    pub page_name: String,
    #[serde(default)]
    pub page_url: String,
    #[serde(default)]
    pub page_snippet: String,
    #[serde(default)]
    pub page_html: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub interaction_id: String,
    pub query: String,
    #[serde(default)]
    pub query_time: String,
    #[serde(default)]
    pub search_results: Vec<SearchResult>,
    #[serde(default)]
    pub answer: String,
    #[serde(default)]
    pub alt_answers: Vec<String>,
    #[serde(default)]
    pub domain: String,
    #[serde(default)]
    pub question_type: String,
    #[serde(default)]
    pub static_or_dynamic: String,
    /// Fields not listed above, kept verbatim.
    #[serde(flatten)]
    pub extras: BTreeMap<String, Value>,
}

impl DatasetRecord {
    pub fn new(interaction_id: &str, query: &str) -> Self {
        Self {
            interaction_id: interaction_id.into(),
            query: query.into(),
            query_time: String::new(),
            search_results: Vec::new(),
            answer: String::new(),
            alt_answers: Vec::new(),
            domain: String::new(),
            question_type: String::new(),
            static_or_dynamic: String::new(),
            extras: BTreeMap::new(),
        }
    }
}

/// Parses JSONL records; blank lines are skipped and line numbers are 1-based.
pub fn parse_dataset(reader: impl BufRead) -> Result<Vec<DatasetRecord>, EvalError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| EvalError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DatasetRecord = serde_json::from_str(&line)
            .map_err(|e| EvalError::MalformedRecord { line: line_no, message: e.to_string() })?;
        if record.query.trim().is_empty() {
            return Err(EvalError::MalformedRecord { line: line_no, message: "empty query".into() });
        }
        if !seen.insert(record.interaction_id.clone()) {
            return Err(EvalError::MalformedRecord {
                line: line_no,
                message: format!("duplicate interaction_id {:?}", record.interaction_id),
            });
        }
        let pages = record.search_results.len();
        if pages != 5 && pages != 50 {
            log::warn!("line {line_no}: {pages} search results, expected 5 or 50");
        }
        out.push(record);
    }
    Ok(out)
}

pub fn load_dataset(path: &Path) -> Result<Vec<DatasetRecord>, EvalError> {
    let file = std::fs::File::open(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
    parse_dataset(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(id: &str, extra: &str) -> String {
        format!(r#"{{"interaction_id": "{id}", "query": "q {id}", "answer": "a"{extra}}}"#)
    }

    #[test]
    fn three_lines() {
        let text = [line("1", ""), line("2", ""), String::new(), line("3", "")].join("\n");
        assert_eq!(parse_dataset(text.as_bytes()).unwrap().len(), 3);
    }

    #[test]
    fn missing_query_reports_line() {
        let text = format!("{}\n{{\"interaction_id\": \"2\"}}\n", line("1", ""));
        match parse_dataset(text.as_bytes()) {
            Err(EvalError::MalformedRecord { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let text = format!("{}\n{}", line("1", ""), line("1", ""));
        assert!(matches!(parse_dataset(text.as_bytes()), Err(EvalError::MalformedRecord { line: 2, .. })));
    }

    #[test]
    fn extras_preserved() {
        let r = &parse_dataset(line("1", r#", "split": 0, "note": "x""#).as_bytes()).unwrap()[0];
        assert_eq!(r.extras.get("split"), Some(&Value::from(0)));
        let round: DatasetRecord = serde_json::from_str(&serde_json::to_string(r).unwrap()).unwrap();
        assert_eq!(&round, r);
    }

    #[test]
    fn five_pages() {
        let pages = r#", "search_results": [{}, {}, {}, {}, {"page_name": "p", "page_html": "<p>x</p>"}]"#;
        let r = &parse_dataset(line("1", pages).as_bytes()).unwrap()[0];
        assert_eq!(r.search_results.len(), 5);
        assert_eq!(r.search_results[4].page_name, "p");
    }
}
