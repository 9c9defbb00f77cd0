use serde::{Deserialize, Serialize};

use super::html::{Document, Element, Node};

/// A `<table>` rendered as pipe-delimited Markdown, prefixed with its page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkdownTable {
    pub markdown: String,
    pub source_page: String,
}

/// True when nothing but pipes, dashes and whitespace remain.
pub fn is_empty_table(markdown: &str) -> bool {
    !markdown.chars().any(|c| !matches!(c, '|' | '-') && !is_py_whitespace(c))
}

/// Python's `str.isspace` set, which adds the ASCII information separators
/// to Unicode White_Space.
fn is_py_whitespace(c: char) -> bool {
    c.is_whitespace() || ('\u{1c}'..='\u{1f}').contains(&c)
}

/// Cell text: each descendant text node stripped, empties skipped, then
/// concatenated without a separator.
fn cell_text(cell: &Element) -> String {
    fn walk(e: &Element, out: &mut String) {
        for c in &e.children {
            match c {
                Node::Text(t) => out.push_str(t.trim()),
                Node::Element(child) => walk(child, out),
            }
        }
    }
    let mut out = String::new();
    walk(cell, &mut out);
    out
}

fn render_rows(table: &Element) -> Vec<String> {
    let mut rows = Vec::new();
    for row in table.find_all("tr") {
        let cells: Vec<String> = row.find_any(&["th", "td"]).into_iter().map(cell_text).collect();
        rows.push(format!("| {} |", cells.join(" | ")));
    }
    if let Some(first) = rows.first() {
        let parts: Vec<&str> = first.split('|').collect();
        let n = parts.len().saturating_sub(2);
        let sep = format!("| {} |", vec!["---"; n].join(" | "));
        rows.insert(1, sep);
    }
    rows
}

/// One Markdown table per `<table>` element (nested tables included), in
/// document order, dropping tables that fail [`is_empty_table`].
pub fn extract_tables(doc: &Document, page_name: &str) -> Vec<MarkdownTable> {
    doc.root
        .find_all("table")
        .into_iter()
        .filter_map(|table| {
            let body = render_rows(table).join("\n");
            if is_empty_table(&body) {
                return None;
            }
            Some(MarkdownTable {
                markdown: format!("Page name: {page_name}\n{body}"),
                source_page: page_name.to_string(),
            })
        })
        .collect()
}
