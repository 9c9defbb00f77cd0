//! Web page processing: HTML in, text chunks and Markdown tables out.

mod chunks;
pub mod html;
mod sentences;
mod tables;

pub use chunks::{build_chunks, ChunkConfig, ChunkKind, TextChunk};
pub use html::{clean_html, Document};
pub use sentences::{split_sentences, ABBREVIATIONS};
pub use tables::{extract_tables, is_empty_table, MarkdownTable};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WebPage {
    pub page_name: String,
    pub url: String,
    pub html: String,
}

impl WebPage {
    /// Builds a page from raw bytes, replacing invalid UTF-8.
    pub fn from_bytes(page_name: &str, url: &str, bytes: &[u8]) -> Self {
        Self {
            page_name: page_name.to_string(),
            url: url.to_string(),
            html: String::from_utf8_lossy(bytes).into_owned(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageContent {
    pub chunks: Vec<TextChunk>,
    pub tables: Vec<MarkdownTable>,
}

/// Main text of a cleaned page. Navigation regions are skipped first; if that
/// leaves nothing, the whole visible tree is used instead.
pub fn main_text(doc: &Document) -> String {
    let text = doc.visible_text(true);
    if text.trim().is_empty() {
        doc.visible_text(false)
    } else {
        text
    }
}

pub fn process_page(page: &WebPage, cfg: &ChunkConfig) -> PageContent {
    if page.html.trim().is_empty() {
        return PageContent::default();
    }
    let doc = clean_html(&page.html, true);
    let tables = extract_tables(&doc, &page.page_name);
    let sentences = split_sentences(&main_text(&doc));
    let chunks = build_chunks(&sentences, &page.page_name, cfg);
    PageContent { chunks, tables }
}

/// Processes pages in parallel and concatenates results in page order.
pub fn process_pages(pages: &[WebPage], cfg: &ChunkConfig) -> PageContent {
    use rayon::prelude::*;
    let parts: Vec<PageContent> = pages.par_iter().map(|p| process_page(p, cfg)).collect();
    let mut all = PageContent::default();
    for p in parts {
        all.chunks.extend(p.chunks);
        all.tables.extend(p.tables);
    }
    all
}
