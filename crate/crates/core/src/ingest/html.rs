//! HTML cleaning into a small owned tree.
//!
//! Parsing is delegated to html5ever (via `scraper`), which repairs malformed
//! markup the way browsers do. The cleaned tree drops elements that never
//! carry reference text and is cheap to walk repeatedly.

use scraper::Html;

const DROPPED: &[&str] = &["script", "style", "meta", "footer", "button"];
const INVISIBLE: &[&str] = &["head", "title", "noscript", "template", "iframe", "svg", "link"];
const BOILERPLATE: &[&str] = &["nav", "aside", "form"];
const BLOCK: &[&str] = &[
    "p", "div", "li", "h1", "h2", "h3", "h4", "h5", "h6", "br", "section", "article", "main",
    "header", "ul", "ol", "blockquote", "pre", "tr", "dt", "dd", "figcaption", "hr",
];

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Element(Element),
    Text(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub name: String,
    pub children: Vec<Node>,
}

impl Element {
    fn new(name: &str) -> Self {
        Self { name: name.to_string(), children: Vec::new() }
    }

    /// Concatenation of all descendant text, like BeautifulSoup's `get_text()`.
    pub fn text(&self) -> String {
        let mut out = String::new();
        collect_text(self, &mut out);
        out
    }

    /// Every descendant element named `name`, in document order. Nested
    /// matches are returned as well.
    pub fn find_all<'a>(&'a self, name: &str) -> Vec<&'a Element> {
        let mut out = Vec::new();
        find_into(self, &|e| e.name == name, &mut out);
        out
    }

    pub fn find_any<'a>(&'a self, names: &[&str]) -> Vec<&'a Element> {
        let mut out = Vec::new();
        find_into(self, &|e| names.contains(&e.name.as_str()), &mut out);
        out
    }
}

fn collect_text(e: &Element, out: &mut String) {
    for c in &e.children {
        match c {
            Node::Text(t) => out.push_str(t),
            Node::Element(child) => collect_text(child, out),
        }
    }
}

fn find_into<'a>(e: &'a Element, pred: &dyn Fn(&Element) -> bool, out: &mut Vec<&'a Element>) {
    for c in &e.children {
        if let Node::Element(child) = c {
            if pred(child) {
                out.push(child);
            }
            find_into(child, pred, out);
        }
    }
}

/// A cleaned HTML document.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub root: Element,
}

impl Document {
    pub fn text(&self) -> String {
        self.root.text()
    }

    /// Reader-visible text with tables removed and block elements on their
    /// own lines. `skip_boilerplate` also drops navigation-like regions.
    pub fn visible_text(&self, skip_boilerplate: bool) -> String {
        let mut out = String::new();
        visible_into(&self.root, skip_boilerplate, &mut out);
        out
    }
}

fn visible_into(e: &Element, skip_boilerplate: bool, out: &mut String) {
    for c in &e.children {
        match c {
            Node::Text(t) => out.push_str(t),
            Node::Element(child) => {
                let name = child.name.as_str();
                if name == "table" || INVISIBLE.contains(&name) {
                    continue;
                }
                if skip_boilerplate && BOILERPLATE.contains(&name) {
                    continue;
                }
                let block = BLOCK.contains(&name);
                if block {
                    out.push('\n');
                }
                visible_into(child, skip_boilerplate, out);
                if block {
                    out.push('\n');
                } else if matches!(name, "td" | "th") {
                    out.push(' ');
                }
            }
        }
    }
}

/// Parses and cleans `html`: drops script/style/meta/footer/button subtrees
/// and comments, optionally unwraps anchors, and decodes literal `\uXXXX` /
/// `\UXXXXXXXX` escapes left in text nodes.
pub fn clean_html(html: &str, remove_links: bool) -> Document {
    let parsed = Html::parse_document(html);
    let mut root = Element::new("#document");
    for child in parsed.tree.root().children() {
        convert(child, remove_links, &mut root.children);
    }
    Document { root }
}

fn convert(node: ego_tree::NodeRef<'_, scraper::Node>, remove_links: bool, out: &mut Vec<Node>) {
    match node.value() {
        scraper::Node::Text(t) => {
            let text: &str = t;
            let text = if text.contains("\\u") || text.contains("\\U") {
                decode_unicode_escapes(text)
            } else {
                text.to_string()
            };
            match out.last_mut() {
                Some(Node::Text(prev)) => prev.push_str(&text),
                _ => out.push(Node::Text(text)),
            }
        }
        scraper::Node::Element(el) => {
            let name = el.name();
            if DROPPED.contains(&name) {
                return;
            }
            if remove_links && name == "a" {
                for child in node.children() {
                    convert(child, remove_links, out);
                }
                return;
            }
            let mut e = Element::new(name);
            for child in node.children() {
                convert(child, remove_links, &mut e.children);
            }
            out.push(Node::Element(e));
        }
        scraper::Node::Document | scraper::Node::Fragment => {
            for child in node.children() {
                convert(child, remove_links, out);
            }
        }
        _ => {}
    }
}

/// Decodes `\uXXXX` (including surrogate pairs) and `\UXXXXXXXX` escapes.
/// Malformed or unpaired escapes are left as written.
pub fn decode_unicode_escapes(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len());
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == '\\' && i + 1 < chars.len() {
            let width = match chars[i + 1] {
                'u' => 4,
                'U' => 8,
                _ => 0,
            };
            if width > 0 {
                if let Some(cp) = hex_at(&chars, i + 2, width) {
                    if (0xD800..0xDC00).contains(&cp) && width == 4 {
                        // high surrogate; needs a following \uDC00..\uDFFF
                        if i + 12 <= chars.len() && chars[i + 6] == '\\' && chars[i + 7] == 'u' {
                            if let Some(lo) = hex_at(&chars, i + 8, 4) {
                                if (0xDC00..0xE000).contains(&lo) {
                                    let c = 0x10000 + ((cp - 0xD800) << 10) + (lo - 0xDC00);
                                    if let Some(ch) = char::from_u32(c) {
                                        out.push(ch);
                                        i += 12;
                                        continue;
                                    }
                                }
                            }
                        }
                    } else if let Some(ch) = char::from_u32(cp) {
                        out.push(ch);
                        i += 2 + width;
                        continue;
                    }
                }
            }
        }
        out.push(chars[i]);
        i += 1;
    }
    out
}

fn hex_at(chars: &[char], start: usize, width: usize) -> Option<u32> {
    if start + width > chars.len() {
        return None;
    }
    let s: String = chars[start..start + width].iter().collect();
    if !s.chars().all(|c| c.is_ascii_hexdigit()) {
        return None;
    }
    u32::from_str_radix(&s, 16).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(s: &str) -> String {
        s.split_whitespace().collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn removes_script() {
        let d = clean_html("<p>hi<script>x()</script></p>", false);
        assert_eq!(norm(&d.text()), "hi");
    }

    #[test]
    fn removes_footer_button_style_meta() {
        let d = clean_html(
            "<html><head><meta name=x content=y><style>p{}</style></head><body>\
             <footer>nav</footer><p>body</p><button>Click</button></body></html>",
            false,
        );
        assert_eq!(norm(&d.text()), "body");
    }

    #[test]
    fn decodes_unicode_escapes_in_text() {
        let d = clean_html("<p>caf\\u00e9</p>", false);
        assert_eq!(norm(&d.text()), "café");
        assert_eq!(decode_unicode_escapes("\\U0001F600!"), "😀!");
        assert_eq!(decode_unicode_escapes("\\ud83d\\ude00"), "😀");
        assert_eq!(decode_unicode_escapes("\\uZZZZ"), "\\uZZZZ");
        assert_eq!(decode_unicode_escapes("a\\u00"), "a\\u00");
    }

    #[test]
    fn unwraps_links_only_when_asked() {
        let html = "<p>see <a href='x'>here</a> now</p>";
        let kept = clean_html(html, false);
        assert_eq!(kept.root.find_all("a").len(), 1);
        let unwrapped = clean_html(html, true);
        assert!(unwrapped.root.find_all("a").is_empty());
        assert_eq!(norm(&unwrapped.text()), "see here now");
    }

    #[test]
    fn visible_text_skips_tables_and_breaks_blocks() {
        let d = clean_html(
            "<body><h1>Title</h1><p>One.</p><table><tr><td>cell</td></tr></table><div>Two.</div></body>",
            false,
        );
        let text = d.visible_text(true);
        assert!(!text.contains("cell"));
        let lines: Vec<_> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        assert_eq!(lines, vec!["Title", "One.", "Two."]);
    }

    #[test]
    fn malformed_html_is_repaired() {
        let d = clean_html("<div><p>open <b>bold</div> tail", false);
        assert_eq!(norm(&d.text()), "open bold tail");
    }
}
