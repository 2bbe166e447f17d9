//! HTML decoding, forgiving parsing and leaf text block extraction.
//!
//! Parsing is delegated to html5ever (through `scraper`), which implements
//! the browser tree-construction algorithm including its error recovery.
//! A page is then flattened into its leaf text nodes in document order.

use std::collections::BTreeMap;

use ego_tree::NodeId;
use encoding_rs::{Encoding, UTF_8};
use scraper::{Html, Node};

use crate::{Error, Result};

/// Elements whose subtree never yields text blocks.
pub const EXCLUDED_TAGS: [&str; 4] = ["script", "style", "noscript", "template"];

/// Gold labels.
pub const BOILERPLATE: u8 = 0;
pub const CONTENT: u8 = 1;

/// One leaf text node of a page.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TextBlock {
    pub text: String,
    pub tokens: Vec<String>,
    /// Occurrences of each element tag on the root-to-leaf path.
    pub tag_counts: BTreeMap<String, u32>,
    pub position: usize,
    pub label: Option<u8>,
}

impl TextBlock {
    /// Number of elements on the path from the root to this leaf.
    pub fn depth(&self) -> u32 {
        self.tag_counts.values().sum()
    }
}

/// Lowercased maximal runs of alphanumeric codepoints.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Decode raw page bytes to text.
///
/// A byte-order mark wins, then a `<meta>` charset declaration in the first
/// 1024 bytes, then UTF-8. Malformed sequences become U+FFFD; the document is
/// rejected only when more than half of the decoded characters are
/// replacements.
pub fn decode(bytes: &[u8]) -> Result<String> {
    let encoding = Encoding::for_bom(bytes)
        .map(|(enc, _)| enc)
        .or_else(|| sniff_meta_charset(bytes))
        .unwrap_or(UTF_8);
    let (text, used, had_errors) = encoding.decode(bytes);
    if had_errors {
        let total = text.chars().count();
        let replaced = text.chars().filter(|&c| c == char::REPLACEMENT_CHARACTER).count();
        if replaced * 2 > total {
            return Err(Error::Decode { encoding: used.name() });
        }
    }
    Ok(text.into_owned())
}

fn sniff_meta_charset(bytes: &[u8]) -> Option<&'static Encoding> {
    let head = &bytes[..bytes.len().min(1024)];
    let lower: Vec<u8> = head.iter().map(u8::to_ascii_lowercase).collect();
    let mut from = 0;
    while let Some(at) = find(&lower[from..], b"<meta") {
        let start = from + at;
        let end = find(&lower[start..], b">").map_or(lower.len(), |e| start + e);
        let tag = &lower[start..end];
        if let Some(cs) = find(tag, b"charset") {
            let rest = &tag[cs + b"charset".len()..];
            let rest = trim_start(rest);
            if let Some(rest) = rest.strip_prefix(b"=") {
                let rest = trim_start(rest);
                let rest = rest
                    .strip_prefix(b"\"")
                    .or_else(|| rest.strip_prefix(b"'"))
                    .unwrap_or(rest);
                let label_end = rest
                    .iter()
                    .position(|&b| matches!(b, b'"' | b'\'' | b';' | b'/' | b' ' | b'\t' | b'\n' | b'\r' | b'>'))
                    .unwrap_or(rest.len());
                if let Some(enc) = Encoding::for_label(&rest[..label_end]) {
                    // A meta-declared UTF-16 page is necessarily ASCII-compatible.
                    return Some(if enc == encoding_rs::UTF_16LE || enc == encoding_rs::UTF_16BE {
                        UTF_8
                    } else {
                        enc
                    });
                }
            }
        }
        from = end;
    }
    None
}

fn find(hay: &[u8], needle: &[u8]) -> Option<usize> {
    hay.windows(needle.len()).position(|w| w == needle)
}

fn trim_start(b: &[u8]) -> &[u8] {
    let n = b.iter().take_while(|c| c.is_ascii_whitespace()).count();
    &b[n..]
}

/// Decode and parse a page with the HTML5 tree-construction algorithm.
pub fn parse(bytes: &[u8]) -> Result<Html> {
    Ok(Html::parse_document(&decode(bytes)?))
}

/// Ordered leaf text blocks of a page.
pub fn extract_blocks(html: &[u8]) -> Result<Vec<TextBlock>> {
    let doc = parse(html)?;
    Ok(collect_blocks(&doc, None).into_iter().map(|(b, _)| b).collect())
}

/// Walk `doc` in document order and produce one block per non-blank leaf
/// text node, paired with the text node's id.
///
/// When `gold_attr` is given, a block is labeled [`CONTENT`] iff one of its
/// ancestors carries that attribute with the value `content`, and
/// [`BOILERPLATE`] otherwise.
pub(crate) fn collect_blocks(doc: &Html, gold_attr: Option<&str>) -> Vec<(TextBlock, NodeId)> {
    struct Frame {
        tag: String,
        gold: bool,
    }

    let mut blocks = Vec::new();
    let mut path: Vec<Frame> = Vec::new();
    let mut counts: BTreeMap<String, u32> = BTreeMap::new();
    let mut gold_depth = 0usize;

    // Explicit stack instead of recursion: real pages nest deeply.
    enum Step<'a> {
        Enter(ego_tree::NodeRef<'a, Node>),
        Leave,
    }
    let mut stack = vec![Step::Enter(doc.tree.root())];
    while let Some(step) = stack.pop() {
        match step {
            Step::Leave => {
                let frame = path.pop().expect("balanced traversal");
                if let Some(c) = counts.get_mut(&frame.tag) {
                    *c -= 1;
                    if *c == 0 {
                        counts.remove(&frame.tag);
                    }
                }
                if frame.gold {
                    gold_depth -= 1;
                }
            }
            Step::Enter(node) => match node.value() {
                Node::Element(el) => {
                    let tag = el.name();
                    if EXCLUDED_TAGS.contains(&tag) {
                        continue;
                    }
                    let gold = gold_attr.is_some_and(|a| el.attr(a) == Some("content"));
                    if gold {
                        gold_depth += 1;
                    }
                    *counts.entry(tag.to_string()).or_insert(0) += 1;
                    path.push(Frame {
                        tag: tag.to_string(),
                        gold,
                    });
                    stack.push(Step::Leave);
                    let children: Vec<_> = node.children().collect();
                    stack.extend(children.into_iter().rev().map(Step::Enter));
                }
                Node::Document | Node::Fragment => {
                    let children: Vec<_> = node.children().collect();
                    stack.extend(children.into_iter().rev().map(Step::Enter));
                }
                Node::Text(text) => {
                    let text: &str = text;
                    if text.chars().all(char::is_whitespace) {
                        continue;
                    }
                    let label = gold_attr.map(|_| if gold_depth > 0 { CONTENT } else { BOILERPLATE });
                    blocks.push((
                        TextBlock {
                            text: text.to_string(),
                            tokens: tokenize(text),
                            tag_counts: counts.clone(),
                            position: blocks.len(),
                            label,
                        },
                        node.id(),
                    ));
                }
                _ => {}
            },
        }
    }
    blocks
}
