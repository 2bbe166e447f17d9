//! Re-emit a page with its predicted content blocks highlighted.
//!
//! Content blocks are wrapped in `<span data-gold="content" style=...>`,
//! so the output doubles as ground truth for
//! [`crate::corpus::load_labeled_page`]. Text whose parent cannot hold a
//! `<span>` (raw-text and escapable raw-text elements, `<select>` content,
//! foreign SVG/MathML content) marks the parent element instead. Existing
//! gold attributes are dropped.

use std::collections::HashSet;

use ego_tree::{NodeId, NodeRef};
use scraper::{Html, Node};

use crate::corpus::GOLD_ATTR;
use crate::dom::{self, CONTENT};
use crate::{Error, Result};

pub const HIGHLIGHT_STYLE: &str = "background-color: #fff59d";

const HTML_NS: &str = "http://www.w3.org/1999/xhtml";

const VOID: [&str; 17] = [
    "area", "base", "basefont", "bgsound", "br", "col", "embed", "frame", "hr", "img", "input", "keygen", "link",
    "meta", "param", "source", "track",
];

/// Elements whose text children are serialized without escaping.
const RAW_TEXT: [&str; 8] = [
    "style",
    "script",
    "xmp",
    "iframe",
    "noembed",
    "noframes",
    "plaintext",
    "noscript",
];

/// Parents where an inserted `<span>` would not survive re-parsing.
const NO_WRAP: [&str; 5] = ["title", "textarea", "option", "optgroup", "select"];

pub fn annotate_html(html: &[u8], predictions: &[u8]) -> Result<Vec<u8>> {
    let doc = dom::parse(html)?;
    let blocks = dom::collect_blocks(&doc, None);
    if blocks.len() != predictions.len() {
        return Err(Error::LengthMismatch {
            expected: blocks.len(),
            got: predictions.len(),
        });
    }
    let mut wrap = HashSet::new();
    let mut mark = HashSet::new();
    for ((_, id), &label) in blocks.iter().zip(predictions) {
        if label != CONTENT {
            continue;
        }
        let node = doc.tree.get(*id).expect("block node");
        match node.parent() {
            Some(parent) if !can_wrap(parent) => {
                mark.insert(parent.id());
            }
            _ => {
                wrap.insert(*id);
            }
        }
    }
    Ok(serialize(&doc, &wrap, &mark).into_bytes())
}

fn can_wrap(parent: NodeRef<'_, Node>) -> bool {
    match parent.value() {
        Node::Element(el) => &*el.name.ns == HTML_NS && !NO_WRAP.contains(&el.name()) && !RAW_TEXT.contains(&el.name()),
        _ => true,
    }
}

fn escape(s: &str, attr: bool, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '\u{a0}' => out.push_str("&nbsp;"),
            '"' if attr => out.push_str("&quot;"),
            '<' if !attr => out.push_str("&lt;"),
            '>' if !attr => out.push_str("&gt;"),
            c => out.push(c),
        }
    }
}

fn gold_attrs() -> String {
    format!(" {GOLD_ATTR}=\"content\" style=\"{HIGHLIGHT_STYLE}\"")
}

/// HTML serialization of the parsed tree.
fn serialize(doc: &Html, wrap: &HashSet<NodeId>, mark: &HashSet<NodeId>) -> String {
    enum Step<'a> {
        Enter(NodeRef<'a, Node>),
        Emit(String),
    }
    let mut out = String::new();
    let mut stack = vec![Step::Enter(doc.tree.root())];
    while let Some(step) = stack.pop() {
        let node = match step {
            Step::Emit(s) => {
                out.push_str(&s);
                continue;
            }
            Step::Enter(node) => node,
        };
        match node.value() {
            Node::Document | Node::Fragment => {
                stack.extend(node.children().collect::<Vec<_>>().into_iter().rev().map(Step::Enter));
            }
            Node::Doctype(dt) => {
                out.push_str("<!DOCTYPE ");
                out.push_str(dt.name());
                match (dt.public_id(), dt.system_id()) {
                    ("", "") => {}
                    ("", sys) => out.push_str(&format!(" SYSTEM \"{sys}\"")),
                    (public, "") => out.push_str(&format!(" PUBLIC \"{public}\"")),
                    (public, sys) => out.push_str(&format!(" PUBLIC \"{public}\" \"{sys}\"")),
                }
                out.push('>');
            }
            Node::Comment(c) => {
                out.push_str("<!--");
                out.push_str(c);
                out.push_str("-->");
            }
            Node::ProcessingInstruction(pi) => {
                out.push_str(&format!("<?{} {}>", pi.target, pi.data));
            }
            Node::Text(text) => {
                let parent = node
                    .parent()
                    .and_then(|p| p.value().as_element().map(|e| e.name().to_string()));
                let raw = parent.as_deref().is_some_and(|p| RAW_TEXT.contains(&p));
                if raw {
                    out.push_str(text);
                } else if wrap.contains(&node.id()) {
                    out.push_str("<span");
                    out.push_str(&gold_attrs());
                    out.push('>');
                    escape(text, false, &mut out);
                    out.push_str("</span>");
                } else {
                    escape(text, false, &mut out);
                }
            }
            Node::Element(el) => {
                let name = el.name();
                out.push('<');
                out.push_str(name);
                for (qn, value) in &el.attrs {
                    if qn.local.as_ref() == GOLD_ATTR || (mark.contains(&node.id()) && qn.local.as_ref() == "style") {
                        continue;
                    }
                    out.push(' ');
                    if let Some(prefix) = &qn.prefix {
                        out.push_str(prefix);
                        out.push(':');
                    }
                    out.push_str(&qn.local);
                    out.push_str("=\"");
                    escape(value, true, &mut out);
                    out.push('"');
                }
                if mark.contains(&node.id()) {
                    out.push_str(&gold_attrs());
                }
                out.push('>');
                let html_ns = &*el.name.ns == HTML_NS;
                if html_ns && VOID.contains(&name) {
                    continue;
                }
                // The parser drops one newline right after these start tags.
                if html_ns && matches!(name, "pre" | "textarea" | "listing") {
                    if let Some(first) = node.first_child() {
                        if let Node::Text(t) = first.value() {
                            if t.starts_with('\n') && !wrap.contains(&first.id()) {
                                out.push('\n');
                            }
                        }
                    }
                }
                stack.push(Step::Emit(format!("</{name}>")));
                stack.extend(node.children().collect::<Vec<_>>().into_iter().rev().map(Step::Enter));
            }
        }
    }
    out
}
