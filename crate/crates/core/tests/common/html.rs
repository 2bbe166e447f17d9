//! Random well-formed documents and a recursive walk over the generator's
//! own tree (not the parser's) that predicts the leaf blocks.

use rand::seq::SliceRandom;
use rand::Rng;

const BLOCK_TAGS: [&str; 9] = [
    "div",
    "section",
    "article",
    "main",
    "header",
    "footer",
    "nav",
    "aside",
    "blockquote",
];
const INLINE_TAGS: [&str; 7] = ["span", "em", "strong", "b", "i", "u", "small"];
const HIDDEN_TAGS: [&str; 4] = ["script", "style", "noscript", "template"];

#[derive(Clone, Debug)]
pub enum Node {
    Element { tag: &'static str, children: Vec<Node> },
    Text(String),
    Comment(String),
}

/// Expected block: text and its root-to-leaf element path.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpectedBlock {
    pub text: String,
    pub path: Vec<String>,
}

pub fn random_text(rng: &mut impl Rng) -> String {
    const CHARS: &[char] = &[
        'a', 'b', 'c', 'X', 'Y', 'z', '0', '7', ' ', ' ', ',', '.', '-', '!', '\'', 'é', 'ß', 'Ω', '中', '&', '<', '>',
        '"', '\u{a0}', '\n', '\t', '_', '²',
    ];
    if rng.gen_bool(0.1) {
        return [" ", "\n  ", "\t"].choose(rng).unwrap().to_string();
    }
    let n = rng.gen_range(1..12);
    (0..n).map(|_| *CHARS.choose(rng).unwrap()).collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn gen_children(rng: &mut impl Rng, depth: usize, inline_only: bool) -> Vec<Node> {
    let mut out: Vec<Node> = Vec::new();
    let n = if depth == 0 { 0 } else { rng.gen_range(1..6) };
    for _ in 0..n {
        let roll = rng.gen_range(0..10);
        let node = if roll < 4 {
            Node::Text(random_text(rng))
        } else if roll < 5 && !inline_only {
            let tag = *HIDDEN_TAGS.choose(rng).unwrap();
            let inner = if tag == "template" {
                vec![Node::Element {
                    tag: "div",
                    children: vec![Node::Text("templated".into())],
                }]
            } else {
                vec![Node::Text("hidden x = 1;".into())]
            };
            Node::Element { tag, children: inner }
        } else if roll < 6 {
            Node::Comment("note".into())
        } else if inline_only || rng.gen_bool(0.4) {
            let tag = *INLINE_TAGS.choose(rng).unwrap();
            Node::Element {
                tag,
                children: gen_children(rng, depth - 1, inline_only),
            }
        } else if rng.gen_bool(0.25) {
            Node::Element {
                tag: "p",
                children: gen_children(rng, depth - 1, true),
            }
        } else {
            let tag = *BLOCK_TAGS.choose(rng).unwrap();
            Node::Element {
                tag,
                children: gen_children(rng, depth - 1, false),
            }
        };
        // The parser merges adjacent text nodes; so does the generator.
        if let (Some(Node::Text(prev)), Node::Text(t)) = (out.last_mut(), &node) {
            prev.push_str(t);
            continue;
        }
        out.push(node);
    }
    out
}

/// A random `<body>` subtree.
pub fn random_body(rng: &mut impl Rng) -> Vec<Node> {
    let depth = rng.gen_range(2..7);
    gen_children(rng, depth, false)
}

pub fn serialize(body: &[Node]) -> String {
    fn go(n: &Node, out: &mut String) {
        match n {
            Node::Text(t) => out.push_str(&escape(t)),
            Node::Comment(c) => {
                out.push_str("<!--");
                out.push_str(c);
                out.push_str("-->");
            }
            Node::Element { tag, children } => {
                out.push('<');
                out.push_str(tag);
                out.push('>');
                for c in children {
                    go(c, out);
                }
                out.push_str("</");
                out.push_str(tag);
                out.push('>');
            }
        }
    }
    let mut out = String::from("<!DOCTYPE html><html><head></head><body>");
    for n in body {
        go(n, &mut out);
    }
    out.push_str("</body></html>");
    out
}

/// Depth-first walk predicting the block sequence of `serialize(body)`.
pub fn expected_blocks(body: &[Node]) -> Vec<ExpectedBlock> {
    fn go(n: &Node, path: &mut Vec<String>, out: &mut Vec<ExpectedBlock>) {
        match n {
            Node::Text(t) => {
                if !t.chars().all(char::is_whitespace) {
                    out.push(ExpectedBlock {
                        text: t.clone(),
                        path: path.clone(),
                    });
                }
            }
            Node::Comment(_) => {}
            Node::Element { tag, children } => {
                if HIDDEN_TAGS.contains(tag) {
                    return;
                }
                path.push(tag.to_string());
                for c in children {
                    go(c, path, out);
                }
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    let mut path = vec!["html".to_string(), "body".to_string()];
    for n in body {
        go(n, &mut path, &mut out);
    }
    out
}

/// All visible text of the tree, in order, including whitespace-only runs.
pub fn visible_text(body: &[Node]) -> String {
    fn go(n: &Node, out: &mut String) {
        match n {
            Node::Text(t) => out.push_str(t),
            Node::Comment(_) => {}
            Node::Element { tag, children } => {
                if !HIDDEN_TAGS.contains(tag) {
                    children.iter().for_each(|c| go(c, out));
                }
            }
        }
    }
    let mut out = String::new();
    body.iter().for_each(|n| go(n, &mut out));
    out
}
