//! Generated pages with known labels, for smoke tests and benchmarks.
//!
//! Each page has 3–8 long paragraphs inside an `<article data-gold="content">`
//! built from a content word pool, surrounded by short navigation, sidebar
//! and footer blocks drawn from a disjoint boilerplate pool.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::GOLD_ATTR;

const CONTENT_SYLLABLES: [&str; 12] = [
    "ka", "lo", "mi", "ren", "tu", "sa", "vel", "dor", "pi", "nes", "gar", "bo",
];
const BOILERPLATE_SYLLABLES: [&str; 8] = ["zup", "qix", "wyf", "jeh", "yod", "cux", "zel", "vrak"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyntheticPage {
    pub source_id: String,
    pub html: String,
}

struct Pools {
    content: Vec<String>,
    boilerplate: Vec<String>,
}

fn word_pool(rng: &mut ChaCha8Rng, syllables: &[&str], size: usize) -> BTreeSet<String> {
    let mut words = BTreeSet::new();
    while words.len() < size {
        let n = rng.gen_range(1..=3);
        let w: String = (0..n).map(|_| *syllables.choose(rng).unwrap()).collect();
        words.insert(w);
    }
    words
}

fn pools(rng: &mut ChaCha8Rng) -> Pools {
    let content = word_pool(rng, &CONTENT_SYLLABLES, 300);
    let boilerplate = word_pool(rng, &BOILERPLATE_SYLLABLES, 60);
    Pools {
        boilerplate: boilerplate.difference(&content).cloned().collect(),
        content: content.into_iter().collect(),
    }
}

fn phrase(rng: &mut ChaCha8Rng, pool: &[String], min: usize, max: usize) -> String {
    let n = rng.gen_range(min..=max);
    (0..n)
        .map(|_| pool.choose(rng).unwrap().as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

fn paragraph(rng: &mut ChaCha8Rng, pool: &[String]) -> String {
    let mut out = String::new();
    for s in 0..rng.gen_range(2..=5) {
        if s > 0 {
            out.push(' ');
        }
        let mut sentence = phrase(rng, pool, 6, 14);
        if let Some(first) = sentence.get_mut(..1) {
            first.make_ascii_uppercase();
        }
        // Occasional inline emphasis splits the paragraph into several blocks.
        if rng.gen_bool(0.3) {
            let em = phrase(rng, pool, 1, 3);
            sentence = format!("{sentence} <em>{em}</em> {}", phrase(rng, pool, 2, 5));
        }
        out.push_str(&sentence);
        out.push('.');
    }
    out
}

fn link_list(rng: &mut ChaCha8Rng, pool: &[String], out: &mut String) {
    out.push_str("<ul>");
    for _ in 0..rng.gen_range(3..=6) {
        let _ = write!(out, "<li><a href=\"#\">{}</a></li>", phrase(rng, pool, 1, 2));
    }
    out.push_str("</ul>");
}

fn page(rng: &mut ChaCha8Rng, pools: &Pools, index: usize) -> SyntheticPage {
    let bp = &pools.boilerplate;
    let mut html = String::from("<!DOCTYPE html><html><head>");
    let _ = write!(html, "<title>{}</title></head><body>", phrase(rng, bp, 1, 3));

    html.push_str("<header><div class=\"brand\">");
    html.push_str(&phrase(rng, bp, 1, 2));
    html.push_str("</div><nav>");
    link_list(rng, bp, &mut html);
    html.push_str("</nav></header>");

    let mut aside = String::new();
    if rng.gen_bool(0.6) {
        let _ = write!(aside, "<aside><h3>{}</h3>", phrase(rng, bp, 1, 2));
        link_list(rng, bp, &mut aside);
        aside.push_str("</aside>");
    }
    let aside_first = rng.gen_bool(0.5);
    if aside_first {
        html.push_str(&aside);
    }

    html.push_str("<main><div class=\"wrap\">");
    let _ = write!(html, "<article {GOLD_ATTR}=\"content\">");
    for _ in 0..rng.gen_range(3..=8) {
        let _ = write!(html, "<p>{}</p>", paragraph(rng, &pools.content));
    }
    html.push_str("</article>");
    if rng.gen_bool(0.5) {
        let _ = write!(
            html,
            "<div class=\"share\"><a href=\"#\">{}</a></div>",
            phrase(rng, bp, 1, 2)
        );
    }
    html.push_str("</div></main>");

    if !aside_first {
        html.push_str(&aside);
    }

    let _ = write!(html, "<footer><p>&copy; 2017 {}</p>", phrase(rng, bp, 1, 3));
    for _ in 0..rng.gen_range(1..=4) {
        let _ = write!(html, "<a href=\"#\">{}</a> ", phrase(rng, bp, 1, 2));
    }
    html.push_str("</footer></body></html>");

    SyntheticPage {
        source_id: format!("page-{index:03}.html"),
        html,
    }
}

/// `pages` labeled pages, deterministic per `seed`.
pub fn corpus(pages: usize, seed: u64) -> Vec<SyntheticPage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pools = pools(&mut rng);
    (0..pages).map(|i| page(&mut rng, &pools, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::labeled_page_from_bytes;

    #[test]
    fn pools_are_disjoint() {
        let p = pools(&mut ChaCha8Rng::seed_from_u64(1));
        let content: BTreeSet<_> = p.content.iter().collect();
        assert!(p.boilerplate.iter().all(|w| !content.contains(w)));
        assert!(p.boilerplate.len() > 20);
    }

    #[test]
    fn pages_have_both_classes() {
        for sp in corpus(5, 3) {
            let page = labeled_page_from_bytes(&sp.source_id, sp.html.as_bytes(), GOLD_ATTR).unwrap();
            let labels: Vec<_> = page.labels().collect();
            let content = labels.iter().filter(|&&l| l == 1).count();
            assert!(content >= 3, "{content}");
            assert!(labels.len() > content);
            for b in page.blocks.iter().filter(|b| b.label == Some(1)) {
                assert!(b.tag_counts.contains_key("article"));
            }
        }
        assert_eq!(corpus(3, 9), corpus(3, 9));
    }
}
