//! Independent reference implementations used as test oracles. Nothing here
//! calls into the code paths it checks.

#![allow(dead_code)]

pub mod html;
pub mod scalar;

use std::collections::BTreeMap;

/// Character-by-character splitter: a token is a maximal run of
/// alphanumeric codepoints, lowercased after splitting.
pub fn reference_tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_alphabetic() || c.is_numeric() {
            current.push(c);
        } else if !current.is_empty() {
            tokens.push(current.to_lowercase());
            current.clear();
        }
    }
    if !current.is_empty() {
        tokens.push(current.to_lowercase());
    }
    tokens
}

/// Brute-force count vector from a raw root-to-leaf tag path and a token
/// list, scanning the vocabulary lists linearly.
pub fn brute_force_encode(path: &[String], tokens: &[String], tags: &[String], words: &[String]) -> Vec<u32> {
    let k = tags.len();
    let l = words.len();
    let mut v = vec![0u32; k + l + 2];
    for t in path {
        match tags.iter().position(|x| x == t) {
            Some(i) => v[i] += 1,
            None => v[k] += 1,
        }
    }
    for w in tokens {
        match words.iter().position(|x| x == w) {
            Some(i) => v[k + 1 + i] += 1,
            None => v[k + 1 + l] += 1,
        }
    }
    v
}

pub fn path_counts(path: &[String]) -> BTreeMap<String, u32> {
    let mut m = BTreeMap::new();
    for t in path {
        *m.entry(t.clone()).or_insert(0) += 1;
    }
    m
}
