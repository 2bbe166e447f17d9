//! Sparse count encoding of text blocks.
//!
//! Slot layout for a vocabulary with `k` tags and `l` words:
//!
//! ```text
//! [tag_1 .. tag_k, tag_oov, word_1 .. word_l, word_oov]
//! ```

use std::fmt::Write as _;

use crate::corpus::{LabeledPage, Vocabulary};
use crate::dom::TextBlock;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedBlock {
    pub counts: Vec<u32>,
}

impl EncodedBlock {
    pub fn nonzero(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (i, c))
    }
}

pub fn encode_block(block: &TextBlock, vocab: &Vocabulary) -> EncodedBlock {
    let mut counts = vec![0u32; vocab.d()];
    for (tag, &n) in &block.tag_counts {
        counts[vocab.tag_slot(tag)] += n;
    }
    for tok in &block.tokens {
        counts[vocab.word_slot(tok)] += 1;
    }
    EncodedBlock { counts }
}

/// Row-compressed non-negative integer matrix. Rows are mostly empty, so
/// only the non-zero entries of each row are stored, in column order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CountMatrix {
    cols: usize,
    row_start: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<u32>,
}

impl CountMatrix {
    pub fn new(cols: usize) -> Self {
        Self {
            cols,
            row_start: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Append a row from `(column, count)` pairs in ascending column order.
    pub fn push_row(&mut self, entries: impl IntoIterator<Item = (usize, u32)>) {
        for (j, c) in entries {
            debug_assert!(j < self.cols);
            debug_assert!(
                self.indices.len() == *self.row_start.last().unwrap()
                    || (self.indices.last().copied().unwrap() as usize) < j
            );
            if c > 0 {
                self.indices.push(j as u32);
                self.values.push(c);
            }
        }
        self.row_start.push(self.indices.len());
    }

    pub fn from_dense(cols: usize, rows: &[Vec<u32>]) -> Self {
        let mut m = Self::new(cols);
        for r in rows {
            assert_eq!(r.len(), cols, "row width");
            m.push_row(r.iter().copied().enumerate());
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.row_start.len() - 1
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Non-zero `(column, count)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, u32)> + '_ {
        let span = self.row_start[i]..self.row_start[i + 1];
        self.indices[span.clone()]
            .iter()
            .zip(&self.values[span])
            .map(|(&j, &c)| (j as usize, c))
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.row(i).find(|&(col, _)| col == j).map_or(0, |(_, c)| c)
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.row(i).map(|(_, c)| u64::from(c)).sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<u32>> {
        (0..self.rows())
            .map(|i| {
                let mut r = vec![0; self.cols];
                for (j, c) in self.row(i) {
                    r[j] = c;
                }
                r
            })
            .collect()
    }

    /// Copy of the first `n` rows followed by `pad` empty rows.
    pub fn padded(&self, pad: usize) -> Self {
        let mut m = self.clone();
        for _ in 0..pad {
            m.push_row(std::iter::empty());
        }
        m
    }
}

/// One page as an `n × d` count matrix plus optional gold labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PageSequence {
    pub source_id: String,
    pub blocks: Vec<TextBlock>,
    pub matrix: CountMatrix,
    pub labels: Option<Vec<u8>>,
}

impl PageSequence {
    pub fn len(&self) -> usize {
        self.matrix.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.rows() == 0
    }
}

/// Encode an unlabeled (or partially labeled) block list. Labels are kept
/// only when every block has one.
pub fn encode_blocks(blocks: &[TextBlock], vocab: &Vocabulary) -> Result<PageSequence> {
    encode_with_id("", blocks, vocab)
}

pub fn encode_page(page: &LabeledPage, vocab: &Vocabulary) -> Result<PageSequence> {
    encode_with_id(&page.source_id, &page.blocks, vocab)
}

fn encode_with_id(source_id: &str, blocks: &[TextBlock], vocab: &Vocabulary) -> Result<PageSequence> {
    if blocks.is_empty() {
        return Err(Error::EmptyPage(source_id.to_string()));
    }
    let mut matrix = CountMatrix::new(vocab.d());
    for block in blocks {
        matrix.push_row(encode_block(block, vocab).nonzero());
    }
    let labels = blocks.iter().map(|b| b.label).collect::<Option<Vec<u8>>>();
    Ok(PageSequence {
        source_id: source_id.to_string(),
        blocks: blocks.to_vec(),
        matrix,
        labels,
    })
}

/// Debug listing: `position<TAB>label<TAB>idx:count ...` per block, with
/// `-` for a missing label.
pub fn dump(seq: &PageSequence) -> String {
    let mut out = String::new();
    for (i, block) in seq.blocks.iter().enumerate() {
        let label = block.label.map_or("-".to_string(), |l| l.to_string());
        let pairs: Vec<String> = seq.matrix.row(i).map(|(j, c)| format!("{j}:{c}")).collect();
        let _ = writeln!(out, "{}\t{}\t{}", block.position, label, pairs.join(" "));
    }
    out
}
