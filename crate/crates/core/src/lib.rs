//! Boilerplate removal as sequence labeling.
//!
//! A page is split into the ordered sequence of its DOM leaf text blocks
//! ([`dom::extract_blocks`]). Each block becomes a sparse count vector over
//! the most common ancestor tags and words ([`encoder`]), and a stacked
//! bidirectional LSTM ([`model`]) labels every block as content (1) or
//! boilerplate (0). [`train`] fits the model with a class-weighted binary
//! cross entropy and Adam, and [`eval`] reports per-class precision, recall
//! and F1.
//!
//! ```no_run
//! use boilerseq::{dom, encoder, model, corpus::Vocabulary};
//!
//! # fn main() -> Result<(), boilerseq::Error> {
//! let vocab = Vocabulary::load("vocab.txt")?;
//! let params = model::load_params("best.bseq")?;
//! let html = std::fs::read("page.html")?;
//! let blocks = dom::extract_blocks(&html)?;
//! let seq = encoder::encode_blocks(&blocks, &vocab)?;
//! let probs = model::infer(&seq.matrix, &params)?;
//! # Ok(())
//! # }
//! ```
//!
//! With the default `parallel` feature, per-page work inside a batch (and
//! per-page scoring during evaluation) fans out over rayon. Reductions are
//! always performed in page order, so results are bit-identical to the
//! sequential path.

pub mod annotate;
pub mod corpus;
pub mod dom;
pub mod encoder;
mod error;
pub mod eval;
pub mod linalg;
pub mod model;
pub mod par;
pub mod synthetic;
pub mod train;

pub use error::{Error, Result};
