//! Block-level classification metrics for both classes.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dom::CONTENT;
use crate::encoder::PageSequence;
use crate::model::{self, ModelParams};
use crate::par::Exec;
use crate::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Label 1 iff `probability >= threshold`.
pub fn predict_labels(probabilities: &[f64], threshold: f64) -> Result<Vec<u8>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Threshold(threshold));
    }
    Ok(probabilities.iter().map(|&p| u8::from(p >= threshold)).collect())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn from_labels(predicted: &[u8], gold: &[u8]) -> Result<Self> {
        if predicted.len() != gold.len() {
            return Err(Error::LengthMismatch {
                expected: gold.len(),
                got: predicted.len(),
            });
        }
        let mut c = Self::default();
        for (&p, &g) in predicted.iter().zip(gold) {
            match (p == CONTENT, g == CONTENT) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn merge(self, other: Self) -> Self {
        Self {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
            tn: self.tn + other.tn,
        }
    }

    /// The same counts seen with boilerplate as the positive class.
    pub fn swapped(self) -> Self {
        Self {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when precision or recall had a zero denominator and was
    /// reported as 0.
    pub undefined: bool,
}

impl ClassMetrics {
    /// Metrics of the class counted as positive in `c`.
    pub fn from_confusion(c: &Confusion) -> Self {
        let ratio = |num: u64, den: u64| if den == 0 { None } else { Some(num as f64 / den as f64) };
        let p = ratio(c.tp, c.tp + c.fp);
        let r = ratio(c.tp, c.tp + c.fn_);
        let (precision, recall) = (p.unwrap_or(0.0), r.unwrap_or(0.0));
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f1,
            undefined: p.is_none() || r.is_none(),
        }
    }
}

/// Confusion counts (content = positive) with per-class metrics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(flatten)]
    pub confusion: Confusion,
    pub negative: ClassMetrics,
    pub positive: ClassMetrics,
}

impl EvalReport {
    pub fn from_confusion(confusion: Confusion) -> Self {
        Self {
            confusion,
            negative: ClassMetrics::from_confusion(&confusion.swapped()),
            positive: ClassMetrics::from_confusion(&confusion),
        }
    }

    pub fn from_labels(predicted: &[u8], gold: &[u8]) -> Result<Self> {
        if gold.is_empty() {
            return Err(Error::EmptyEvaluation);
        }
        Ok(Self::from_confusion(Confusion::from_labels(predicted, gold)?))
    }

    pub fn to_tsv(&self) -> String {
        let c = &self.confusion;
        let mut out = String::from("class\tprecision\trecall\tf1\n");
        for (name, m) in [("negative", &self.negative), ("positive", &self.positive)] {
            let flag = if m.undefined { "\tundefined" } else { "" };
            let _ = writeln!(out, "{name}\t{:.4}\t{:.4}\t{:.4}{flag}", m.precision, m.recall, m.f1);
        }
        let _ = writeln!(out, "tp\tfp\tfn\ttn\n{}\t{}\t{}\t{}", c.tp, c.fp, c.fn_, c.tn);
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Score every block of every page at `threshold` and pool the confusion
/// counts over all blocks (micro-averaging).
pub fn evaluate(pages: &[PageSequence], params: &ModelParams, threshold: f64, exec: Exec) -> Result<EvalReport> {
    if pages.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Threshold(threshold));
    }
    params.check_finite()?;
    params.validate()?;
    let per_page = exec.map(pages, |page| -> Result<Confusion> {
        let gold = page
            .labels
            .as_deref()
            .ok_or_else(|| Error::Parameter(format!("page `{}` has unlabeled blocks", page.source_id)))?;
        let probs = model::infer(&page.matrix, params)?;
        Confusion::from_labels(&predict_labels(&probs, threshold)?, gold)
    });
    let mut total = Confusion::default();
    for c in per_page {
        total = total.merge(c?);
    }
    if total.total() == 0 {
        return Err(Error::EmptyEvaluation);
    }
    Ok(EvalReport::from_confusion(total))
}
