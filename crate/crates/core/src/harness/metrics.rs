use serde::Serialize;

use crate::symbol::Sym;

use super::HarnessError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub accuracy: f64,
    /// F1 on the positive class; 0 when nothing is predicted or actually positive.
    pub f1: f64,
    pub confusion: Confusion,
}

pub fn metrics(preds: &[Sym], labels: &[Sym], positive: Sym) -> Result<Metrics, HarnessError> {
    if preds.len() != labels.len() {
        return Err(HarnessError::LengthMismatch { preds: preds.len(), labels: labels.len() });
    }
    let mut c = Confusion::default();
    let mut correct = 0;
    for (&p, &l) in preds.iter().zip(labels) {
        if p == l {
            correct += 1;
        }
        match (p == positive, l == positive) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    let accuracy = if preds.is_empty() { 0.0 } else { correct as f64 / preds.len() as f64 };
    let denom = 2 * c.tp + c.fp + c.fn_;
    let f1 = if denom == 0 { 0.0 } else { 2.0 * c.tp as f64 / denom as f64 };
    Ok(Metrics { accuracy, f1, confusion: c })
}
