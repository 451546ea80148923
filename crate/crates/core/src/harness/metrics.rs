use serde::{Deserialize, Serialize};

use crate::data::{stack_batch, Label, LabeledSample};
use crate::error::{arg_err, Result};
use crate::model::Stiln;

/// Binary confusion counts with "high" as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn add(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::High, Label::High) => self.tp += 1,
            (Label::Low, Label::High) => self.fp += 1,
            (Label::High, Label::Low) => self.fn_ += 1,
            (Label::Low, Label::Low) => self.tn += 1,
        }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Label, Label)>) -> Self {
        let mut c = Self::default();
        for (t, p) in pairs {
            c.add(t, p);
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    /// `2TP / (2TP + FP + FN)`; 0 with a warning when there are neither
    /// positive predictions nor positive labels.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            log::warn!("F1 undefined: no positive labels or predictions; reporting 0");
            return 0.0;
        }
        2.0 * self.tp as f64 / denom as f64
    }

    pub fn metrics(&self) -> Metrics {
        Metrics {
            acc: self.accuracy(),
            f1: self.f1(),
            confusion: *self,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub acc: f64,
    pub f1: f64,
    pub confusion: Confusion,
}

const EVAL_BATCH: usize = 32;

/// Inference-mode accuracy and F1; the prediction is the argmax of the two
/// outputs (ties go to "low").
pub fn evaluate(model: &mut Stiln, samples: &[LabeledSample]) -> Result<Metrics> {
    if samples.is_empty() {
        return arg_err("cannot evaluate an empty sample list");
    }
    let mut confusion = Confusion::default();
    for chunk in samples.chunks(EVAL_BATCH) {
        let refs: Vec<&LabeledSample> = chunk.iter().collect();
        let (x, _) = stack_batch(&refs)?;
        let probs = model.predict(&x)?;
        for (s, p) in chunk.iter().zip(probs.data().chunks(2)) {
            let predicted = if p[1] > p[0] { Label::High } else { Label::Low };
            confusion.add(s.label, predicted);
        }
    }
    Ok(confusion.metrics())
}
