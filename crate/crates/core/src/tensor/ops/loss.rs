use super::Op;
use crate::error::{shape_err, Result};
use crate::tensor::tape::{GradSink, Var};
use crate::tensor::{Tape, Tensor};

/// Predictions are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside the loss.
pub const PROB_CLAMP: f32 = 1e-7;

#[inline]
fn clamp_prob(p: f32) -> f64 {
    (p as f64).clamp(PROB_CLAMP as f64, 1.0 - PROB_CLAMP as f64)
}

impl Tape {
    /// Mean binary cross-entropy over every element of `pred` against a
    /// one-hot (or any {0,1}) target of the same shape.
    pub fn bce_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        if self.shape(pred) != self.shape(target) {
            return shape_err(format!(
                "bce_loss: prediction {:?} vs target {:?}",
                self.shape(pred),
                self.shape(target)
            ));
        }
        let p = self.value(pred).data();
        let y = self.value(target).data();
        let total: f64 = p
            .iter()
            .zip(y)
            .map(|(&p, &y)| {
                let p = clamp_prob(p);
                let y = y as f64;
                -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
            })
            .sum();
        let loss = (total / p.len() as f64) as f32;
        Ok(self.push(Tensor::scalar(loss), Op::Bce { pred, target }))
    }

    pub fn sum(&mut self, input: Var) -> Var {
        let s: f64 = self.value(input).data().iter().map(|&v| v as f64).sum();
        self.push(Tensor::scalar(s as f32), Op::Sum { input })
    }

    pub fn mean(&mut self, input: Var) -> Var {
        let x = self.value(input).data();
        let s: f64 = x.iter().map(|&v| v as f64).sum::<f64>() / x.len() as f64;
        self.push(Tensor::scalar(s as f32), Op::Mean { input })
    }
}

/// Gradient with respect to the prediction only; targets are labels.
pub(super) fn backward_bce(pred: Var, target: Var, grad: &[f32], sink: &mut GradSink<'_>) {
    let g = grad[0] as f64;
    let y: Vec<f32> = sink.value(target).data().to_vec();
    let (p, dp) = sink.value_and_slot(pred, pred);
    let Some(dp) = dp else { return };
    let n = y.len() as f64;
    for ((d, &p), &y) in dp.iter_mut().zip(p.data()).zip(&y) {
        let p = clamp_prob(p);
        *d += (g * (p - y as f64) / (p * (1.0 - p)) / n) as f32;
    }
}
