use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::TrainConfig;
use crate::data::{stack_batch, LabeledSample};
use crate::error::{arg_err, Error, Result};
use crate::model::Stiln;
use crate::tensor::{Adam, AdamConfig, Tape, Tensor};

/// A model with its optimizer state and loss history.
pub struct Trainer {
    pub model: Stiln,
    adam: Adam,
    losses: Vec<f32>,
}

impl Trainer {
    pub fn new(model: Stiln, lr: f64) -> Result<Self> {
        let adam = Adam::new(AdamConfig {
            lr,
            ..AdamConfig::default()
        })?;
        Ok(Self {
            model,
            adam,
            losses: Vec::new(),
        })
    }

    /// One optimisation step on a stacked batch; returns the batch loss.
    pub fn step(&mut self, x: &Tensor, y: &Tensor) -> Result<f32> {
        self.model.params_mut().zero_grad();
        let mut tape = Tape::new();
        let probs = self.model.forward(&mut tape, x, true)?;
        let target = tape.constant(y.clone());
        let loss = tape.bce_loss(probs, target)?;
        let value = tape.value(loss).data()[0];
        if !value.is_finite() {
            return Err(Error::Diverged {
                step: self.losses.len(),
                loss: value,
            });
        }
        tape.backward_into(loss, self.model.params_mut())?;
        self.adam.step(self.model.params_mut())?;
        self.losses.push(value);
        Ok(value)
    }

    pub fn losses(&self) -> &[f32] {
        &self.losses
    }

    pub fn into_parts(self) -> (Stiln, Vec<f32>) {
        (self.model, self.losses)
    }
}

pub struct TrainOutcome {
    pub model: Stiln,
    /// Loss of every step, in order.
    pub losses: Vec<f32>,
}

/// Shuffled mini-batch index lists for one epoch. A trailing batch of one
/// sample is merged into the previous batch, since batch norm needs two.
pub fn batches(n: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut out: Vec<Vec<usize>> = order
        .chunks(batch_size.clamp(1, n.max(1)))
        .map(<[usize]>::to_vec)
        .collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        let last = out.pop().unwrap();
        out.last_mut().unwrap().extend(last);
    }
    out
}

/// Trains `model` for `cfg.epochs` epochs of shuffled mini-batches.
/// `shuffle_seed` drives the batch order.
pub fn train(
    model: Stiln,
    samples: &[LabeledSample],
    cfg: &TrainConfig,
    shuffle_seed: u64,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if samples.len() < 2 {
        return arg_err(format!(
            "training needs at least 2 samples, got {}",
            samples.len()
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
    let mut trainer = Trainer::new(model, cfg.lr)?;
    for epoch in 0..cfg.epochs {
        for batch in batches(samples.len(), cfg.batch_size, &mut rng) {
            let refs: Vec<&LabeledSample> = batch.iter().map(|&i| &samples[i]).collect();
            let (x, y) = stack_batch(&refs)?;
            trainer.step(&x, &y)?;
        }
        log::debug!(
            "epoch {epoch}: last loss {:.5}",
            trainer.losses().last().copied().unwrap_or(f32::NAN)
        );
    }
    let (model, losses) = trainer.into_parts();
    Ok(TrainOutcome { model, losses })
}
