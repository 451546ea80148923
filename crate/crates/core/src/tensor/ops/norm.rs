//! Batch and instance normalization over the channel (last) axis.

use super::Op;
use crate::error::{contract_err, shape_err, Result};
use crate::tensor::tape::{GradSink, Var};
use crate::tensor::{Tape, Tensor};

pub const NORM_EPS: f32 = 1e-5;
pub const BN_MOMENTUM: f32 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum NormKind {
    /// Batch statistics; normalizes over all rows of the batch.
    BatchTrain,
    /// Running statistics, treated as constants.
    BatchInfer,
    /// Per-sample statistics over the spatial extent.
    Instance,
}

/// Running mean / variance of a batch-norm layer.
#[derive(Clone, Debug, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f32>,
    /// Unbiased variance estimate.
    pub var: Vec<f32>,
}

impl RunningStats {
    pub fn new(channels: usize) -> Self {
        Self {
            mean: vec![0.0; channels],
            var: vec![1.0; channels],
        }
    }
}

/// Split `shape` into (groups, rows per group, channels) for the given kind.
fn layout(shape: &[usize], kind: NormKind) -> Result<(usize, usize, usize)> {
    let c = *shape.last().expect("rank >= 1");
    let total: usize = shape.iter().product();
    match kind {
        NormKind::BatchTrain | NormKind::BatchInfer => {
            if shape.len() < 2 {
                return shape_err(format!(
                    "batch norm needs a leading batch axis, got {shape:?}"
                ));
            }
            Ok((1, total / c, c))
        }
        NormKind::Instance => {
            let [n, h, w, _] = *shape else {
                return shape_err(format!("instance norm expects NxHxWxC, got {shape:?}"));
            };
            Ok((n, h * w, c))
        }
    }
}

impl Tape {
    /// Batch normalization. Training mode normalizes with the batch
    /// statistics over every axis but the last and updates `running`
    /// with momentum [`BN_MOMENTUM`]; inference mode uses `running`.
    pub fn norm_batch(
        &mut self,
        input: Var,
        gamma: Var,
        beta: Var,
        running: &mut RunningStats,
        training: bool,
    ) -> Result<Var> {
        let shape = self.shape(input).to_vec();
        if training && shape[0] < 2 {
            return contract_err("batch norm in training mode needs a batch of at least 2");
        }
        let kind = if training {
            NormKind::BatchTrain
        } else {
            NormKind::BatchInfer
        };
        let (_, rows, c) = layout(&shape, kind)?;
        self.check_affine(gamma, beta, c)?;
        if running.mean.len() != c || running.var.len() != c {
            return shape_err(format!(
                "running stats sized for {} channels, need {c}",
                running.mean.len()
            ));
        }
        let (mean, inv_std) = if training {
            let (mean, var) = channel_stats(self.value(input).data(), 1, rows, c);
            let unbias = rows as f64 / (rows as f64 - 1.0);
            for ch in 0..c {
                running.mean[ch] =
                    (1.0 - BN_MOMENTUM) * running.mean[ch] + BN_MOMENTUM * mean[ch] as f32;
                running.var[ch] =
                    (1.0 - BN_MOMENTUM) * running.var[ch] + BN_MOMENTUM * (var[ch] * unbias) as f32;
            }
            let inv: Vec<f64> = var
                .iter()
                .map(|v| 1.0 / (v + NORM_EPS as f64).sqrt())
                .collect();
            (mean, inv)
        } else {
            let mean = running.mean.iter().map(|&m| m as f64).collect();
            let inv = running
                .var
                .iter()
                .map(|&v| 1.0 / (v as f64 + NORM_EPS as f64).sqrt())
                .collect();
            (mean, inv)
        };
        Ok(self.normalize(input, gamma, beta, kind, 1, rows, c, &mean, &inv_std))
    }

    /// Instance normalization: each (sample, channel) slab is normalized
    /// over its `H×W` extent. No running statistics.
    pub fn norm_instance(&mut self, input: Var, gamma: Var, beta: Var) -> Result<Var> {
        let shape = self.shape(input).to_vec();
        let (groups, rows, c) = layout(&shape, NormKind::Instance)?;
        if rows < 2 {
            return contract_err("instance norm needs a spatial extent of at least 2 pixels");
        }
        self.check_affine(gamma, beta, c)?;
        let (mean, var) = channel_stats(self.value(input).data(), groups, rows, c);
        let inv: Vec<f64> = var
            .iter()
            .map(|v| 1.0 / (v + NORM_EPS as f64).sqrt())
            .collect();
        Ok(self.normalize(
            input,
            gamma,
            beta,
            NormKind::Instance,
            groups,
            rows,
            c,
            &mean,
            &inv,
        ))
    }

    fn check_affine(&self, gamma: Var, beta: Var, c: usize) -> Result<()> {
        if self.shape(gamma) != [c] || self.shape(beta) != [c] {
            return shape_err(format!(
                "norm scale/shift must be [{c}], got {:?} / {:?}",
                self.shape(gamma),
                self.shape(beta)
            ));
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn normalize(
        &mut self,
        input: Var,
        gamma: Var,
        beta: Var,
        kind: NormKind,
        groups: usize,
        rows: usize,
        c: usize,
        mean: &[f64],
        inv_std: &[f64],
    ) -> Var {
        let x = self.value(input).data();
        let (g, b) = (self.value(gamma).data(), self.value(beta).data());
        let mut xhat = vec![0.0f32; x.len()];
        let mut out = vec![0.0f32; x.len()];
        for grp in 0..groups {
            let stats = &mean[grp * c..][..c];
            let inv = &inv_std[grp * c..][..c];
            for r in 0..rows {
                let base = (grp * rows + r) * c;
                for ch in 0..c {
                    let h = ((x[base + ch] as f64 - stats[ch]) * inv[ch]) as f32;
                    xhat[base + ch] = h;
                    out[base + ch] = g[ch] * h + b[ch];
                }
            }
        }
        let value = Tensor::new(self.shape(input).to_vec(), out).expect("same shape");
        let inv_std = inv_std.iter().map(|&v| v as f32).collect();
        self.push(
            value,
            Op::Norm {
                input,
                gamma,
                beta,
                kind,
                xhat,
                inv_std,
            },
        )
    }
}

/// Per (group, channel) mean and biased variance, accumulated in f64.
fn channel_stats(x: &[f32], groups: usize, rows: usize, c: usize) -> (Vec<f64>, Vec<f64>) {
    let mut mean = vec![0.0f64; groups * c];
    let mut var = vec![0.0f64; groups * c];
    for grp in 0..groups {
        let m = &mut mean[grp * c..][..c];
        for r in 0..rows {
            let row = &x[(grp * rows + r) * c..][..c];
            for (a, v) in m.iter_mut().zip(row) {
                *a += *v as f64;
            }
        }
        m.iter_mut().for_each(|a| *a /= rows as f64);
        let v = &mut var[grp * c..][..c];
        for r in 0..rows {
            let row = &x[(grp * rows + r) * c..][..c];
            for ((a, x), mu) in v.iter_mut().zip(row).zip(m.iter()) {
                let d = *x as f64 - mu;
                *a += d * d;
            }
        }
        v.iter_mut().for_each(|a| *a /= rows as f64);
    }
    (mean, var)
}

#[allow(clippy::too_many_arguments)]
pub(super) fn backward(
    input: Var,
    gamma: Var,
    beta: Var,
    kind: NormKind,
    xhat: &[f32],
    inv_std: &[f32],
    grad: &[f32],
    sink: &mut GradSink<'_>,
) {
    let shape = sink.value(input).shape().to_vec();
    let (groups, rows, c) = layout(&shape, kind).expect("validated in forward");

    let mut sum_g = vec![0.0f64; groups * c];
    let mut sum_gx = vec![0.0f64; groups * c];
    for grp in 0..groups {
        for r in 0..rows {
            let base = (grp * rows + r) * c;
            for ch in 0..c {
                let g = grad[base + ch] as f64;
                sum_g[grp * c + ch] += g;
                sum_gx[grp * c + ch] += g * xhat[base + ch] as f64;
            }
        }
    }

    if let Some(db) = sink.slot(beta) {
        for ch in 0..c {
            db[ch] += (0..groups).map(|grp| sum_g[grp * c + ch]).sum::<f64>() as f32;
        }
    }
    if let Some(dg) = sink.slot(gamma) {
        for ch in 0..c {
            dg[ch] += (0..groups).map(|grp| sum_gx[grp * c + ch]).sum::<f64>() as f32;
        }
    }

    let (gv, dx) = sink.value_and_slot(gamma, input);
    let Some(dx) = dx else { return };
    let gm = gv.data();
    let m = rows as f64;
    for grp in 0..groups {
        for r in 0..rows {
            let base = (grp * rows + r) * c;
            for ch in 0..c {
                let s = grp * c + ch;
                let g = grad[base + ch] as f64;
                let scale = gm[ch] as f64 * inv_std[s] as f64;
                let d = match kind {
                    NormKind::BatchInfer => g * scale,
                    NormKind::BatchTrain | NormKind::Instance => {
                        scale * (g - sum_g[s] / m - xhat[base + ch] as f64 * sum_gx[s] / m)
                    }
                };
                dx[base + ch] += d as f32;
            }
        }
    }
}
