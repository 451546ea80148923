use serde::{Deserialize, Serialize};

use super::Op;
use crate::error::{shape_err, Result};
use crate::tensor::tape::{GradSink, Var};
use crate::tensor::{Tape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolMode {
    Max,
    Avg,
}

fn nhwc(shape: &[usize], what: &str) -> Result<(usize, usize, usize, usize)> {
    match *shape {
        [h, w, c] => Ok((1, h, w, c)),
        [n, h, w, c] => Ok((n, h, w, c)),
        _ => shape_err(format!("{what} expects HxWxC or NxHxWxC, got {shape:?}")),
    }
}

impl Tape {
    /// Non-overlapping `window × window` pooling, stride = window.
    pub fn pool2d(&mut self, input: Var, window: usize, mode: PoolMode) -> Result<Var> {
        self.pool_rect(input, (window, window), mode)
    }

    /// Pool over the whole spatial extent: `N×H×W×C → N×1×1×C`.
    pub fn global_pool(&mut self, input: Var, mode: PoolMode) -> Result<Var> {
        let (_, h, w, _) = nhwc(self.shape(input), "global_pool")?;
        self.pool_rect(input, (h, w), mode)
    }

    fn pool_rect(&mut self, input: Var, window: (usize, usize), mode: PoolMode) -> Result<Var> {
        let in_shape = self.shape(input).to_vec();
        let (n, h, w, c) = nhwc(&in_shape, "pool2d")?;
        let (wh, ww) = window;
        if wh == 0 || ww == 0 || h % wh != 0 || w % ww != 0 {
            return shape_err(format!(
                "pool window {wh}x{ww} does not divide spatial extent {h}x{w}"
            ));
        }
        let (ho, wo) = (h / wh, w / ww);
        let x = self.value(input).data();
        let mut out = vec![0.0f32; n * ho * wo * c];
        let mut argmax = Vec::new();
        if mode == PoolMode::Max {
            argmax = vec![0u32; out.len()];
        }
        let inv = 1.0 / (wh * ww) as f64;
        let mut acc = vec![0.0f64; c];
        for b in 0..n {
            for oy in 0..ho {
                for ox in 0..wo {
                    let o = ((b * ho + oy) * wo + ox) * c;
                    match mode {
                        PoolMode::Avg => {
                            acc.fill(0.0);
                            for dy in 0..wh {
                                for dx in 0..ww {
                                    let i = ((b * h + oy * wh + dy) * w + ox * ww + dx) * c;
                                    for (a, v) in acc.iter_mut().zip(&x[i..i + c]) {
                                        *a += *v as f64;
                                    }
                                }
                            }
                            for (dst, a) in out[o..o + c].iter_mut().zip(&acc) {
                                *dst = (a * inv) as f32;
                            }
                        }
                        PoolMode::Max => {
                            for ch in 0..c {
                                let mut best = f32::NEG_INFINITY;
                                let mut best_i = 0usize;
                                for dy in 0..wh {
                                    for dx in 0..ww {
                                        let i =
                                            ((b * h + oy * wh + dy) * w + ox * ww + dx) * c + ch;
                                        // first maximum wins; NaN propagates
                                        if x[i] > best || x[i].is_nan() && !best.is_nan() {
                                            best = x[i];
                                            best_i = i;
                                        }
                                    }
                                }
                                if best == f32::NEG_INFINITY {
                                    best_i = ((b * h + oy * wh) * w + ox * ww) * c + ch;
                                }
                                out[o + ch] = best;
                                argmax[o + ch] = best_i as u32;
                            }
                        }
                    }
                }
            }
        }
        let mut shape = in_shape.clone();
        let r = shape.len();
        shape[r - 3] = ho;
        shape[r - 2] = wo;
        let value = Tensor::new(shape, out)?;
        Ok(self.push(
            value,
            Op::Pool {
                input,
                window,
                mode,
                argmax,
            },
        ))
    }

    /// Reduce over the channel (last) axis, keeping it with extent 1.
    pub fn channel_reduce(&mut self, input: Var, mode: PoolMode) -> Result<Var> {
        let in_shape = self.shape(input).to_vec();
        let c = *in_shape.last().expect("tensors have rank >= 1");
        let x = self.value(input).data();
        let rows = x.len() / c;
        let mut out = vec![0.0f32; rows];
        let mut argmax = Vec::new();
        match mode {
            PoolMode::Avg => {
                for (o, row) in out.iter_mut().zip(x.chunks(c)) {
                    *o = (row.iter().map(|&v| v as f64).sum::<f64>() / c as f64) as f32;
                }
            }
            PoolMode::Max => {
                argmax = vec![0u32; rows];
                for (r, row) in x.chunks(c).enumerate() {
                    let (mut bi, mut bv) = (0usize, row[0]);
                    for (i, &v) in row.iter().enumerate().skip(1) {
                        if v > bv || v.is_nan() && !bv.is_nan() {
                            bi = i;
                            bv = v;
                        }
                    }
                    out[r] = bv;
                    argmax[r] = (r * c + bi) as u32;
                }
            }
        }
        let mut shape = in_shape;
        *shape.last_mut().unwrap() = 1;
        let value = Tensor::new(shape, out)?;
        Ok(self.push(
            value,
            Op::ChannelReduce {
                input,
                mode,
                argmax,
            },
        ))
    }
}

pub(super) fn backward_pool(
    input: Var,
    window: (usize, usize),
    mode: PoolMode,
    argmax: &[u32],
    out: &Tensor,
    grad: &[f32],
    sink: &mut GradSink<'_>,
) {
    let in_shape = sink.value(input).shape().to_vec();
    let Some(dx) = sink.slot(input) else { return };
    match mode {
        PoolMode::Max => {
            for (g, &i) in grad.iter().zip(argmax) {
                dx[i as usize] += g;
            }
        }
        PoolMode::Avg => {
            let (n, h, w, c) = nhwc(&in_shape, "pool2d").expect("validated in forward");
            let (wh, ww) = window;
            let (ho, wo) = (h / wh, w / ww);
            debug_assert_eq!(out.len(), n * ho * wo * c);
            let inv = 1.0 / (wh * ww) as f32;
            for b in 0..n {
                for oy in 0..ho {
                    for ox in 0..wo {
                        let o = ((b * ho + oy) * wo + ox) * c;
                        for dy in 0..wh {
                            for dxp in 0..ww {
                                let i = ((b * h + oy * wh + dy) * w + ox * ww + dxp) * c;
                                for ch in 0..c {
                                    dx[i + ch] += grad[o + ch] * inv;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

pub(super) fn backward_channel(
    input: Var,
    mode: PoolMode,
    argmax: &[u32],
    grad: &[f32],
    sink: &mut GradSink<'_>,
) {
    let c = *sink.value(input).shape().last().unwrap();
    let Some(dx) = sink.slot(input) else { return };
    match mode {
        PoolMode::Max => {
            for (g, &i) in grad.iter().zip(argmax) {
                dx[i as usize] += g;
            }
        }
        PoolMode::Avg => {
            let inv = 1.0 / c as f32;
            for (row, g) in dx.chunks_mut(c).zip(grad) {
                row.iter_mut().for_each(|v| *v += g * inv);
            }
        }
    }
}
