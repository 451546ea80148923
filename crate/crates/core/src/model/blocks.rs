//! Network building blocks over batched `N×H×W×C` tensors.

use crate::error::{shape_err, Result};
use crate::tensor::{lstm_cell, LstmWeights, PoolMode, Tape, Tensor, Var};

/// Shared channel MLP (`C → hidden → C`, with biases) and the 7×7 spatial
/// kernel (`7×7×2×1`, no bias).
#[derive(Clone, Copy, Debug)]
pub struct CbamWeights {
    pub w1: Var,
    pub b1: Var,
    pub w2: Var,
    pub b2: Var,
    pub spatial: Var,
}

/// Bottleneck weights, `W1: C × C/r` and `W2: C/r × C`, no biases.
#[derive(Clone, Copy, Debug)]
pub struct SeWeights {
    pub w1: Var,
    pub w2: Var,
}

#[derive(Clone, Copy, Debug)]
pub struct HeadWeights {
    /// `1×1×1×1` downsampling kernel and its `[1]` bias.
    pub down_kernel: Var,
    pub down_bias: Var,
    pub fc_w: Var,
    pub fc_b: Var,
    pub out_w: Var,
    pub out_b: Var,
}

fn nhwc(tape: &Tape, x: Var, what: &str) -> Result<[usize; 4]> {
    match *tape.shape(x) {
        [n, h, w, c] => Ok([n, h, w, c]),
        ref s => shape_err(format!("{what} expects NxHxWxC, got {s:?}")),
    }
}

fn pooled_vector(tape: &mut Tape, x: Var, mode: PoolMode) -> Result<Var> {
    let [n, _, _, c] = nhwc(tape, x, "global pooling")?;
    let p = tape.global_pool(x, mode)?;
    tape.reshape(p, &[n, c])
}

fn channel_mlp(tape: &mut Tape, v: Var, w: &CbamWeights) -> Result<Var> {
    let h = tape.linear(v, w.w1, Some(w.b1))?;
    let h = tape.relu(h);
    tape.linear(h, w.w2, Some(w.b2))
}

/// `M_C = σ(MLP(avgpool(F)) + MLP(maxpool(F)))`, shaped `N×1×1×C`.
pub fn channel_attention(tape: &mut Tape, x: Var, w: &CbamWeights) -> Result<Var> {
    let [n, _, _, c] = nhwc(tape, x, "channel attention")?;
    let avg = pooled_vector(tape, x, PoolMode::Avg)?;
    let max = pooled_vector(tape, x, PoolMode::Max)?;
    let a = channel_mlp(tape, avg, w)?;
    let b = channel_mlp(tape, max, w)?;
    let s = tape.add(a, b)?;
    let m = tape.sigmoid(s);
    tape.reshape(m, &[n, 1, 1, c])
}

/// `M_S = σ(conv7×7([mean_c(F); max_c(F)]))`, shaped `N×H×W×1`.
pub fn spatial_attention(tape: &mut Tape, x: Var, kernel: Var) -> Result<Var> {
    nhwc(tape, x, "spatial attention")?;
    let mean = tape.channel_reduce(x, PoolMode::Avg)?;
    let max = tape.channel_reduce(x, PoolMode::Max)?;
    let both = tape.concat(&[mean, max], 3)?;
    let pad = tape.shape(kernel)[0] / 2;
    let s = tape.conv2d(both, kernel, None, 1, pad)?;
    Ok(tape.sigmoid(s))
}

/// Channel gate, then spatial gate on the channel-gated map.
pub fn cbam_apply(tape: &mut Tape, x: Var, w: &CbamWeights) -> Result<Var> {
    let mc = channel_attention(tape, x, w)?;
    let f = tape.mul(x, mc)?;
    let ms = spatial_attention(tape, f, w.spatial)?;
    tape.mul(f, ms)
}

/// `ReLU(F + conv3×3(F))`; with `residual = false`, `ReLU(conv3×3(F))`.
pub fn residual_fusion(
    tape: &mut Tape,
    x: Var,
    kernel: Var,
    bias: Var,
    residual: bool,
) -> Result<Var> {
    let [_, _, _, c] = nhwc(tape, x, "residual fusion")?;
    if tape.shape(kernel) != [3, 3, c, c] {
        return shape_err(format!(
            "fusion kernel must be 3x3x{c}x{c}, got {:?}",
            tape.shape(kernel)
        ));
    }
    let y = tape.conv2d(x, kernel, Some(bias), 1, 1)?;
    let y = if residual { tape.add(x, y)? } else { y };
    Ok(tape.relu(y))
}

/// Squeeze (spatial mean), excite (`σ(W2·ReLU(W1·s))`), rescale.
pub fn se_block(tape: &mut Tape, u: Var, w: &SeWeights) -> Result<Var> {
    let [n, _, _, c] = nhwc(tape, u, "SE block")?;
    let hidden = match *tape.shape(w.w1) {
        [rows, k] if rows == c => k,
        ref s => return shape_err(format!("SE W1 must be {c}xk, got {s:?}")),
    };
    if tape.shape(w.w2) != [hidden, c] {
        return shape_err(format!(
            "SE W2 must be {hidden}x{c}, got {:?}",
            tape.shape(w.w2)
        ));
    }
    let s = pooled_vector(tape, u, PoolMode::Avg)?;
    let z = tape.linear(s, w.w1, None)?;
    let z = tape.relu(z);
    let e = tape.linear(z, w.w2, None)?;
    let e = tape.sigmoid(e);
    let e = tape.reshape(e, &[n, 1, 1, c])?;
    tape.mul(u, e)
}

/// Run the LSTM over the sequence left to right and, when `right` is
/// given, a second LSTM right to left. Step `t` of the result is
/// `[h_left_t, h_right_t]` (or `h_left_t` alone).
pub fn bilstm(
    tape: &mut Tape,
    seq: &[Var],
    left: &LstmWeights,
    right: Option<&LstmWeights>,
) -> Result<Vec<Var>> {
    if seq.len() != super::FRAMES {
        return shape_err(format!(
            "sequence must have {} steps, got {}",
            super::FRAMES,
            seq.len()
        ));
    }
    let run = |tape: &mut Tape,
               w: &LstmWeights,
               order: &mut dyn Iterator<Item = usize>|
     -> Result<Vec<(usize, Var)>> {
        let d = tape.shape(w.wh)[0];
        let mut state_shape = tape.shape(seq[0]).to_vec();
        *state_shape.last_mut().expect("rank >= 1") = d;
        let mut h = tape.constant(Tensor::zeros(&state_shape));
        let mut c = tape.constant(Tensor::zeros(&state_shape));
        let mut out = Vec::with_capacity(seq.len());
        for t in order {
            (h, c) = lstm_cell(tape, seq[t], h, c, w)?;
            out.push((t, h));
        }
        Ok(out)
    };
    let mut fwd = run(tape, left, &mut (0..seq.len()))?;
    let Some(right) = right else {
        return Ok(fwd.into_iter().map(|(_, h)| h).collect());
    };
    let mut bwd = run(tape, right, &mut (0..seq.len()).rev())?;
    bwd.reverse();
    fwd.iter_mut()
        .zip(bwd)
        .map(|(&mut (_, hf), (_, hb))| {
            let axis = tape.shape(hf).len() - 1;
            tape.concat(&[hf, hb], axis)
        })
        .collect()
}

/// Strided 1-D downsampling of the spatial features, concatenation with the
/// temporal features, `FC + ReLU`, output layer and sigmoid.
pub fn fusion_head(
    tape: &mut Tape,
    spatial: Var,
    temporal: Var,
    w: &HeadWeights,
    stride: usize,
) -> Result<Var> {
    let [n, len] = *tape.shape(spatial) else {
        return shape_err(format!(
            "head spatial input must be NxL, got {:?}",
            tape.shape(spatial)
        ));
    };
    let column = tape.reshape(spatial, &[n, len, 1, 1])?;
    let down = tape.conv2d(column, w.down_kernel, Some(w.down_bias), stride, 0)?;
    let down_len = tape.shape(down)[1];
    let down = tape.reshape(down, &[n, down_len])?;
    let joined = tape.concat(&[down, temporal], 1)?;
    let h = tape.linear(joined, w.fc_w, Some(w.fc_b))?;
    let h = tape.relu(h);
    let logits = tape.linear(h, w.out_w, Some(w.out_b))?;
    Ok(tape.sigmoid(logits))
}
