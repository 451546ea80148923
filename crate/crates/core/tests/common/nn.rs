//! Straight-line f64 re-implementations of the network blocks, written
//! directly from the block definitions without the tape.

use std::collections::HashMap;

use stiln::model::{ModelConfig, NormKind, Stiln};
use stiln::tensor::{Tensor, NORM_EPS};

/// Shaped f64 array used for weights, so oracles can be perturbed in f64.
#[derive(Clone, Debug)]
pub struct Arr {
    pub shape: Vec<usize>,
    pub v: Vec<f64>,
}

impl From<&Tensor> for Arr {
    fn from(t: &Tensor) -> Self {
        Self {
            shape: t.shape().to_vec(),
            v: t.data().iter().map(|&x| x as f64).collect(),
        }
    }
}

/// Row-major NHWC buffer in f64.
#[derive(Clone, Debug)]
pub struct Map {
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub v: Vec<f64>,
}

impl Map {
    pub fn zeros(n: usize, h: usize, w: usize, c: usize) -> Self {
        Self {
            n,
            h,
            w,
            c,
            v: vec![0.0; n * h * w * c],
        }
    }

    pub fn from_tensor(t: &Tensor) -> Self {
        let &[n, h, w, c] = t.shape() else {
            panic!("rank 4 expected")
        };
        Self {
            n,
            h,
            w,
            c,
            v: t.data().iter().map(|&x| x as f64).collect(),
        }
    }

    pub fn from_arr(a: &Arr) -> Self {
        let &[n, h, w, c] = &a.shape[..] else {
            panic!("rank 4 expected")
        };
        Self {
            n,
            h,
            w,
            c,
            v: a.v.clone(),
        }
    }

    pub fn at(&self, n: usize, y: usize, x: usize, c: usize) -> f64 {
        self.v[((n * self.h + y) * self.w + x) * self.c + c]
    }

    pub fn at_mut(&mut self, n: usize, y: usize, x: usize, c: usize) -> &mut f64 {
        let i = ((n * self.h + y) * self.w + x) * self.c + c;
        &mut self.v[i]
    }

    pub fn max_abs_diff(&self, t: &Tensor) -> f64 {
        assert_eq!(t.shape(), [self.n, self.h, self.w, self.c]);
        self.v
            .iter()
            .zip(t.data())
            .map(|(a, &b)| (a - b as f64).abs())
            .fold(0.0, f64::max)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

fn w(t: &Arr) -> Vec<f64> {
    t.v.clone()
}

/// Cross-correlation with a `k×k×cin×cout` kernel, stride 1.
pub fn conv(x: &Map, kernel: &Arr, bias: Option<&Arr>, pad: usize) -> Map {
    let &[k, _, cin, cout] = &kernel.shape[..] else {
        panic!("kernel rank")
    };
    assert_eq!(cin, x.c);
    let kw = w(kernel);
    let b = bias.map(w).unwrap_or_else(|| vec![0.0; cout]);
    let (oh, ow) = (x.h + 2 * pad + 1 - k, x.w + 2 * pad + 1 - k);
    let mut out = Map::zeros(x.n, oh, ow, cout);
    for n in 0..x.n {
        for oy in 0..oh {
            for ox in 0..ow {
                for co in 0..cout {
                    let mut acc = b[co];
                    for ky in 0..k {
                        for kx in 0..k {
                            let (iy, ix) = (
                                (oy + ky) as isize - pad as isize,
                                (ox + kx) as isize - pad as isize,
                            );
                            if iy < 0 || ix < 0 || iy >= x.h as isize || ix >= x.w as isize {
                                continue;
                            }
                            for ci in 0..cin {
                                acc += x.at(n, iy as usize, ix as usize, ci)
                                    * kw[((ky * k + kx) * cin + ci) * cout + co];
                            }
                        }
                    }
                    *out.at_mut(n, oy, ox, co) = acc;
                }
            }
        }
    }
    out
}

/// `y = x·W + b` for a row vector `x` and `W: K×N`.
pub fn dense(x: &[f64], weight: &Arr, bias: Option<&Arr>) -> Vec<f64> {
    let &[k, n] = &weight.shape[..] else {
        panic!("weight rank")
    };
    assert_eq!(x.len(), k);
    let wv = w(weight);
    let mut y = bias.map(w).unwrap_or_else(|| vec![0.0; n]);
    for (i, &xi) in x.iter().enumerate() {
        for (j, yj) in y.iter_mut().enumerate() {
            *yj += xi * wv[i * n + j];
        }
    }
    y
}

fn channel_pools(x: &Map, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut avg = vec![0.0; x.c];
    let mut max = vec![f64::NEG_INFINITY; x.c];
    for y in 0..x.h {
        for xx in 0..x.w {
            for c in 0..x.c {
                let v = x.at(n, y, xx, c);
                avg[c] += v;
                max[c] = max[c].max(v);
            }
        }
    }
    avg.iter_mut().for_each(|a| *a /= (x.h * x.w) as f64);
    (avg, max)
}

pub struct CbamParams<'a> {
    pub w1: &'a Arr,
    pub b1: &'a Arr,
    pub w2: &'a Arr,
    pub b2: &'a Arr,
    pub spatial: &'a Arr,
}

/// Per-sample channel gates, `[n][c]`.
pub fn channel_gates(x: &Map, p: &CbamParams) -> Vec<Vec<f64>> {
    let mlp = |v: &[f64]| {
        let h: Vec<f64> = dense(v, p.w1, Some(p.b1)).into_iter().map(relu).collect();
        dense(&h, p.w2, Some(p.b2))
    };
    (0..x.n)
        .map(|n| {
            let (avg, max) = channel_pools(x, n);
            mlp(&avg)
                .iter()
                .zip(mlp(&max))
                .map(|(a, b)| sigmoid(a + b))
                .collect()
        })
        .collect()
}

/// Per-pixel spatial gates as an `N×H×W×1` map.
pub fn spatial_gates(x: &Map, kernel: &Arr) -> Map {
    let &[k, _, _, _] = &kernel.shape[..] else {
        panic!()
    };
    let kw = w(kernel);
    let pad = k / 2;
    let mut out = Map::zeros(x.n, x.h, x.w, 1);
    for n in 0..x.n {
        for oy in 0..x.h {
            for ox in 0..x.w {
                let mut acc = 0.0;
                for ky in 0..k {
                    for kx in 0..k {
                        let (iy, ix) = (
                            oy as isize + ky as isize - pad as isize,
                            ox as isize + kx as isize - pad as isize,
                        );
                        if iy < 0 || ix < 0 || iy >= x.h as isize || ix >= x.w as isize {
                            continue;
                        }
                        let (iy, ix) = (iy as usize, ix as usize);
                        let vals: Vec<f64> = (0..x.c).map(|c| x.at(n, iy, ix, c)).collect();
                        let mean = vals.iter().sum::<f64>() / x.c as f64;
                        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        acc += mean * kw[(ky * k + kx) * 2] + max * kw[(ky * k + kx) * 2 + 1];
                    }
                }
                *out.at_mut(n, oy, ox, 0) = sigmoid(acc);
            }
        }
    }
    out
}

/// Channel gating followed by spatial gating of the channel-gated map.
pub fn cbam(x: &Map, p: &CbamParams) -> Map {
    let gates = channel_gates(x, p);
    let mut f = x.clone();
    for n in 0..x.n {
        for y in 0..x.h {
            for xx in 0..x.w {
                for c in 0..x.c {
                    *f.at_mut(n, y, xx, c) *= gates[n][c];
                }
            }
        }
    }
    let s = spatial_gates(&f, p.spatial);
    let mut out = f.clone();
    for n in 0..x.n {
        for y in 0..x.h {
            for xx in 0..x.w {
                for c in 0..x.c {
                    *out.at_mut(n, y, xx, c) = f.at(n, y, xx, c) * s.at(n, y, xx, 0);
                }
            }
        }
    }
    out
}

pub fn residual_fusion(x: &Map, kernel: &Arr, bias: &Arr, residual: bool) -> Map {
    let y = conv(x, kernel, Some(bias), 1);
    let mut out = y.clone();
    for (o, (&a, &b)) in out.v.iter_mut().zip(x.v.iter().zip(&y.v)) {
        *o = relu(if residual { a + b } else { b });
    }
    out
}

/// Squeeze, excite, scale.
pub fn se(x: &Map, w1: &Arr, w2: &Arr) -> Map {
    let mut out = x.clone();
    for n in 0..x.n {
        let (s, _) = channel_pools(x, n);
        let z: Vec<f64> = dense(&s, w1, None).into_iter().map(relu).collect();
        let e: Vec<f64> = dense(&z, w2, None).into_iter().map(sigmoid).collect();
        for y in 0..x.h {
            for xx in 0..x.w {
                for c in 0..x.c {
                    *out.at_mut(n, y, xx, c) *= e[c];
                }
            }
        }
    }
    out
}

pub struct LstmParams<'a> {
    pub wx: &'a Arr,
    pub wh: &'a Arr,
    pub bias: &'a Arr,
}

/// Hidden states of a unidirectional LSTM over `seq` (gate order i, f, g, o).
pub fn lstm(seq: &[Vec<f64>], p: &LstmParams) -> Vec<Vec<f64>> {
    let d = p.wh.shape[0];
    let (mut h, mut c) = (vec![0.0; d], vec![0.0; d]);
    let mut out = Vec::new();
    for x in seq {
        let a = dense(x, p.wx, Some(p.bias));
        let r = dense(&h, p.wh, None);
        for j in 0..d {
            let i = sigmoid(a[j] + r[j]);
            let f = sigmoid(a[d + j] + r[d + j]);
            let g = (a[2 * d + j] + r[2 * d + j]).tanh();
            let o = sigmoid(a[3 * d + j] + r[3 * d + j]);
            c[j] = f * c[j] + i * g;
            h[j] = o * c[j].tanh();
        }
        out.push(h.clone());
    }
    out
}

/// Left pass and right pass concatenated per step.
pub fn bilstm(seq: &[Vec<f64>], left: &LstmParams, right: Option<&LstmParams>) -> Vec<Vec<f64>> {
    let fwd = lstm(seq, left);
    let Some(right) = right else { return fwd };
    let rev: Vec<Vec<f64>> = seq.iter().rev().cloned().collect();
    let mut bwd = lstm(&rev, right);
    bwd.reverse();
    fwd.into_iter()
        .zip(bwd)
        .map(|(mut a, b)| {
            a.extend(b);
            a
        })
        .collect()
}

fn instance_norm(x: &Map, gamma: &Arr, beta: &Arr) -> Map {
    let (g, b) = (w(gamma), w(beta));
    let mut out = x.clone();
    let m = (x.h * x.w) as f64;
    for n in 0..x.n {
        for c in 0..x.c {
            let vals: Vec<f64> = (0..x.h)
                .flat_map(|y| (0..x.w).map(move |xx| (y, xx)))
                .map(|(y, xx)| x.at(n, y, xx, c))
                .collect();
            let mean = vals.iter().sum::<f64>() / m;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
            let inv = 1.0 / (var + NORM_EPS as f64).sqrt();
            for y in 0..x.h {
                for xx in 0..x.w {
                    let v = out.at_mut(n, y, xx, c);
                    *v = (*v - mean) * inv * g[c] + b[c];
                }
            }
        }
    }
    out
}

fn batch_norm_infer(x: &Map, gamma: &Arr, beta: &Arr, mean: &Arr, var: &Arr) -> Map {
    let (g, b, m, v) = (w(gamma), w(beta), w(mean), w(var));
    let mut out = x.clone();
    for (i, o) in out.v.iter_mut().enumerate() {
        let c = i % x.c;
        *o = (*o - m[c]) / (v[c] + NORM_EPS as f64).sqrt() * g[c] + b[c];
    }
    out
}

fn maxpool2(x: &Map) -> Map {
    let mut out = Map::zeros(x.n, x.h / 2, x.w / 2, x.c);
    for n in 0..x.n {
        for y in 0..x.h / 2 {
            for xx in 0..x.w / 2 {
                for c in 0..x.c {
                    let m = [(0, 0), (0, 1), (1, 0), (1, 1)]
                        .iter()
                        .map(|&(dy, dx)| x.at(n, 2 * y + dy, 2 * xx + dx, c))
                        .fold(f64::NEG_INFINITY, f64::max);
                    *out.at_mut(n, y, xx, c) = m;
                }
            }
        }
    }
    out
}

/// Every named parameter and buffer of `model` as f64 arrays.
pub fn param_map(model: &Stiln) -> HashMap<String, Arr> {
    let store = model.params();
    store
        .ids()
        .map(|id| (store.name(id).to_string(), Arr::from(store.value(id))))
        .collect()
}

/// Inference-mode forward pass of a whole model from its named parameters.
/// `frames` is `B×6×32×32×5`; returns `B` probability pairs.
pub fn stiln_forward(model: &Stiln, frames: &Tensor) -> Vec<[f64; 2]> {
    forward_with(model.config(), &param_map(model), frames)
}

/// Mean binary cross-entropy in f64 (no clamping).
pub fn bce(probs: &[[f64; 2]], targets: &[[f64; 2]]) -> f64 {
    let n = (probs.len() * 2) as f64;
    probs
        .iter()
        .flatten()
        .zip(targets.iter().flatten())
        .map(|(&p, &y)| -(y * p.ln() + (1.0 - y) * (1.0 - p).ln()))
        .sum::<f64>()
        / n
}

pub fn forward_with(
    cfg: &ModelConfig,
    params: &HashMap<String, Arr>,
    frames: &Tensor,
) -> Vec<[f64; 2]> {
    let p = |name: &str| params.get(name).unwrap_or_else(|| panic!("missing {name}"));
    let v = cfg.variant;
    let &[b, t, hh, ww, cc] = frames.shape() else {
        panic!()
    };
    let mut x = Map {
        n: b * t,
        h: hh,
        w: ww,
        c: cc,
        v: frames.data().iter().map(|&x| x as f64).collect(),
    };

    if v.uses_cbam() {
        x = cbam(
            &x,
            &CbamParams {
                w1: p("cbam.mlp1.weight"),
                b1: p("cbam.mlp1.bias"),
                w2: p("cbam.mlp2.weight"),
                b2: p("cbam.mlp2.bias"),
                spatial: p("cbam.spatial.weight"),
            },
        );
    }
    let kernels = [5, 5, 3, 3, 3];
    for (i, k) in kernels.iter().enumerate() {
        let n = i + 1;
        x = conv(&x, p(&format!("conv{n}.weight")), None, k / 2);
        let (g, be) = (p(&format!("norm{n}.weight")), p(&format!("norm{n}.bias")));
        let kind = if n <= 2 {
            v.early_norm()
        } else {
            NormKind::Batch
        };
        x = match kind {
            NormKind::Instance => instance_norm(&x, g, be),
            NormKind::Batch => batch_norm_infer(
                &x,
                g,
                be,
                p(&format!("norm{n}.running_mean")),
                p(&format!("norm{n}.running_var")),
            ),
        };
        x.v.iter_mut().for_each(|e| *e = relu(*e));
        if n == 2 || n == 4 {
            x = maxpool2(&x);
        }
    }
    x = residual_fusion(&x, p("fusion.weight"), p("fusion.bias"), v.residual());
    if v.uses_se() {
        x = se(&x, p("se.fc1.weight"), p("se.fc2.weight"));
    }

    let d = x.h * x.w * x.c;
    let fwd = LstmParams {
        wx: p("lstm.fwd.wx"),
        wh: p("lstm.fwd.wh"),
        bias: p("lstm.fwd.bias"),
    };
    let bwd = v.bidirectional().then(|| LstmParams {
        wx: p("lstm.bwd.wx"),
        wh: p("lstm.bwd.wh"),
        bias: p("lstm.bwd.bias"),
    });
    let k6 = p("conv6.weight").v[0];
    let b6 = p("conv6.bias").v[0];
    let stride = cfg.head_downsample_stride;
    (0..b)
        .map(|s| {
            let flat = &x.v[s * t * d..(s + 1) * t * d];
            let seq: Vec<Vec<f64>> = flat.chunks(d).map(<[f64]>::to_vec).collect();
            let temporal = bilstm(&seq, &fwd, bwd.as_ref());
            // The head downsamples each frame's features in channel-major order.
            let side = x.h;
            let mut chw = Vec::with_capacity(t * d);
            for f in 0..t {
                for c in 0..x.c {
                    for px in 0..side * side {
                        chw.push(flat[f * d + px * x.c + c]);
                    }
                }
            }
            let mut head: Vec<f64> = chw.iter().step_by(stride).map(|&e| k6 * e + b6).collect();
            head.extend(temporal.into_iter().flatten());
            let h: Vec<f64> = dense(&head, p("fc.weight"), Some(p("fc.bias")))
                .into_iter()
                .map(relu)
                .collect();
            let o = dense(&h, p("out.weight"), Some(p("out.bias")));
            [sigmoid(o[0]), sigmoid(o[1])]
        })
        .collect()
}
