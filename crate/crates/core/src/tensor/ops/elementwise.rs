use serde::{Deserialize, Serialize};

use super::Op;
use crate::error::{shape_err, Result};
use crate::tensor::tape::{GradSink, Var};
use crate::tensor::{Tape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn apply(self, x: f32) -> f32 {
        match self {
            Activation::Relu => {
                if x > 0.0 || x.is_nan() {
                    x
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
        }
    }
}

#[inline]
pub(crate) fn sigmoid(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum BinaryKind {
    Add,
    Sub,
    Mul,
}

/// Strides of `shape` broadcast against `out` (0 along broadcast axes).
fn broadcast_strides(shape: &[usize], out: &[usize]) -> Vec<usize> {
    let mut strides = vec![0; out.len()];
    let mut acc = 1;
    for d in (0..out.len()).rev() {
        if shape[d] != 1 || out[d] == 1 {
            strides[d] = acc;
        }
        acc *= shape[d];
    }
    strides
}

/// Calls `f(out_index, a_offset, b_offset)` for every output element.
fn for_each_broadcast(
    out: &[usize],
    sa: &[usize],
    sb: &[usize],
    mut f: impl FnMut(usize, usize, usize),
) {
    let rank = out.len();
    let total: usize = out.iter().product();
    let mut idx = vec![0usize; rank];
    let (mut ia, mut ib) = (0usize, 0usize);
    for o in 0..total {
        f(o, ia, ib);
        for d in (0..rank).rev() {
            idx[d] += 1;
            ia += sa[d];
            ib += sb[d];
            if idx[d] < out[d] {
                break;
            }
            ia -= sa[d] * out[d];
            ib -= sb[d] * out[d];
            idx[d] = 0;
        }
    }
}

fn broadcast_shape(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    if a.len() != b.len() {
        return shape_err(format!("cannot broadcast {a:?} with {b:?}: ranks differ"));
    }
    a.iter()
        .zip(b)
        .map(|(&x, &y)| match (x, y) {
            _ if x == y => Ok(x),
            (1, y) => Ok(y),
            (x, 1) => Ok(x),
            _ => shape_err(format!("cannot broadcast {a:?} with {b:?}")),
        })
        .collect()
}

impl Tape {
    pub fn activation(&mut self, input: Var, kind: Activation) -> Var {
        let x = self.value(input);
        let data = x.data().iter().map(|&v| kind.apply(v)).collect();
        let value = Tensor::new(x.shape().to_vec(), data).expect("same shape");
        self.push(value, Op::Act { input, kind })
    }

    pub fn relu(&mut self, input: Var) -> Var {
        self.activation(input, Activation::Relu)
    }

    pub fn sigmoid(&mut self, input: Var) -> Var {
        self.activation(input, Activation::Sigmoid)
    }

    pub fn tanh(&mut self, input: Var) -> Var {
        self.activation(input, Activation::Tanh)
    }

    fn binary(&mut self, a: Var, b: Var, kind: BinaryKind) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let out_shape = broadcast_shape(&sa, &sb)?;
        let (xa, xb) = (self.value(a).data(), self.value(b).data());
        let op = |p: f32, q: f32| match kind {
            BinaryKind::Add => p + q,
            BinaryKind::Sub => p - q,
            BinaryKind::Mul => p * q,
        };
        let data = if sa == sb {
            xa.iter().zip(xb).map(|(&p, &q)| op(p, q)).collect()
        } else {
            let mut out = vec![0.0f32; out_shape.iter().product()];
            let (ta, tb) = (
                broadcast_strides(&sa, &out_shape),
                broadcast_strides(&sb, &out_shape),
            );
            for_each_broadcast(&out_shape, &ta, &tb, |o, i, j| out[o] = op(xa[i], xb[j]));
            out
        };
        let value = Tensor::new(out_shape, data)?;
        Ok(self.push(value, Op::Binary { a, b, kind }))
    }

    /// Elementwise sum; extents of 1 broadcast.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, BinaryKind::Add)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, BinaryKind::Sub)
    }

    /// Elementwise product; extents of 1 broadcast (channel and spatial gates).
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, BinaryKind::Mul)
    }

    pub fn scale(&mut self, input: Var, factor: f32) -> Var {
        let x = self.value(input);
        let data = x.data().iter().map(|v| v * factor).collect();
        let value = Tensor::new(x.shape().to_vec(), data).expect("same shape");
        self.push(value, Op::Scale { input, factor })
    }
}

pub(super) fn backward_act(
    input: Var,
    kind: Activation,
    out: &Tensor,
    grad: &[f32],
    sink: &mut GradSink<'_>,
) {
    let y = out.data();
    match kind {
        Activation::Relu => {
            let (x, slot) = sink.value_and_slot(input, input);
            let Some(dx) = slot else { return };
            // `x` and `dx` refer to different storage (value vs gradient).
            let x = x.data();
            for ((d, g), v) in dx.iter_mut().zip(grad).zip(x) {
                if *v > 0.0 {
                    *d += g;
                }
            }
        }
        Activation::Sigmoid => {
            if let Some(dx) = sink.slot(input) {
                for ((d, g), y) in dx.iter_mut().zip(grad).zip(y) {
                    *d += g * y * (1.0 - y);
                }
            }
        }
        Activation::Tanh => {
            if let Some(dx) = sink.slot(input) {
                for ((d, g), y) in dx.iter_mut().zip(grad).zip(y) {
                    *d += g * (1.0 - y * y);
                }
            }
        }
    }
}

pub(super) fn backward_binary(
    a: Var,
    b: Var,
    kind: BinaryKind,
    out: &Tensor,
    grad: &[f32],
    sink: &mut GradSink<'_>,
) {
    let out_shape = out.shape();
    let sa = sink.value(a).shape().to_vec();
    let sb = sink.value(b).shape().to_vec();
    let ta = broadcast_strides(&sa, out_shape);
    let tb = broadcast_strides(&sb, out_shape);
    let same = sa == sb;

    // Gradient for one operand, accumulated in f64 when it was broadcast.
    let operand_grad = |sink: &GradSink<'_>, which_a: bool| -> Vec<f64> {
        let (self_shape, other) = if which_a { (&sa, b) } else { (&sb, a) };
        let n: usize = self_shape.iter().product();
        let mut acc = vec![0.0f64; n];
        let other_vals = sink.value(other).data();
        let sign = if !which_a && kind == BinaryKind::Sub {
            -1.0
        } else {
            1.0
        };
        for_each_broadcast(out_shape, &ta, &tb, |o, i, j| {
            let (mine, theirs) = if which_a { (i, j) } else { (j, i) };
            let local = match kind {
                BinaryKind::Add | BinaryKind::Sub => sign,
                BinaryKind::Mul => other_vals[theirs] as f64,
            };
            acc[mine] += grad[o] as f64 * local;
        });
        acc
    };

    if same {
        match kind {
            BinaryKind::Add => {
                sink.add(a, grad);
                sink.add(b, grad);
            }
            BinaryKind::Sub => {
                sink.add(a, grad);
                if let Some(db) = sink.slot(b) {
                    for (d, g) in db.iter_mut().zip(grad) {
                        *d -= g;
                    }
                }
            }
            BinaryKind::Mul => {
                let (bv, da) = sink.value_and_slot(b, a);
                if let Some(da) = da {
                    for ((d, g), v) in da.iter_mut().zip(grad).zip(bv.data()) {
                        *d += g * v;
                    }
                }
                let (av, db) = sink.value_and_slot(a, b);
                if let Some(db) = db {
                    for ((d, g), v) in db.iter_mut().zip(grad).zip(av.data()) {
                        *d += g * v;
                    }
                }
            }
        }
        return;
    }

    for which_a in [true, false] {
        let target = if which_a { a } else { b };
        if !sink_requires(sink, target) {
            continue;
        }
        let acc = operand_grad(&*sink, which_a);
        if let Some(slot) = sink.slot(target) {
            for (s, v) in slot.iter_mut().zip(acc) {
                *s += v as f32;
            }
        }
    }
}

fn sink_requires(sink: &mut GradSink<'_>, v: Var) -> bool {
    sink.slot(v).is_some()
}
