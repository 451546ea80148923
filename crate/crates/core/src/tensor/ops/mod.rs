//! Differentiable operations. Each submodule adds forward methods to
//! [`Tape`](super::Tape) and provides the matching backward rule.

mod conv;
mod elementwise;
mod linear;
mod loss;
mod norm;
mod pool;
mod shape;

pub use elementwise::Activation;
pub use loss::PROB_CLAMP;
pub use norm::{RunningStats, BN_MOMENTUM, NORM_EPS};
pub use pool::PoolMode;

use super::params::ParamId;
use super::tape::{GradSink, Var};
use super::Tensor;

pub(crate) use elementwise::BinaryKind;
pub(crate) use norm::NormKind;

pub(crate) enum Op {
    Leaf,
    Param(ParamId),
    Conv2d {
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        stride: usize,
        pad: usize,
    },
    Pool {
        input: Var,
        window: (usize, usize),
        mode: PoolMode,
        argmax: Vec<u32>,
    },
    ChannelReduce {
        input: Var,
        mode: PoolMode,
        argmax: Vec<u32>,
    },
    Act {
        input: Var,
        kind: Activation,
    },
    Binary {
        a: Var,
        b: Var,
        kind: BinaryKind,
    },
    Scale {
        input: Var,
        factor: f32,
    },
    Concat {
        inputs: Vec<Var>,
        axis: usize,
    },
    Reshape {
        input: Var,
    },
    Permute {
        input: Var,
        /// Flat input index of every output element.
        source: Vec<usize>,
    },
    Slice {
        input: Var,
        axis: usize,
        start: usize,
    },
    Linear {
        input: Var,
        weight: Var,
        bias: Option<Var>,
    },
    Norm {
        input: Var,
        gamma: Var,
        beta: Var,
        kind: NormKind,
        xhat: Vec<f32>,
        inv_std: Vec<f32>,
    },
    Bce {
        pred: Var,
        target: Var,
    },
    Sum {
        input: Var,
    },
    Mean {
        input: Var,
    },
}

impl Op {
    pub fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf | Op::Param(_) => vec![],
            Op::Conv2d {
                input,
                kernel,
                bias,
                ..
            } => std::iter::once(*input)
                .chain(std::iter::once(*kernel))
                .chain(*bias)
                .collect(),
            Op::Linear {
                input,
                weight,
                bias,
                ..
            } => std::iter::once(*input)
                .chain(std::iter::once(*weight))
                .chain(*bias)
                .collect(),
            Op::Norm {
                input, gamma, beta, ..
            } => vec![*input, *gamma, *beta],
            Op::Binary { a, b, .. } => vec![*a, *b],
            Op::Bce { pred, target } => vec![*pred, *target],
            Op::Concat { inputs, .. } => inputs.clone(),
            Op::Pool { input, .. }
            | Op::ChannelReduce { input, .. }
            | Op::Act { input, .. }
            | Op::Scale { input, .. }
            | Op::Reshape { input }
            | Op::Permute { input, .. }
            | Op::Slice { input, .. }
            | Op::Sum { input }
            | Op::Mean { input } => vec![*input],
        }
    }
}

/// Propagate `grad` (gradient of the node holding `out`) into its inputs.
pub(crate) fn backward(op: &Op, out: &Tensor, grad: &[f32], sink: &mut GradSink<'_>) {
    match op {
        Op::Leaf | Op::Param(_) => {}
        Op::Conv2d {
            input,
            kernel,
            bias,
            stride,
            pad,
        } => conv::backward(*input, *kernel, *bias, *stride, *pad, out, grad, sink),
        Op::Pool {
            input,
            window,
            mode,
            argmax,
        } => pool::backward_pool(*input, *window, *mode, argmax, out, grad, sink),
        Op::ChannelReduce {
            input,
            mode,
            argmax,
        } => pool::backward_channel(*input, *mode, argmax, grad, sink),
        Op::Act { input, kind } => elementwise::backward_act(*input, *kind, out, grad, sink),
        Op::Binary { a, b, kind } => elementwise::backward_binary(*a, *b, *kind, out, grad, sink),
        Op::Scale { input, factor } => {
            if let Some(slot) = sink.slot(*input) {
                for (s, g) in slot.iter_mut().zip(grad) {
                    *s += g * factor;
                }
            }
        }
        Op::Concat { inputs, axis } => shape::backward_concat(inputs, *axis, out, grad, sink),
        Op::Reshape { input } => sink.add(*input, grad),
        Op::Permute { input, source } => shape::backward_permute(*input, source, grad, sink),
        Op::Slice { input, axis, start } => {
            shape::backward_slice(*input, *axis, *start, out, grad, sink)
        }
        Op::Linear {
            input,
            weight,
            bias,
        } => linear::backward(*input, *weight, *bias, grad, sink),
        Op::Norm {
            input,
            gamma,
            beta,
            kind,
            xhat,
            inv_std,
        } => norm::backward(*input, *gamma, *beta, *kind, xhat, inv_std, grad, sink),
        Op::Bce { pred, target } => loss::backward_bce(*pred, *target, grad, sink),
        Op::Sum { input } => {
            let g = grad[0];
            if let Some(slot) = sink.slot(*input) {
                slot.iter_mut().for_each(|s| *s += g);
            }
        }
        Op::Mean { input } => {
            let g = grad[0];
            if let Some(slot) = sink.slot(*input) {
                let scale = g / slot.len() as f32;
                slot.iter_mut().for_each(|s| *s += scale);
            }
        }
    }
}
