use super::Op;
use crate::error::{shape_err, Result};
use crate::tensor::tape::{GradSink, Var};
use crate::tensor::{numel, Tape, Tensor};

/// (outer, inner) block sizes around `axis`.
fn split_at_axis(shape: &[usize], axis: usize) -> (usize, usize) {
    (numel(&shape[..axis]), numel(&shape[axis + 1..]))
}

impl Tape {
    /// Join tensors along `axis`; all other extents must agree.
    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let Some(&first) = inputs.first() else {
            return shape_err("concat of zero tensors");
        };
        let base = self.shape(first).to_vec();
        if axis >= base.len() {
            return shape_err(format!("concat axis {axis} out of range for {base:?}"));
        }
        let mut total = 0;
        for &v in inputs {
            let s = self.shape(v);
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(d, (a, b))| d == axis || a == b);
            if !compatible {
                return shape_err(format!(
                    "concat along axis {axis}: {s:?} does not match {base:?}"
                ));
            }
            total += s[axis];
        }
        let mut shape = base.clone();
        shape[axis] = total;
        let (outer, inner) = split_at_axis(&base, axis);
        let mut out = Vec::with_capacity(numel(&shape));
        for o in 0..outer {
            for &v in inputs {
                let block = self.shape(v)[axis] * inner;
                out.extend_from_slice(&self.value(v).data()[o * block..][..block]);
            }
        }
        let value = Tensor::new(shape, out)?;
        Ok(self.push(
            value,
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
        ))
    }

    pub fn reshape(&mut self, input: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(input).clone().reshape(shape)?;
        Ok(self.push(value, Op::Reshape { input }))
    }

    /// Reorder axes: output axis `i` is input axis `axes[i]`.
    pub fn permute(&mut self, input: Var, axes: &[usize]) -> Result<Var> {
        let in_shape = self.shape(input).to_vec();
        let mut seen = vec![false; in_shape.len()];
        if axes.len() != in_shape.len()
            || !axes
                .iter()
                .all(|&a| a < seen.len() && !std::mem::replace(&mut seen[a], true))
        {
            return shape_err(format!(
                "permute {axes:?} is not a permutation of the axes of {in_shape:?}"
            ));
        }
        let mut in_strides = vec![1; in_shape.len()];
        for d in (0..in_shape.len().saturating_sub(1)).rev() {
            in_strides[d] = in_strides[d + 1] * in_shape[d + 1];
        }
        let shape: Vec<usize> = axes.iter().map(|&a| in_shape[a]).collect();
        let strides: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
        let n = numel(&shape);
        let mut source = Vec::with_capacity(n);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..n {
            source.push(idx.iter().zip(&strides).map(|(i, s)| i * s).sum::<usize>());
            for d in (0..shape.len()).rev() {
                idx[d] += 1;
                if idx[d] < shape[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        let x = self.value(input).data();
        let out = source.iter().map(|&i| x[i]).collect();
        let value = Tensor::new(shape, out)?;
        Ok(self.push(value, Op::Permute { input, source }))
    }

    /// `len` consecutive entries along `axis`, starting at `start`.
    pub fn slice(&mut self, input: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let in_shape = self.shape(input).to_vec();
        if axis >= in_shape.len() || len == 0 || start + len > in_shape[axis] {
            return shape_err(format!(
                "slice [{start}, {}) along axis {axis} of {in_shape:?}",
                start + len
            ));
        }
        let (outer, inner) = split_at_axis(&in_shape, axis);
        let src_block = in_shape[axis] * inner;
        let x = self.value(input).data();
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            out.extend_from_slice(&x[o * src_block + start * inner..][..len * inner]);
        }
        let mut shape = in_shape;
        shape[axis] = len;
        let value = Tensor::new(shape, out)?;
        Ok(self.push(value, Op::Slice { input, axis, start }))
    }
}

pub(super) fn backward_concat(
    inputs: &[Var],
    axis: usize,
    out: &Tensor,
    grad: &[f32],
    sink: &mut GradSink<'_>,
) {
    let (outer, inner) = split_at_axis(out.shape(), axis);
    let out_block = out.shape()[axis] * inner;
    let mut offset = 0;
    for &v in inputs {
        let extent = sink.value(v).shape()[axis];
        let block = extent * inner;
        if let Some(slot) = sink.slot(v) {
            for o in 0..outer {
                let src = &grad[o * out_block + offset..][..block];
                for (s, g) in slot[o * block..][..block].iter_mut().zip(src) {
                    *s += g;
                }
            }
        }
        offset += block;
    }
}

pub(super) fn backward_slice(
    input: Var,
    axis: usize,
    start: usize,
    out: &Tensor,
    grad: &[f32],
    sink: &mut GradSink<'_>,
) {
    let in_shape = sink.value(input).shape().to_vec();
    let (outer, inner) = split_at_axis(&in_shape, axis);
    let len = out.shape()[axis];
    let src_block = in_shape[axis] * inner;
    if let Some(slot) = sink.slot(input) {
        for o in 0..outer {
            let dst = &mut slot[o * src_block + start * inner..][..len * inner];
            for (d, g) in dst.iter_mut().zip(&grad[o * len * inner..][..len * inner]) {
                *d += g;
            }
        }
    }
}

pub(super) fn backward_permute(
    input: Var,
    source: &[usize],
    grad: &[f32],
    sink: &mut GradSink<'_>,
) {
    if let Some(slot) = sink.slot(input) {
        for (&i, g) in source.iter().zip(grad) {
            slot[i] += g;
        }
    }
}
