use super::Op;
use crate::error::{shape_err, Result};
use crate::tensor::gemm::{gemm, Mat};
use crate::tensor::tape::{GradSink, Var};
use crate::tensor::{Tape, Tensor};

fn rows_cols(shape: &[usize]) -> Option<(usize, usize)> {
    match *shape {
        [k] => Some((1, k)),
        [m, k] => Some((m, k)),
        _ => None,
    }
}

impl Tape {
    /// `x · W (+ b)` with `x` of shape `M×K` (or `K`), `W` of shape `K×N`,
    /// `b` of shape `N`.
    pub fn linear(&mut self, input: Var, weight: Var, bias: Option<Var>) -> Result<Var> {
        let in_shape = self.shape(input).to_vec();
        let Some((m, k)) = rows_cols(&in_shape) else {
            return shape_err(format!(
                "linear input must be rank 1 or 2, got {in_shape:?}"
            ));
        };
        let [wk, n] = *self.shape(weight) else {
            return shape_err(format!(
                "linear weight must be KxN, got {:?}",
                self.shape(weight)
            ));
        };
        if wk != k {
            return shape_err(format!("linear: input width {k} but weight expects {wk}"));
        }
        if let Some(b) = bias {
            if self.shape(b) != [n] {
                return shape_err(format!(
                    "linear bias must be [{n}], got {:?}",
                    self.shape(b)
                ));
            }
        }
        let mut out = vec![0.0f32; m * n];
        gemm(
            Mat::new(self.value(input).data(), m, k),
            Mat::new(self.value(weight).data(), k, n),
            &mut out,
            false,
        );
        if let Some(b) = bias {
            let b = self.value(b).data();
            for row in out.chunks_mut(n) {
                for (o, bb) in row.iter_mut().zip(b) {
                    *o += bb;
                }
            }
        }
        let shape = if in_shape.len() == 1 {
            vec![n]
        } else {
            vec![m, n]
        };
        let value = Tensor::new(shape, out)?;
        Ok(self.push(
            value,
            Op::Linear {
                input,
                weight,
                bias,
            },
        ))
    }
}

pub(super) fn backward(
    input: Var,
    weight: Var,
    bias: Option<Var>,
    grad: &[f32],
    sink: &mut GradSink<'_>,
) {
    let (m, k) = rows_cols(sink.value(input).shape()).expect("validated in forward");
    let n = sink.value(weight).shape()[1];
    if let Some(b) = bias {
        if let Some(db) = sink.slot(b) {
            let mut acc = vec![0.0f64; n];
            for row in grad.chunks(n) {
                for (a, g) in acc.iter_mut().zip(row) {
                    *a += *g as f64;
                }
            }
            for (d, a) in db.iter_mut().zip(acc) {
                *d += a as f32;
            }
        }
    }
    let (x, dw) = sink.value_and_slot(input, weight);
    if let Some(dw) = dw {
        gemm(Mat::t(x.data(), k, m), Mat::new(grad, m, n), dw, true);
    }
    let (w, dx) = sink.value_and_slot(weight, input);
    if let Some(dx) = dx {
        gemm(Mat::new(grad, m, n), Mat::t(w.data(), n, k), dx, true);
    }
}
