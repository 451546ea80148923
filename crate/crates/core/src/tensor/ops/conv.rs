//! 2-D cross-correlation over NHWC tensors via im2col + GEMM.

use super::Op;
use crate::error::{arg_err, shape_err, Result};
use crate::tensor::gemm::{gemm, Mat};
use crate::tensor::tape::{GradSink, Var};
use crate::tensor::{Tape, Tensor};

#[derive(Clone, Copy, Debug)]
struct Geometry {
    batch: usize,
    h: usize,
    w: usize,
    cin: usize,
    kh: usize,
    kw: usize,
    cout: usize,
    ho: usize,
    wo: usize,
    stride: usize,
    pad: usize,
}

impl Geometry {
    fn patch(&self) -> usize {
        self.kh * self.kw * self.cin
    }

    fn positions(&self) -> usize {
        self.ho * self.wo
    }

    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.pad == 0
    }
}

fn geometry(input: &[usize], kernel: &[usize], stride: usize, pad: usize) -> Result<Geometry> {
    let (batch, h, w, cin) = match *input {
        [h, w, c] => (1, h, w, c),
        [n, h, w, c] => (n, h, w, c),
        _ => {
            return shape_err(format!(
                "conv2d input must be HxWxC or NxHxWxC, got {input:?}"
            ))
        }
    };
    let [kh, kw, kcin, cout] = *kernel else {
        return shape_err(format!(
            "conv2d kernel must be kxkxCinxCout, got {kernel:?}"
        ));
    };
    if kcin != cin {
        return shape_err(format!(
            "conv2d kernel expects {kcin} input channels, input has {cin}"
        ));
    }
    if stride == 0 {
        return arg_err("conv2d stride must be positive");
    }
    if kh > h + 2 * pad || kw > w + 2 * pad {
        return shape_err(format!(
            "conv2d kernel {kh}x{kw} larger than padded input {}x{}",
            h + 2 * pad,
            w + 2 * pad
        ));
    }
    Ok(Geometry {
        batch,
        h,
        w,
        cin,
        kh,
        kw,
        cout,
        ho: (h + 2 * pad - kh) / stride + 1,
        wo: (w + 2 * pad - kw) / stride + 1,
        stride,
        pad,
    })
}

/// Source pixel for output row/col `o` and kernel tap `k`, if inside the image.
#[inline]
fn source(o: usize, k: usize, g: &Geometry, extent: usize) -> Option<usize> {
    (o * g.stride + k)
        .checked_sub(g.pad)
        .filter(|&i| i < extent)
}

fn im2col(img: &[f32], g: &Geometry, cols: &mut [f32]) {
    let patch = g.patch();
    for oy in 0..g.ho {
        for ox in 0..g.wo {
            let row = &mut cols[(oy * g.wo + ox) * patch..][..patch];
            for ky in 0..g.kh {
                let iy = source(oy, ky, g, g.h);
                for kx in 0..g.kw {
                    let dst = &mut row[(ky * g.kw + kx) * g.cin..][..g.cin];
                    match (iy, source(ox, kx, g, g.w)) {
                        (Some(iy), Some(ix)) => {
                            dst.copy_from_slice(&img[(iy * g.w + ix) * g.cin..][..g.cin])
                        }
                        _ => dst.fill(0.0),
                    }
                }
            }
        }
    }
}

fn col2im_add(cols: &[f32], g: &Geometry, img: &mut [f32]) {
    let patch = g.patch();
    for oy in 0..g.ho {
        for ox in 0..g.wo {
            let row = &cols[(oy * g.wo + ox) * patch..][..patch];
            for ky in 0..g.kh {
                let Some(iy) = source(oy, ky, g, g.h) else {
                    continue;
                };
                for kx in 0..g.kw {
                    let Some(ix) = source(ox, kx, g, g.w) else {
                        continue;
                    };
                    let src = &row[(ky * g.kw + kx) * g.cin..][..g.cin];
                    let dst = &mut img[(iy * g.w + ix) * g.cin..][..g.cin];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += s;
                    }
                }
            }
        }
    }
}

impl Tape {
    /// Cross-correlation (no kernel flip) with zero padding.
    ///
    /// `input` is `H×W×Cin` or `N×H×W×Cin`, `kernel` is `kh×kw×Cin×Cout`,
    /// `bias` is `Cout`. The output keeps the input's rank.
    pub fn conv2d(
        &mut self,
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        stride: usize,
        pad: usize,
    ) -> Result<Var> {
        let g = geometry(self.shape(input), self.shape(kernel), stride, pad)?;
        if let Some(b) = bias {
            if self.shape(b) != [g.cout] {
                return shape_err(format!(
                    "conv2d bias must be [{}], got {:?}",
                    g.cout,
                    self.shape(b)
                ));
            }
        }
        let x = self.value(input).data();
        let k = self.value(kernel).data();
        let (patch, positions) = (g.patch(), g.positions());
        let mut out = vec![0.0f32; g.batch * positions * g.cout];
        let mut cols = if g.is_pointwise() {
            Vec::new()
        } else {
            vec![0.0f32; positions * patch]
        };
        let img_len = g.h * g.w * g.cin;
        for n in 0..g.batch {
            let img = &x[n * img_len..][..img_len];
            let cols_ref: &[f32] = if g.is_pointwise() {
                img
            } else {
                im2col(img, &g, &mut cols);
                &cols
            };
            let dst = &mut out[n * positions * g.cout..][..positions * g.cout];
            gemm(
                Mat::new(cols_ref, positions, patch),
                Mat::new(k, patch, g.cout),
                dst,
                false,
            );
        }
        if let Some(b) = bias {
            let b = self.value(b).data();
            for row in out.chunks_mut(g.cout) {
                for (o, bb) in row.iter_mut().zip(b) {
                    *o += bb;
                }
            }
        }
        let shape = if self.shape(input).len() == 3 {
            vec![g.ho, g.wo, g.cout]
        } else {
            vec![g.batch, g.ho, g.wo, g.cout]
        };
        let value = Tensor::new(shape, out)?;
        Ok(self.push(
            value,
            Op::Conv2d {
                input,
                kernel,
                bias,
                stride,
                pad,
            },
        ))
    }
}

#[allow(clippy::too_many_arguments)]
pub(super) fn backward(
    input: Var,
    kernel: Var,
    bias: Option<Var>,
    stride: usize,
    pad: usize,
    _out: &Tensor,
    grad: &[f32],
    sink: &mut GradSink<'_>,
) {
    let g = geometry(
        sink.value(input).shape(),
        sink.value(kernel).shape(),
        stride,
        pad,
    )
    .expect("geometry validated in forward");
    let (patch, positions) = (g.patch(), g.positions());
    let img_len = g.h * g.w * g.cin;
    let out_len = positions * g.cout;

    if let Some(b) = bias {
        if let Some(slot) = sink.slot(b) {
            let mut acc = vec![0.0f64; g.cout];
            for row in grad.chunks(g.cout) {
                for (a, v) in acc.iter_mut().zip(row) {
                    *a += *v as f64;
                }
            }
            for (s, a) in slot.iter_mut().zip(acc) {
                *s += a as f32;
            }
        }
    }

    let mut cols = vec![0.0f32; positions * patch];
    // Kernel gradient: sum over images of colsᵀ · dOut.
    let (xv, dk) = sink.value_and_slot(input, kernel);
    if let Some(dk) = dk {
        let x = xv.data();
        for n in 0..g.batch {
            let img = &x[n * img_len..][..img_len];
            if g.is_pointwise() {
                cols.copy_from_slice(img);
            } else {
                im2col(img, &g, &mut cols);
            }
            gemm(
                Mat::t(&cols, patch, positions),
                Mat::new(&grad[n * out_len..][..out_len], positions, g.cout),
                dk,
                true,
            );
        }
    }

    // Input gradient: col2im(dOut · Kᵀ).
    let (k, dx) = sink.value_and_slot(kernel, input);
    if let Some(dx) = dx {
        let k = k.data();
        for n in 0..g.batch {
            gemm(
                Mat::new(&grad[n * out_len..][..out_len], positions, g.cout),
                Mat::t(k, g.cout, patch),
                &mut cols,
                false,
            );
            let dimg = &mut dx[n * img_len..][..img_len];
            if g.is_pointwise() {
                for (d, c) in dimg.iter_mut().zip(&cols) {
                    *d += c;
                }
            } else {
                col2im_add(&cols, &g, dimg);
            }
        }
    }
}
