use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::biharmonic::factor_points;
use super::{green, ElectrodeLayout};
use crate::error::{arg_err, shape_err, Result};
use crate::signal::{BandFeature, N_BANDS, N_CHANNELS};

/// Interpolated lattice size before zero padding.
pub const GRID_SIZE: usize = 28;
/// Zero border on every side.
pub const PAD: usize = 2;
pub const FRAME_SIZE: usize = GRID_SIZE + 2 * PAD;
pub const FRAME_BANDS: usize = N_BANDS;

const FRAME_LEN: usize = FRAME_SIZE * FRAME_SIZE * FRAME_BANDS;

/// Lattice coordinates `-1 + 2j/(n-1)`.
pub fn grid_coords(n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| -1.0 + 2.0 * j as f64 / (n - 1) as f64)
        .collect()
}

/// A 32×32 topographic image with one channel per band, stored `H×W×C`.
#[derive(Clone, Debug, PartialEq)]
pub struct TopoFrame {
    data: Vec<f32>,
}

impl TopoFrame {
    pub fn new(data: Vec<f32>) -> Result<Self> {
        if data.len() != FRAME_LEN {
            return shape_err(format!(
                "frame needs {FRAME_LEN} values, got {}",
                data.len()
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return arg_err("frame contains non-finite values");
        }
        Ok(Self { data })
    }

    pub fn zeros() -> Self {
        Self {
            data: vec![0.0; FRAME_LEN],
        }
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize, band: usize) -> f32 {
        self.data[(row * FRAME_SIZE + col) * FRAME_BANDS + band]
    }

    /// One band as a row-major 32×32 image.
    pub fn band(&self, band: usize) -> Vec<f32> {
        self.data
            .iter()
            .skip(band)
            .step_by(FRAME_BANDS)
            .copied()
            .collect()
    }

    /// 8-bit greyscale rendering of one band, min-max scaled.
    pub fn band_image(&self, band: usize) -> image::GrayImage {
        let px = self.band(band);
        let (lo, hi) = px
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(a, b), &v| {
                (a.min(v), b.max(v))
            });
        let span = if hi > lo { hi - lo } else { 1.0 };
        image::GrayImage::from_fn(FRAME_SIZE as u32, FRAME_SIZE as u32, |x, y| {
            let v = (px[y as usize * FRAME_SIZE + x as usize] - lo) / span;
            image::Luma([(v * 255.0).round() as u8])
        })
    }
}

/// Precomputed linear map from 32 electrode values to the 28×28 interior of
/// a frame, for a fixed layout.
#[derive(Clone, Debug)]
pub struct TopoMapper {
    layout: ElectrodeLayout,
    /// `784 × 32`, zero rows outside the head disk.
    operator: Vec<f64>,
    /// Apply `log10(1 + x)` to band powers before interpolation.
    pub log_power: bool,
}

impl TopoMapper {
    pub fn new(layout: ElectrodeLayout) -> Result<Self> {
        let points = layout.points();
        let n = points.len();
        if n != N_CHANNELS {
            return shape_err(format!(
                "layout has {n} electrodes, frames need {N_CHANNELS}"
            ));
        }
        let lu = factor_points(&points)?;
        // columns of the inverse restricted to the data rows: weights and
        // offset for each unit input
        let m = n + 1;
        let mut inv = vec![0.0; m * n];
        for k in 0..n {
            let mut e = vec![0.0; m];
            e[k] = 1.0;
            for (i, v) in lu.solve(&e).into_iter().enumerate() {
                inv[i * n + k] = v;
            }
        }
        let coords = grid_coords(GRID_SIZE);
        let mut operator = vec![0.0; GRID_SIZE * GRID_SIZE * n];
        let mut basis = vec![0.0; m];
        for (r, &y) in coords.iter().rev().enumerate() {
            for (c, &x) in coords.iter().enumerate() {
                if x.hypot(y) > 1.0 {
                    continue;
                }
                for (b, p) in basis.iter_mut().zip(&points) {
                    *b = green((x - p[0]).hypot(y - p[1]));
                }
                basis[n] = 1.0;
                let row = &mut operator[(r * GRID_SIZE + c) * n..][..n];
                for (i, &b) in basis.iter().enumerate() {
                    if b == 0.0 {
                        continue;
                    }
                    for (o, v) in row.iter_mut().zip(&inv[i * n..(i + 1) * n]) {
                        *o += b * v;
                    }
                }
            }
        }
        Ok(Self {
            layout,
            operator,
            log_power: false,
        })
    }

    pub fn deap() -> Self {
        Self::new(super::deap_layout()).expect("embedded layout is well conditioned")
    }

    pub fn layout(&self) -> &ElectrodeLayout {
        &self.layout
    }

    /// Interpolated interior (28×28, row-major) for one band's electrode values.
    pub fn interior(&self, values: &[f64]) -> Vec<f64> {
        let n = self.layout.len();
        assert_eq!(values.len(), n);
        self.operator
            .chunks(n)
            .map(|row| row.iter().zip(values).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn assemble(&self, feature: &BandFeature) -> Result<TopoFrame> {
        let mut data = vec![0.0f32; FRAME_LEN];
        for band in 0..FRAME_BANDS {
            let mut values = feature.band(band);
            if self.log_power {
                values
                    .iter_mut()
                    .for_each(|v| *v = v.ln_1p() / std::f64::consts::LN_10);
            }
            for (i, v) in self.interior(&values).into_iter().enumerate() {
                let (r, c) = (i / GRID_SIZE + PAD, i % GRID_SIZE + PAD);
                data[(r * FRAME_SIZE + c) * FRAME_BANDS + band] = v as f32;
            }
        }
        TopoFrame::new(data)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameCacheHeader {
    pub n_frames: usize,
    pub height: usize,
    pub width: usize,
    pub bands: usize,
}

/// JSON header line followed by little-endian f32 frames.
pub fn write_frame_cache(path: &Path, frames: &[TopoFrame]) -> Result<()> {
    let header = FrameCacheHeader {
        n_frames: frames.len(),
        height: FRAME_SIZE,
        width: FRAME_SIZE,
        bands: FRAME_BANDS,
    };
    let mut out = serde_json::to_vec(&header)?;
    out.push(b'\n');
    out.reserve(frames.len() * FRAME_LEN * 4);
    for f in frames {
        for v in &f.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_frame_cache(path: &Path) -> Result<Vec<TopoFrame>> {
    let bytes = fs::read(path)?;
    let split = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| crate::Error::InvalidArgument("frame cache has no header line".into()))?;
    let header: FrameCacheHeader = serde_json::from_slice(&bytes[..split])?;
    if (header.height, header.width, header.bands) != (FRAME_SIZE, FRAME_SIZE, FRAME_BANDS) {
        return shape_err(format!("unsupported frame geometry {header:?}"));
    }
    let body = &bytes[split + 1..];
    if body.len() != header.n_frames * FRAME_LEN * 4 {
        return shape_err(format!(
            "frame cache body has {} bytes for {} frames",
            body.len(),
            header.n_frames
        ));
    }
    body.chunks_exact(FRAME_LEN * 4)
        .map(|chunk| {
            TopoFrame::new(
                chunk
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            )
        })
        .collect()
}
