use super::{RawTrial, N_CHANNELS};
use crate::error::{arg_err, shape_err, Result};

pub const TARGET_FS: f64 = 128.0;
pub const BASELINE_SECS: usize = 3;
pub const SEGMENT_SECS: usize = 6;
pub const STRIDE_SECS: usize = 3;
pub const FRAMES_PER_SEGMENT: usize = 6;

const FS: usize = TARGET_FS as usize;
const SEGMENT_LEN: usize = SEGMENT_SECS * FS;

/// A 6 s window of a trial, channel-major `32 × 768`.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub subject_id: u32,
    pub trial_id: u32,
    /// Position of the window within its trial.
    pub index: usize,
    pub arousal: f32,
    pub valence: f32,
    data: Vec<f32>,
}

/// One second of a segment, channel-major `32 × 128`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubSegment {
    pub fs: f64,
    data: Vec<f32>,
}

impl Segment {
    pub fn new(subject_id: u32, trial_id: u32, index: usize, data: Vec<f32>) -> Self {
        Self {
            subject_id,
            trial_id,
            index,
            arousal: 0.0,
            valence: 0.0,
            data,
        }
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn n_samples(&self) -> usize {
        self.data.len() / N_CHANNELS
    }
}

impl SubSegment {
    pub fn new(fs: f64, data: Vec<f32>) -> Result<Self> {
        if data.is_empty() || !data.len().is_multiple_of(N_CHANNELS) {
            return shape_err(format!(
                "{} samples do not split into {N_CHANNELS} channels",
                data.len()
            ));
        }
        Ok(Self { fs, data })
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn n_samples(&self) -> usize {
        self.data.len() / N_CHANNELS
    }

    pub fn channel(&self, ch: usize) -> &[f32] {
        let n = self.n_samples();
        &self.data[ch * n..][..n]
    }
}

/// Drop the baseline and cut the stimulus into 6 s windows with a 3 s
/// stride. A stimulus shorter than one window yields no segments.
pub fn segment(trial: &RawTrial) -> Result<Vec<Segment>> {
    if trial.fs != TARGET_FS {
        return arg_err(format!(
            "segment expects {TARGET_FS} Hz input, got {} Hz",
            trial.fs
        ));
    }
    let skip = BASELINE_SECS * FS;
    let stride = STRIDE_SECS * FS;
    let stimulus = trial.n_samples().saturating_sub(skip);
    if stimulus < SEGMENT_LEN {
        return Ok(Vec::new());
    }
    let count = (stimulus - SEGMENT_LEN) / stride + 1;
    Ok((0..count)
        .map(|k| {
            let start = skip + k * stride;
            let data = trial
                .channels()
                .flat_map(|ch| ch[start..start + SEGMENT_LEN].iter().copied())
                .collect();
            Segment {
                subject_id: trial.subject_id,
                trial_id: trial.trial_id,
                index: k,
                arousal: trial.arousal,
                valence: trial.valence,
                data,
            }
        })
        .collect())
}

/// Six contiguous one-second blocks, in temporal order.
pub fn subsegment(seg: &Segment) -> Result<Vec<SubSegment>> {
    if seg.data.len() != N_CHANNELS * SEGMENT_LEN {
        return shape_err(format!(
            "segment must hold {N_CHANNELS}x{SEGMENT_LEN} samples, got {}",
            seg.data.len()
        ));
    }
    Ok((0..FRAMES_PER_SEGMENT)
        .map(|i| {
            let data = seg
                .data
                .chunks(SEGMENT_LEN)
                .flat_map(|ch| ch[i * FS..(i + 1) * FS].iter().copied())
                .collect();
            SubSegment {
                fs: TARGET_FS,
                data,
            }
        })
        .collect())
}
