use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, shape_err, Result};
use crate::topomap::CHANNEL_NAMES;

pub const N_CHANNELS: usize = 32;

/// One subject-trial of multichannel EEG. Samples are stored channel-major:
/// `data[ch * n_samples + t]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTrial {
    pub subject_id: u32,
    pub trial_id: u32,
    pub fs: f64,
    pub arousal: f32,
    pub valence: f32,
    n_samples: usize,
    data: Vec<f32>,
}

/// Header line of the on-disk trial format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialHeader {
    pub subject_id: u32,
    pub trial_id: u32,
    pub fs: f64,
    pub n_channels: usize,
    pub n_samples: usize,
    pub arousal: f32,
    pub valence: f32,
    pub channel_names: Vec<String>,
}

impl RawTrial {
    pub fn new(
        subject_id: u32,
        trial_id: u32,
        fs: f64,
        data: Vec<f32>,
        arousal: f32,
        valence: f32,
    ) -> Result<Self> {
        if !(1..=32).contains(&subject_id) || !(1..=40).contains(&trial_id) {
            return arg_err(format!(
                "subject {subject_id} / trial {trial_id} out of range"
            ));
        }
        if !(fs > 0.0) || !fs.is_finite() {
            return arg_err(format!("sampling rate must be positive, got {fs}"));
        }
        if !data.len().is_multiple_of(N_CHANNELS) {
            return shape_err(format!(
                "{} samples do not split into {N_CHANNELS} channels",
                data.len()
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return arg_err("trial contains non-finite samples");
        }
        Ok(Self {
            subject_id,
            trial_id,
            fs,
            arousal,
            valence,
            n_samples: data.len() / N_CHANNELS,
            data,
        })
    }

    /// Same metadata, new samples (and possibly a new rate).
    pub(crate) fn with_data(&self, fs: f64, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len() % N_CHANNELS, 0);
        Self {
            fs,
            n_samples: data.len() / N_CHANNELS,
            data,
            ..self.clone()
        }
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn duration_secs(&self) -> f64 {
        self.n_samples as f64 / self.fs
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn channel(&self, ch: usize) -> &[f32] {
        &self.data[ch * self.n_samples..][..self.n_samples]
    }

    pub fn channels(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks(self.n_samples.max(1)).take(N_CHANNELS)
    }

    pub fn header(&self) -> TrialHeader {
        TrialHeader {
            subject_id: self.subject_id,
            trial_id: self.trial_id,
            fs: self.fs,
            n_channels: N_CHANNELS,
            n_samples: self.n_samples,
            arousal: self.arousal,
            valence: self.valence,
            channel_names: CHANNEL_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// One line of compact JSON, a newline, then little-endian f32 samples
    /// in channel-major order.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = serde_json::to_vec(&self.header())?;
        out.push(b'\n');
        out.reserve(self.data.len() * 4);
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let split = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| crate::Error::InvalidArgument("trial file has no header line".into()))?;
        let header: TrialHeader = serde_json::from_slice(&bytes[..split])?;
        if header.n_channels != N_CHANNELS {
            return shape_err(format!(
                "expected {N_CHANNELS} channels, header says {}",
                header.n_channels
            ));
        }
        if header
            .channel_names
            .iter()
            .map(String::as_str)
            .ne(CHANNEL_NAMES.iter().copied())
        {
            return arg_err("trial channel order differs from the 32-channel layout");
        }
        let body = &bytes[split + 1..];
        let expected = header.n_channels * header.n_samples * 4;
        if body.len() != expected {
            return shape_err(format!(
                "trial body has {} bytes, header implies {expected}",
                body.len()
            ));
        }
        let data = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(
            header.subject_id,
            header.trial_id,
            header.fs,
            data,
            header.arousal,
            header.valence,
        )
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
