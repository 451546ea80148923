use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::labels::Label;
use crate::error::{config_err, Result};
use crate::signal::{RawTrial, BANDS, BASELINE_SECS, N_BANDS, N_CHANNELS, TARGET_FS};
use crate::topomap::CHANNEL_NAMES;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Frontal,
    Central,
    Parietal,
    Occipital,
}

/// Scalp region of a channel of the 32-channel montage, from its name.
pub fn electrode_region(channel: usize) -> Region {
    let name = CHANNEL_NAMES[channel];
    if name.starts_with("PO") || name.starts_with('O') {
        Region::Occipital
    } else if name.starts_with('P') {
        Region::Parietal
    } else if name.starts_with("FC") {
        Region::Central
    } else if name.starts_with('F') || name.starts_with("AF") {
        Region::Frontal
    } else {
        Region::Central
    }
}

/// Per-band amplitude multipliers for each region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandGains {
    pub frontal: [f64; N_BANDS],
    pub central: [f64; N_BANDS],
    pub parietal: [f64; N_BANDS],
    pub occipital: [f64; N_BANDS],
}

impl BandGains {
    pub fn uniform() -> Self {
        Self {
            frontal: [1.0; N_BANDS],
            central: [1.0; N_BANDS],
            parietal: [1.0; N_BANDS],
            occipital: [1.0; N_BANDS],
        }
    }

    pub fn region(&self, r: Region) -> &[f64; N_BANDS] {
        match r {
            Region::Frontal => &self.frontal,
            Region::Central => &self.central,
            Region::Parietal => &self.parietal,
            Region::Occipital => &self.occipital,
        }
    }
}

/// Class-conditional band amplitudes: `base[b] * gains[class][region][b]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassProfiles {
    /// Sinusoid amplitude per band (delta..gamma) before gains.
    pub base: [f64; N_BANDS],
    pub high: BandGains,
    pub low: BandGains,
}

impl Default for ClassProfiles {
    fn default() -> Self {
        let mut high = BandGains::uniform();
        high.frontal[3] = 2.0;
        high.frontal[4] = 2.5;
        let mut low = BandGains::uniform();
        low.occipital[2] = 2.5;
        Self {
            base: [1.0, 0.8, 1.0, 0.5, 0.3],
            high,
            low,
        }
    }
}

impl ClassProfiles {
    pub fn gains(&self, label: Label) -> &BandGains {
        match label {
            Label::High => &self.high,
            Label::Low => &self.low,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_subjects: u32,
    pub trials_per_subject: u32,
    /// Sampling rate of the generated trials.
    pub fs: f64,
    /// Length after the pre-trial baseline.
    pub stimulus_secs: f64,
    /// Standard deviation of the additive white noise.
    pub noise_level: f64,
    /// Sinusoids per band, at random in-band frequencies.
    pub components_per_band: usize,
    /// Per-subject band gains are drawn from `1 ± spread`.
    pub subject_gain_spread: f64,
    /// Share of high-class trials per subject.
    pub high_fraction: f64,
    pub seed: u64,
    pub profiles: ClassProfiles,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_subjects: 4,
            trials_per_subject: 10,
            fs: TARGET_FS,
            stimulus_secs: 60.0,
            noise_level: 0.5,
            components_per_band: 3,
            subject_gain_spread: 0.2,
            high_fraction: 0.5,
            seed: 0,
            profiles: ClassProfiles::default(),
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if !(1..=32).contains(&self.n_subjects) || !(1..=40).contains(&self.trials_per_subject) {
            return config_err(
                "synthetic data needs 1..=32 subjects and 1..=40 trials per subject",
            );
        }
        if !(self.fs >= TARGET_FS) || !self.fs.is_finite() {
            return config_err(format!("sampling rate must be at least {TARGET_FS} Hz"));
        }
        if !(self.stimulus_secs >= 6.0) {
            return config_err("stimulus must last at least one 6 s window");
        }
        if !(self.noise_level >= 0.0) || !(0.0..1.0).contains(&self.subject_gain_spread) {
            return config_err("noise level must be >= 0 and gain spread in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.high_fraction) || self.components_per_band == 0 {
            return config_err(
                "high_fraction must lie in [0, 1] and components_per_band be positive",
            );
        }
        let p = &self.profiles;
        let gains_ok = [&p.high, &p.low].iter().all(|g| {
            [g.frontal, g.central, g.parietal, g.occipital]
                .iter()
                .flatten()
                .all(|v| *v >= 0.0)
        });
        if !gains_ok || !p.base.iter().all(|v| *v >= 0.0) {
            return config_err("band amplitudes and gains must be non-negative");
        }
        Ok(())
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream per (seed, subject, trial); trial 0 is the subject stream.
fn stream(seed: u64, subject: u32, trial: u32) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix(
        splitmix(seed) ^ ((subject as u64) << 32 | trial as u64),
    ))
}

/// Generate every trial described by a `SynthSpec`. Ratings are 8 for high-class and 2
/// for low-class trials, on both axes.
pub fn synth_generate(spec: &SynthSpec) -> Result<Vec<RawTrial>> {
    spec.validate()?;
    let mut out = Vec::with_capacity((spec.n_subjects * spec.trials_per_subject) as usize);
    for subject in 1..=spec.n_subjects {
        let mut rng = stream(spec.seed, subject, 0);
        let spread = spec.subject_gain_spread;
        let band_gain: Vec<f64> = (0..N_BANDS)
            .map(|_| 1.0 + spread * rng.random_range(-1.0..=1.0))
            .collect();
        let electrode_gain: Vec<f64> = (0..N_CHANNELS)
            .map(|_| 1.0 + 0.5 * spread * rng.random_range(-1.0..=1.0))
            .collect();
        let n = spec.trials_per_subject as usize;
        let n_high = (spec.high_fraction * n as f64).round() as usize;
        let mut classes: Vec<Label> = (0..n)
            .map(|i| if i < n_high { Label::High } else { Label::Low })
            .collect();
        classes.shuffle(&mut rng);

        for (t, &label) in classes.iter().enumerate() {
            let trial_id = t as u32 + 1;
            let mut rng = stream(spec.seed, subject, trial_id);
            let gains = spec.profiles.gains(label);
            let len = ((BASELINE_SECS as f64 + spec.stimulus_secs) * spec.fs).round() as usize;
            let mut data = vec![0.0f64; N_CHANNELS * len];
            let m = spec.components_per_band;
            for (b, band) in BANDS.iter().enumerate() {
                let freqs: Vec<f64> = (0..m)
                    .map(|_| rng.random_range(band.lo + 0.5..band.hi - 0.5))
                    .collect();
                for ch in 0..N_CHANNELS {
                    let amp = spec.profiles.base[b]
                        * gains.region(electrode_region(ch))[b]
                        * band_gain[b]
                        * electrode_gain[ch]
                        / (m as f64).sqrt();
                    let row = &mut data[ch * len..(ch + 1) * len];
                    for &f in &freqs {
                        let phase = rng.random_range(0.0..2.0 * PI);
                        let w = 2.0 * PI * f / spec.fs;
                        for (i, v) in row.iter_mut().enumerate() {
                            *v += amp * (w * i as f64 + phase).sin();
                        }
                    }
                }
            }
            if spec.noise_level > 0.0 {
                let noise = Normal::new(0.0, spec.noise_level).expect("validated");
                data.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
            }
            let rating = match label {
                Label::High => 8.0,
                Label::Low => 2.0,
            };
            let samples = data.into_iter().map(|v| v as f32).collect();
            out.push(RawTrial::new(
                subject, trial_id, spec.fs, samples, rating, rating,
            )?);
        }
    }
    Ok(out)
}
