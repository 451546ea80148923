//! EEG preprocessing: resampling, band-pass filtering, windowing and
//! per-band spectral power.

mod filter;
mod psd;
mod resample;
mod trial;
mod window;

pub use filter::{bandpass, butterworth_sections, Biquad};
pub use psd::{band_psd, BandFeature, BandSpec, PsdEstimator, WelchConfig, BANDS, N_BANDS};
pub use resample::resample;
pub use trial::{RawTrial, TrialHeader, N_CHANNELS};
pub use window::{
    segment, subsegment, Segment, SubSegment, BASELINE_SECS, FRAMES_PER_SEGMENT, SEGMENT_SECS,
    STRIDE_SECS, TARGET_FS,
};

/// Full preprocessing of one trial to the 128 Hz, 1-45 Hz representation.
pub fn preprocess(trial: &RawTrial) -> crate::Result<RawTrial> {
    let resampled = resample(trial, TARGET_FS)?;
    bandpass(&resampled, 1.0, 45.0)
}
