//! EEG emotion classification from band-power topographic map sequences.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor`]: a small reverse-mode autodiff engine (tape, ops, Adam, BCE).
//! * [`signal`]: resampling, band-pass filtering, windowing and band power.
//! * [`topomap`]: electrode projection and biharmonic power topographic maps.
//! * [`model`]: the attention-augmented spatial extractor, Bi-LSTM and head.
//! * [`data`]: labels, leave-one-subject-out splits, synthetic EEG, datasets.
//! * [`harness`]: training, evaluation, LOOCV, sweeps, ablations and reports.

pub mod data;
pub mod error;
pub mod harness;
pub mod model;
pub mod signal;
pub mod tensor;
pub mod topomap;

pub use error::{Error, Result};
