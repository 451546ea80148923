//! Labels, subject splits, the synthetic EEG generator and dataset assembly.

mod dataset;
mod labels;
mod split;
mod synth;

pub use dataset::{
    build_dataset, build_frames, stack_batch, CacheEntry, DatasetManifest, FrameSet, LabeledSample,
    SampleCache,
};
pub use labels::{map_label, Label, Task};
pub use split::{loocv_split, Fold, SplitPlan};
pub use synth::{electrode_region, synth_generate, BandGains, ClassProfiles, Region, SynthSpec};
