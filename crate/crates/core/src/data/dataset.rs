use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::labels::{map_label, Label, Task};
use super::split::{loocv_split, SplitPlan};
use super::synth::SynthSpec;
use crate::error::{contract_err, shape_err, Result};
use crate::model::FRAMES;
use crate::signal::{band_psd, segment, subsegment, RawTrial};
use crate::tensor::Tensor;
use crate::topomap::{
    read_frame_cache, write_frame_cache, TopoFrame, TopoMapper, FRAME_BANDS, FRAME_SIZE,
};

/// The six frames of one 6 s window with the ratings of its trial, before
/// a task is chosen.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSet {
    pub subject_id: u32,
    pub trial_id: u32,
    pub segment: usize,
    pub arousal: f32,
    pub valence: f32,
    pub frames: Arc<[TopoFrame]>,
}

impl FrameSet {
    pub fn rating(&self, task: Task) -> f32 {
        match task {
            Task::Arousal => self.arousal,
            Task::Valence => self.valence,
        }
    }

    /// `None` when the rating maps to the discard class.
    pub fn labeled(&self, task: Task) -> Result<Option<LabeledSample>> {
        Ok(
            map_label(self.rating(task) as f64)?.map(|label| LabeledSample {
                frames: Arc::clone(&self.frames),
                label,
                subject_id: self.subject_id,
                trial_id: self.trial_id,
                segment: self.segment,
                task,
            }),
        )
    }
}

/// Six frames with a binary label, the model's unit input.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    pub frames: Arc<[TopoFrame]>,
    pub label: Label,
    pub subject_id: u32,
    pub trial_id: u32,
    pub segment: usize,
    pub task: Task,
}

/// Window, split and map every trial. Trials must already be at 128 Hz.
pub fn build_frames(trials: &[RawTrial], mapper: &TopoMapper) -> Result<Vec<FrameSet>> {
    let mut out = Vec::new();
    for trial in trials {
        for seg in segment(trial)? {
            let frames = subsegment(&seg)?
                .iter()
                .map(|sub| mapper.assemble(&band_psd(sub)?))
                .collect::<Result<Vec<_>>>()?;
            out.push(FrameSet {
                subject_id: seg.subject_id,
                trial_id: seg.trial_id,
                segment: seg.index,
                arousal: seg.arousal,
                valence: seg.valence,
                frames: frames.into(),
            });
        }
    }
    Ok(out)
}

/// Labeled samples for one task from preprocessed trials; windows of
/// trials rated exactly 5 are dropped.
pub fn build_dataset(trials: &[RawTrial], task: Task) -> Result<Vec<LabeledSample>> {
    let sets = build_frames(trials, &TopoMapper::deap())?;
    labeled(&sets, task)
}

fn labeled(sets: &[FrameSet], task: Task) -> Result<Vec<LabeledSample>> {
    Ok(sets
        .iter()
        .map(|s| s.labeled(task))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect())
}

/// Model input `B×6×32×32×5` and one-hot targets `B×2`.
pub fn stack_batch(samples: &[&LabeledSample]) -> Result<(Tensor, Tensor)> {
    let frame_len = FRAME_SIZE * FRAME_SIZE * FRAME_BANDS;
    let mut x = Vec::with_capacity(samples.len() * FRAMES * frame_len);
    let mut y = Vec::with_capacity(samples.len() * 2);
    for s in samples {
        if s.frames.len() != FRAMES {
            return shape_err(format!(
                "sample has {} frames, expected {FRAMES}",
                s.frames.len()
            ));
        }
        for f in s.frames.iter() {
            x.extend_from_slice(f.data());
        }
        let mut onehot = [0.0f32; 2];
        onehot[s.label.index()] = 1.0;
        y.extend_from_slice(&onehot);
    }
    let b = samples.len();
    Ok((
        Tensor::new(vec![b, FRAMES, FRAME_SIZE, FRAME_SIZE, FRAME_BANDS], x)?,
        Tensor::new(vec![b, 2], y)?,
    ))
}

const DATASET_FORMAT: &str = "stiln-dataset-v1";
const CACHE_FORMAT: &str = "stiln-sample-cache-v1";

/// Index of a directory of trial files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub trials: Vec<String>,
    pub tasks: Vec<Task>,
    /// Human-readable rating rule per class.
    pub label_map: Vec<(String, String)>,
    pub split: SplitPlan,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthSpec>,
}

impl DatasetManifest {
    pub const FILE: &'static str = "manifest.json";

    /// Write every trial plus `manifest.json` into `dir`.
    pub fn write(dir: &Path, trials: &[RawTrial], synth: Option<SynthSpec>) -> Result<Self> {
        let mut subjects: Vec<u32> = trials.iter().map(|t| t.subject_id).collect();
        subjects.sort_unstable();
        subjects.dedup();
        let manifest = Self {
            format: DATASET_FORMAT.into(),
            trials: trials
                .iter()
                .map(|t| format!("s{:02}_t{:02}.trial", t.subject_id, t.trial_id))
                .collect(),
            tasks: vec![Task::Arousal, Task::Valence],
            label_map: vec![
                ("low".into(), "rating < 5".into()),
                ("high".into(), "rating > 5".into()),
                ("discard".into(), "rating == 5".into()),
            ],
            split: loocv_split(&subjects)?,
            synth,
        };
        fs::create_dir_all(dir)?;
        for (t, name) in trials.iter().zip(&manifest.trials) {
            t.write(&dir.join(name))?;
        }
        fs::write(dir.join(Self::FILE), serde_json::to_vec_pretty(&manifest)?)?;
        Ok(manifest)
    }

    pub fn load(dir: &Path) -> Result<(Self, Vec<RawTrial>)> {
        let manifest: Self = serde_json::from_slice(&fs::read(dir.join(Self::FILE))?)?;
        if manifest.format != DATASET_FORMAT {
            return contract_err(format!("unknown dataset format {:?}", manifest.format));
        }
        let trials = manifest
            .trials
            .iter()
            .map(|name| RawTrial::read(&dir.join(name)))
            .collect::<Result<Vec<_>>>()?;
        Ok((manifest, trials))
    }
}

/// One row of the cache label index, parallel to the frame file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub subject_id: u32,
    pub trial_id: u32,
    pub segment: usize,
    pub arousal: f32,
    pub valence: f32,
    pub arousal_label: Option<Label>,
    pub valence_label: Option<Label>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct CacheIndex {
    format: String,
    frames_per_sample: usize,
    entries: Vec<CacheEntry>,
}

/// Preprocessed frame sets: `frames.bin` in the frame-cache format plus
/// `labels.json`, whose entry `i` owns frames `6i..6i+6`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleCache {
    pub sets: Vec<FrameSet>,
}

impl SampleCache {
    pub const FRAMES_FILE: &'static str = "frames.bin";
    pub const INDEX_FILE: &'static str = "labels.json";

    pub fn samples(&self, task: Task) -> Result<Vec<LabeledSample>> {
        labeled(&self.sets, task)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let entries = self
            .sets
            .iter()
            .map(|s| {
                Ok(CacheEntry {
                    subject_id: s.subject_id,
                    trial_id: s.trial_id,
                    segment: s.segment,
                    arousal: s.arousal,
                    valence: s.valence,
                    arousal_label: map_label(s.arousal as f64)?,
                    valence_label: map_label(s.valence as f64)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let index = CacheIndex {
            format: CACHE_FORMAT.into(),
            frames_per_sample: FRAMES,
            entries,
        };
        let frames: Vec<TopoFrame> = self
            .sets
            .iter()
            .flat_map(|s| s.frames.iter().cloned())
            .collect();
        fs::create_dir_all(dir)?;
        write_frame_cache(&dir.join(Self::FRAMES_FILE), &frames)?;
        fs::write(
            dir.join(Self::INDEX_FILE),
            serde_json::to_vec_pretty(&index)?,
        )?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let index: CacheIndex = serde_json::from_slice(&fs::read(dir.join(Self::INDEX_FILE))?)?;
        if index.format != CACHE_FORMAT || index.frames_per_sample != FRAMES {
            return contract_err(format!("unsupported sample cache {:?}", index.format));
        }
        let frames = read_frame_cache(&dir.join(Self::FRAMES_FILE))?;
        if frames.len() != index.entries.len() * FRAMES {
            return shape_err(format!(
                "cache holds {} frames for {} samples",
                frames.len(),
                index.entries.len()
            ));
        }
        let sets = index
            .entries
            .into_iter()
            .zip(frames.chunks(FRAMES))
            .map(|(e, f)| FrameSet {
                subject_id: e.subject_id,
                trial_id: e.trial_id,
                segment: e.segment,
                arousal: e.arousal,
                valence: e.valence,
                frames: f.to_vec().into(),
            })
            .collect();
        Ok(Self { sets })
    }
}
