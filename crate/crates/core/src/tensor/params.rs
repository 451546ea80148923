//! Named parameter storage and the binary checkpoint format.
//!
//! A checkpoint is two files: a flat little-endian `f32` blob holding every
//! entry back to back in registration order, and a JSON index mapping each
//! name to its byte offset and shape.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Tape, Tensor};
use crate::error::{config_err, contract_err, shape_err, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
struct Entry {
    name: String,
    value: Tensor,
    grad: Option<Vec<f32>>,
    trainable: bool,
}

/// Ordered collection of trainable parameters and non-trainable buffers.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    entries: Vec<Entry>,
    by_name: HashMap<String, ParamId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointEntry {
    pub name: String,
    /// Byte offset into the blob.
    pub offset: usize,
    pub shape: Vec<usize>,
    pub trainable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointIndex {
    pub format: String,
    pub dtype: String,
    pub params: Vec<CheckpointEntry>,
}

const CHECKPOINT_FORMAT: &str = "stiln-checkpoint-v1";

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    fn insert(&mut self, name: &str, value: Tensor, trainable: bool) -> Result<ParamId> {
        if self.by_name.contains_key(name) {
            return config_err(format!("duplicate parameter name {name:?}"));
        }
        let id = ParamId(self.entries.len());
        self.entries.push(Entry {
            name: name.to_string(),
            value,
            grad: None,
            trainable,
        });
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn add(&mut self, name: &str, value: Tensor) -> Result<ParamId> {
        self.insert(name, value, true)
    }

    /// Register a non-trainable buffer (e.g. running statistics).
    pub fn add_buffer(&mut self, name: &str, value: Tensor) -> Result<ParamId> {
        self.insert(name, value, false)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].value
    }

    /// Two distinct entries mutably at once.
    pub fn pair_mut(&mut self, a: ParamId, b: ParamId) -> (&mut Tensor, &mut Tensor) {
        assert_ne!(a, b, "pair_mut needs distinct entries");
        if a.0 < b.0 {
            let (lo, hi) = self.entries.split_at_mut(b.0);
            (&mut lo[a.0].value, &mut hi[0].value)
        } else {
            let (lo, hi) = self.entries.split_at_mut(a.0);
            (&mut hi[0].value, &mut lo[b.0].value)
        }
    }

    pub fn is_trainable(&self, id: ParamId) -> bool {
        self.entries[id.0].trainable
    }

    pub fn grad(&self, id: ParamId) -> Option<&[f32]> {
        self.entries[id.0].grad.as_deref()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn trainable_ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.ids().filter(|&id| self.is_trainable(id))
    }

    /// Number of trainable scalars.
    pub fn num_trainable(&self) -> usize {
        self.trainable_ids().map(|id| self.value(id).len()).sum()
    }

    /// Reset every trainable gradient buffer to zeros.
    pub fn zero_grad(&mut self) {
        for e in self.entries.iter_mut().filter(|e| e.trainable) {
            match &mut e.grad {
                Some(g) => g.fill(0.0),
                None => e.grad = Some(vec![0.0; e.value.len()]),
            }
        }
    }

    /// Add the parameter gradients recorded on `tape` into the buffers.
    /// Trainable parameters the loss did not reach end up with zero buffers.
    pub fn accumulate_grads(&mut self, tape: &Tape) -> Result<()> {
        for (id, g) in tape.param_grads() {
            let e = self.entries.get_mut(id.0).ok_or_else(|| {
                crate::Error::Contract("tape references an unknown parameter".into())
            })?;
            if g.len() != e.value.len() {
                return shape_err(format!("gradient size mismatch for {}", e.name));
            }
            let buf = e.grad.get_or_insert_with(|| vec![0.0; g.len()]);
            for (b, v) in buf.iter_mut().zip(g) {
                *b += v;
            }
        }
        for e in self.entries.iter_mut().filter(|e| e.trainable) {
            e.grad.get_or_insert_with(|| vec![0.0; e.value.len()]);
        }
        Ok(())
    }

    /// SHA-256 over names, shapes and values of every entry.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for e in &self.entries {
            h.update(e.name.as_bytes());
            for d in e.value.shape() {
                h.update((*d as u64).to_le_bytes());
            }
            for v in e.value.data() {
                h.update(v.to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn index(&self) -> CheckpointIndex {
        let mut offset = 0;
        let params = self
            .entries
            .iter()
            .map(|e| {
                let entry = CheckpointEntry {
                    name: e.name.clone(),
                    offset,
                    shape: e.value.shape().to_vec(),
                    trainable: e.trainable,
                };
                offset += e.value.len() * 4;
                entry
            })
            .collect();
        CheckpointIndex {
            format: CHECKPOINT_FORMAT.into(),
            dtype: "f32-le".into(),
            params,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.entries
            .iter()
            .flat_map(|e| e.value.data().iter().flat_map(|v| v.to_le_bytes()))
            .collect()
    }

    /// Write `<blob>` and its JSON `<index>`.
    pub fn save(&self, blob: &Path, index: &Path) -> Result<()> {
        fs::write(blob, self.to_bytes())?;
        fs::write(index, serde_json::to_vec_pretty(&self.index())?)?;
        Ok(())
    }

    /// Overwrite the values of this store from a checkpoint. Every entry
    /// must be present with a matching shape.
    pub fn load(&mut self, blob: &Path, index: &Path) -> Result<()> {
        let idx: CheckpointIndex = serde_json::from_slice(&fs::read(index)?)?;
        let bytes = fs::read(blob)?;
        self.load_from(&idx, &bytes)
    }

    pub fn load_from(&mut self, idx: &CheckpointIndex, bytes: &[u8]) -> Result<()> {
        if idx.format != CHECKPOINT_FORMAT {
            return contract_err(format!("unknown checkpoint format {:?}", idx.format));
        }
        let by_name: HashMap<&str, &CheckpointEntry> =
            idx.params.iter().map(|e| (e.name.as_str(), e)).collect();
        for e in &mut self.entries {
            let Some(c) = by_name.get(e.name.as_str()) else {
                return contract_err(format!("checkpoint has no entry {:?}", e.name));
            };
            if c.shape != e.value.shape() {
                return shape_err(format!(
                    "checkpoint shape {:?} for {:?}, model expects {:?}",
                    c.shape,
                    e.name,
                    e.value.shape()
                ));
            }
            let n = e.value.len();
            let Some(raw) = bytes.get(c.offset..c.offset + n * 4) else {
                return contract_err(format!("checkpoint blob too short for {:?}", e.name));
            };
            for (dst, chunk) in e.value.data_mut().iter_mut().zip(raw.chunks_exact(4)) {
                *dst = f32::from_le_bytes(chunk.try_into().unwrap());
            }
        }
        Ok(())
    }
}
