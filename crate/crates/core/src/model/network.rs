use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::blocks::{
    bilstm, cbam_apply, fusion_head, residual_fusion, se_block, CbamWeights, HeadWeights, SeWeights,
};
use super::config::{ModelConfig, NormKind};
use super::FRAMES;
use crate::error::{shape_err, Result};
use crate::tensor::{LstmWeights, ParamId, ParamStore, PoolMode, RunningStats, Tape, Tensor, Var};
use crate::topomap::{FRAME_BANDS, FRAME_SIZE};

/// One row of the layer summary printed by `describe`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayerRow {
    pub name: String,
    pub kind: String,
    /// Per-sample output shape.
    pub output: Vec<usize>,
    pub params: usize,
}

/// The full network and its parameters.
#[derive(Clone, Debug)]
pub struct Stiln {
    config: ModelConfig,
    store: ParamStore,
}

const CONV_KERNELS: [usize; 5] = [5, 5, 3, 3, 3];

fn kaiming(shape: &[usize], fan_in: usize, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::uniform(shape, (6.0 / fan_in as f32).sqrt(), rng)
}

impl Stiln {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = ParamStore::new();
        let v = config.variant;

        if v.uses_cbam() {
            let (c, h) = (FRAME_BANDS, config.cbam_hidden());
            s.add("cbam.mlp1.weight", kaiming(&[c, h], c, &mut rng))?;
            s.add("cbam.mlp1.bias", Tensor::zeros(&[h]))?;
            s.add("cbam.mlp2.weight", kaiming(&[h, c], h, &mut rng))?;
            s.add("cbam.mlp2.bias", Tensor::zeros(&[c]))?;
            s.add("cbam.spatial.weight", kaiming(&[7, 7, 2, 1], 98, &mut rng))?;
        }

        let mut c_in = FRAME_BANDS;
        for (i, (&c_out, &k)) in config.conv_widths.iter().zip(&CONV_KERNELS).enumerate() {
            let n = i + 1;
            s.add(
                &format!("conv{n}.weight"),
                kaiming(&[k, k, c_in, c_out], k * k * c_in, &mut rng),
            )?;
            s.add(&format!("norm{n}.weight"), Tensor::full(&[c_out], 1.0))?;
            s.add(&format!("norm{n}.bias"), Tensor::zeros(&[c_out]))?;
            if Self::norm_kind_of(&config, n) == NormKind::Batch {
                let stats = RunningStats::new(c_out);
                s.add_buffer(
                    &format!("norm{n}.running_mean"),
                    Tensor::new(vec![c_out], stats.mean)?,
                )?;
                s.add_buffer(
                    &format!("norm{n}.running_var"),
                    Tensor::new(vec![c_out], stats.var)?,
                )?;
            }
            c_in = c_out;
        }

        let c5 = config.conv_widths[4];
        s.add("fusion.weight", kaiming(&[3, 3, c5, c5], 9 * c5, &mut rng))?;
        s.add("fusion.bias", Tensor::zeros(&[c5]))?;
        if v.uses_se() {
            let r = c5 / config.se_ratio;
            s.add("se.fc1.weight", kaiming(&[c5, r], c5, &mut rng))?;
            s.add("se.fc2.weight", kaiming(&[r, c5], r, &mut rng))?;
        }

        let d_in = config.frame_feature_len();
        let d = config.lstm_hidden;
        let dirs: &[&str] = if v.bidirectional() {
            &["fwd", "bwd"]
        } else {
            &["fwd"]
        };
        let bound = 1.0 / (d as f32).sqrt();
        for dir in dirs {
            s.add(
                &format!("lstm.{dir}.wx"),
                Tensor::uniform(&[d_in, 4 * d], bound, &mut rng),
            )?;
            s.add(
                &format!("lstm.{dir}.wh"),
                Tensor::uniform(&[d, 4 * d], bound, &mut rng),
            )?;
            let mut bias = Tensor::uniform(&[4 * d], bound, &mut rng);
            for b in &mut bias.data_mut()[d..2 * d] {
                *b += 1.0;
            }
            s.add(&format!("lstm.{dir}.bias"), bias)?;
        }

        s.add("conv6.weight", kaiming(&[1, 1, 1, 1], 1, &mut rng))?;
        s.add("conv6.bias", Tensor::zeros(&[1]))?;
        let head_in = config.head_input_len();
        s.add(
            "fc.weight",
            kaiming(&[head_in, config.fc_hidden], head_in, &mut rng),
        )?;
        s.add("fc.bias", Tensor::zeros(&[config.fc_hidden]))?;
        s.add(
            "out.weight",
            kaiming(&[config.fc_hidden, 2], config.fc_hidden, &mut rng),
        )?;
        s.add("out.bias", Tensor::zeros(&[2]))?;

        Ok(Self { config, store: s })
    }

    fn norm_kind_of(config: &ModelConfig, layer: usize) -> NormKind {
        if layer <= 2 {
            config.variant.early_norm()
        } else {
            NormKind::Batch
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Trainable scalar count.
    pub fn param_count(&self) -> usize {
        self.store.num_trainable()
    }

    fn id(&self, name: &str) -> ParamId {
        self.store
            .id(name)
            .unwrap_or_else(|| panic!("parameter {name} is registered by the constructor"))
    }

    fn p(&self, tape: &mut Tape, name: &str) -> Var {
        tape.param(&self.store, self.id(name))
    }

    fn norm(&mut self, tape: &mut Tape, x: Var, layer: usize, training: bool) -> Result<Var> {
        let gamma = self.p(tape, &format!("norm{layer}.weight"));
        let beta = self.p(tape, &format!("norm{layer}.bias"));
        match Self::norm_kind_of(&self.config, layer) {
            NormKind::Instance => tape.norm_instance(x, gamma, beta),
            NormKind::Batch => {
                let mean_id = self.id(&format!("norm{layer}.running_mean"));
                let var_id = self.id(&format!("norm{layer}.running_var"));
                let mut stats = RunningStats {
                    mean: self.store.value(mean_id).data().to_vec(),
                    var: self.store.value(var_id).data().to_vec(),
                };
                let y = tape.norm_batch(x, gamma, beta, &mut stats, training)?;
                if training {
                    let (m, v) = self.store.pair_mut(mean_id, var_id);
                    m.data_mut().copy_from_slice(&stats.mean);
                    v.data_mut().copy_from_slice(&stats.var);
                }
                Ok(y)
            }
        }
    }

    /// Shared per-frame extractor: `N×32×32×5` to `N×8×8×C5`.
    fn frame_features(&mut self, tape: &mut Tape, x: Var, training: bool) -> Result<Var> {
        let mut h = x;
        if self.config.variant.uses_cbam() {
            let w = CbamWeights {
                w1: self.p(tape, "cbam.mlp1.weight"),
                b1: self.p(tape, "cbam.mlp1.bias"),
                w2: self.p(tape, "cbam.mlp2.weight"),
                b2: self.p(tape, "cbam.mlp2.bias"),
                spatial: self.p(tape, "cbam.spatial.weight"),
            };
            h = cbam_apply(tape, h, &w)?;
        }
        for (i, &k) in CONV_KERNELS.iter().enumerate() {
            let n = i + 1;
            let kernel = self.p(tape, &format!("conv{n}.weight"));
            h = tape.conv2d(h, kernel, None, 1, k / 2)?;
            h = self.norm(tape, h, n, training)?;
            h = tape.relu(h);
            if n == 2 || n == 4 {
                h = tape.pool2d(h, 2, PoolMode::Max)?;
            }
        }
        let kernel = self.p(tape, "fusion.weight");
        let bias = self.p(tape, "fusion.bias");
        h = residual_fusion(tape, h, kernel, bias, self.config.variant.residual())?;
        if self.config.variant.uses_se() {
            let w = SeWeights {
                w1: self.p(tape, "se.fc1.weight"),
                w2: self.p(tape, "se.fc2.weight"),
            };
            h = se_block(tape, h, &w)?;
        }
        Ok(h)
    }

    fn lstm_weights(&self, tape: &mut Tape, dir: &str) -> LstmWeights {
        LstmWeights {
            wx: self.p(tape, &format!("lstm.{dir}.wx")),
            wh: self.p(tape, &format!("lstm.{dir}.wh")),
            bias: self.p(tape, &format!("lstm.{dir}.bias")),
        }
    }

    /// Forward pass over `B×6×32×32×5` frame sequences, returning `B×2`
    /// sigmoid outputs for the (low, high) classes. Batch-norm running
    /// statistics are updated when `training` is set.
    pub fn forward(&mut self, tape: &mut Tape, frames: &Tensor, training: bool) -> Result<Var> {
        let b = match *frames.shape() {
            [b, FRAMES, FRAME_SIZE, FRAME_SIZE, FRAME_BANDS] => b,
            ref s => {
                return shape_err(format!(
                "model input must be Bx{FRAMES}x{FRAME_SIZE}x{FRAME_SIZE}x{FRAME_BANDS}, got {s:?}"
            ))
            }
        };
        let x = tape.constant(frames.clone().reshape(&[
            b * FRAMES,
            FRAME_SIZE,
            FRAME_SIZE,
            FRAME_BANDS,
        ])?);
        let feat = self.frame_features(tape, x, training)?;
        let d = self.config.frame_feature_len();
        let per_frame = tape.reshape(feat, &[b, FRAMES, d])?;
        let seq = (0..FRAMES)
            .map(|t| {
                let step = tape.slice(per_frame, 1, t, 1)?;
                tape.reshape(step, &[b, d])
            })
            .collect::<Result<Vec<_>>>()?;

        let fwd = self.lstm_weights(tape, "fwd");
        let bwd = self
            .config
            .variant
            .bidirectional()
            .then(|| self.lstm_weights(tape, "bwd"));
        let steps = bilstm(tape, &seq, &fwd, bwd.as_ref())?;
        let temporal = tape.concat(&steps, 1)?;

        let channel_major = tape.permute(feat, &[0, 3, 1, 2])?;
        let spatial = tape.reshape(channel_major, &[b, FRAMES * d])?;
        let head = HeadWeights {
            down_kernel: self.p(tape, "conv6.weight"),
            down_bias: self.p(tape, "conv6.bias"),
            fc_w: self.p(tape, "fc.weight"),
            fc_b: self.p(tape, "fc.bias"),
            out_w: self.p(tape, "out.weight"),
            out_b: self.p(tape, "out.bias"),
        };
        fusion_head(
            tape,
            spatial,
            temporal,
            &head,
            self.config.head_downsample_stride,
        )
    }

    /// Inference-mode probabilities, `B×2`.
    pub fn predict(&mut self, frames: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, frames, false)?;
        Ok(tape.value(out).clone())
    }

    fn prefix_params(&self, prefix: &str) -> usize {
        self.store
            .trainable_ids()
            .filter(|&id| self.store.name(id).starts_with(prefix))
            .map(|id| self.store.value(id).len())
            .sum()
    }

    /// Per-layer output shapes and trainable parameter counts.
    pub fn describe(&self) -> Vec<LayerRow> {
        let c = &self.config;
        let v = c.variant;
        let row = |name: &str, kind: String, output: Vec<usize>, params: usize| LayerRow {
            name: name.into(),
            kind,
            output,
            params,
        };
        let mut rows = vec![row(
            "input",
            "frames".into(),
            vec![FRAMES, FRAME_SIZE, FRAME_SIZE, FRAME_BANDS],
            0,
        )];
        if v.uses_cbam() {
            rows.push(row(
                "cbam",
                "channel + spatial attention".into(),
                vec![FRAMES, FRAME_SIZE, FRAME_SIZE, FRAME_BANDS],
                self.prefix_params("cbam."),
            ));
        }
        let mut side = FRAME_SIZE;
        for (i, (&w, &k)) in c.conv_widths.iter().zip(&CONV_KERNELS).enumerate() {
            let n = i + 1;
            let norm = match Self::norm_kind_of(c, n) {
                NormKind::Instance => "IN",
                NormKind::Batch => "BN",
            };
            let pooled = n == 2 || n == 4;
            if pooled {
                side /= 2;
            }
            let kind = format!(
                "conv {k}x{k} + {norm} + ReLU{}",
                if pooled { " + maxpool 2" } else { "" }
            );
            let params =
                self.prefix_params(&format!("conv{n}.")) + self.prefix_params(&format!("norm{n}."));
            rows.push(row(
                &format!("conv{n}"),
                kind,
                vec![FRAMES, side, side, w],
                params,
            ));
        }
        let c5 = c.conv_widths[4];
        let fusion_kind = if v.residual() {
            "residual conv 3x3"
        } else {
            "conv 3x3"
        };
        rows.push(row(
            "fusion",
            fusion_kind.into(),
            vec![FRAMES, side, side, c5],
            self.prefix_params("fusion."),
        ));
        if v.uses_se() {
            rows.push(row(
                "se",
                format!("squeeze-excitation r={}", c.se_ratio),
                vec![FRAMES, side, side, c5],
                self.prefix_params("se."),
            ));
        }
        let dirs = if v.bidirectional() { 2 } else { 1 };
        let lstm_kind = if dirs == 2 {
            "bidirectional LSTM"
        } else {
            "LSTM"
        };
        rows.push(row(
            "lstm",
            lstm_kind.into(),
            vec![FRAMES, dirs * c.lstm_hidden],
            self.prefix_params("lstm."),
        ));
        rows.push(row(
            "conv6",
            format!("1-D conv stride {}", c.head_downsample_stride),
            vec![c.downsampled_len()],
            self.prefix_params("conv6."),
        ));
        rows.push(row("concat", "concat".into(), vec![c.head_input_len()], 0));
        rows.push(row(
            "fc",
            "dense + ReLU".into(),
            vec![c.fc_hidden],
            self.prefix_params("fc."),
        ));
        rows.push(row(
            "out",
            "dense + sigmoid".into(),
            vec![2],
            self.prefix_params("out."),
        ));
        rows
    }
}
