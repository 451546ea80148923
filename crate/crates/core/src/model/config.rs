use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::topomap::{FRAME_BANDS, FRAME_SIZE};

/// Structural variants for the ablation study.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    /// Full model.
    #[serde(rename = "NET0")]
    Net0,
    /// Without CBAM.
    #[serde(rename = "NET1")]
    Net1,
    /// Instance norms replaced by batch norms.
    #[serde(rename = "NET2")]
    Net2,
    /// Residual fusion replaced by a single 3×3 convolution.
    #[serde(rename = "NET3")]
    Net3,
    /// Without SE.
    #[serde(rename = "NET4")]
    Net4,
    /// Unidirectional LSTM.
    #[serde(rename = "NET5")]
    Net5,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Net0,
        Variant::Net1,
        Variant::Net2,
        Variant::Net3,
        Variant::Net4,
        Variant::Net5,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Net0 => "NET0",
            Variant::Net1 => "NET1",
            Variant::Net2 => "NET2",
            Variant::Net3 => "NET3",
            Variant::Net4 => "NET4",
            Variant::Net5 => "NET5",
        }
    }

    pub fn uses_cbam(self) -> bool {
        self != Variant::Net1
    }

    pub fn early_norm(self) -> NormKind {
        if self == Variant::Net2 {
            NormKind::Batch
        } else {
            NormKind::Instance
        }
    }

    pub fn residual(self) -> bool {
        self != Variant::Net3
    }

    pub fn uses_se(self) -> bool {
        self != Variant::Net4
    }

    pub fn bidirectional(self) -> bool {
        self != Variant::Net5
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}, expected NET0..NET5")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    Instance,
    Batch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: Variant,
    pub lstm_hidden: usize,
    /// Output channels of CONV1..CONV5.
    pub conv_widths: [usize; 5],
    pub se_ratio: usize,
    pub head_downsample_stride: usize,
    pub fc_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Net0,
            lstm_hidden: 64,
            conv_widths: [32, 64, 64, 64, 64],
            se_ratio: 4,
            head_downsample_stride: 48,
            fc_hidden: 128,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.conv_widths.contains(&0) || self.lstm_hidden == 0 || self.fc_hidden == 0 {
            return config_err(format!("layer widths must be positive: {self:?}"));
        }
        if self.se_ratio == 0 || !self.conv_widths[4].is_multiple_of(self.se_ratio) {
            return config_err(format!(
                "SE ratio {} must divide the CONV5 width {}",
                self.se_ratio, self.conv_widths[4]
            ));
        }
        if self.head_downsample_stride == 0 {
            return config_err("head downsample stride must be positive");
        }
        Ok(())
    }

    pub fn input_shape(&self) -> [usize; 3] {
        [FRAME_SIZE, FRAME_SIZE, FRAME_BANDS]
    }

    /// Side of the per-frame feature map after two 2× poolings.
    pub fn feature_side(&self) -> usize {
        FRAME_SIZE / 4
    }

    /// Flattened per-frame spatial feature length.
    pub fn frame_feature_len(&self) -> usize {
        self.feature_side().pow(2) * self.conv_widths[4]
    }

    /// Length of the strided 1-D downsampling of all frames' features.
    pub fn downsampled_len(&self) -> usize {
        (super::FRAMES * self.frame_feature_len() - 1) / self.head_downsample_stride + 1
    }

    pub fn temporal_width(&self) -> usize {
        let dirs = if self.variant.bidirectional() { 2 } else { 1 };
        super::FRAMES * dirs * self.lstm_hidden
    }

    pub fn head_input_len(&self) -> usize {
        self.downsampled_len() + self.temporal_width()
    }

    /// Hidden width of the CBAM channel MLP.
    pub fn cbam_hidden(&self) -> usize {
        (FRAME_BANDS / self.se_ratio).max(1)
    }
}

/// Configuration of an ablation variant derived from `base`.
pub fn make_ablation(variant: Variant, base: &ModelConfig) -> Result<ModelConfig> {
    base.validate()?;
    Ok(ModelConfig {
        variant,
        ..base.clone()
    })
}
