//! The spatial-temporal network: per-frame attention-gated CNN with shared
//! weights, bidirectional LSTM over the frame sequence and a fusion head.

mod blocks;
mod config;
mod network;

pub use blocks::{
    bilstm, cbam_apply, channel_attention, fusion_head, residual_fusion, se_block,
    spatial_attention, CbamWeights, HeadWeights, SeWeights,
};
pub use config::{make_ablation, ModelConfig, NormKind, Variant};
pub use network::{LayerRow, Stiln};

/// Frames per sample.
pub const FRAMES: usize = 6;
