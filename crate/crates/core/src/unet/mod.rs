//! The residual attention U-Net and its input preparation.
//!
//! A λ-space image is paired with a per-row wavenumber channel, cut into
//! four horizontal bands and standardized. Each band goes through an
//! encoder of residual blocks and max pooling, a bottleneck, and a decoder
//! whose skip connections are weighted by attention gates.

mod model;
mod preprocess;

pub use model::{ModelConfig, ParamStore, Scope, WaveUnet, BN_EPS, BN_MOMENTUM};
pub use preprocess::{
    interleave_wavenumber_channel, merge_patches, split_patches, standardize, ws_grid, Standardization,
    WsMode, N_PATCHES, STANDARDIZE_EPS,
};
