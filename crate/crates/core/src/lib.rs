//! Multi-mask blind-spot network engine.
//!
//! A small, dependency-light substrate for self-supervised denoising with
//! blind-spot networks: dense `f64` tensors with exact gradients for masked
//! and dilated convolutions, pixel-shuffle downsampling, three network
//! builders (centre-masked baseline, naive multi-mask stack, and the fused
//! multi-mask network), an L1 self-supervised trainer, and the tooling used
//! to check the blind-spot property both structurally and numerically.

pub mod adam;
pub mod conv;
pub mod error;
pub mod io;
pub mod mask;
pub mod model;
pub mod noise;
pub mod pd;
pub mod tensor;
pub mod train;

pub use adam::{adam_step, AdamState};
pub use conv::{conv2d, conv2d_backward, ConvGrads, ConvParams};
pub use error::{Error, Result};
pub use mask::{
    empirical_exclusion, exclusion_set, render_mask, ExclusionSet, KernelMask, MaskShape, Offset,
};
pub use model::{
    build, build_apbsn, build_mmbsn, build_smmbsn, count_params, ArchKind, ArchitectureConfig,
    Checkpoint, ModelGraph,
};
pub use pd::{pd, pd_inv, random_replace_refine, PdStride};
pub use tensor::{Shape4, Tensor4};
pub use train::{denoise, train, train_step, NoisyDataset, RefineOptions, TrainOutcome, TrainingConfig};
pub use noise::{analyze_regions, psnr, ssim, NoiseRegionStats, NoiseSpec};
