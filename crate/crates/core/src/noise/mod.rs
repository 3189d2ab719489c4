//! Synthetic data, correlated noise, large-noise region analysis and
//! quality metrics.

mod clean;
mod correlated;
mod metrics;
mod regions;

pub use clean::{gen_checker, gen_clean, CleanPattern};
pub use correlated::{
    gen_correlated_noise, gen_correlated_noise_shaped, parse_noise_kernels, shaping_kernel,
    NoiseKernel, NoiseSpec,
};
pub use metrics::{mse, psnr, ssim, PSNR_CAP};
pub use regions::{
    analyze_regions, bucket_of, default_threshold, mad_sigma, NoiseRegionStats, BUCKET_LABELS,
    LARGE_AREA,
};
