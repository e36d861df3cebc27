//! Image quality against a reference: MSE, PSNR and SSIM.
//!
//! B-scans are compared after mapping a dB window to 8-bit display values
//! and rescaling those to [0, 1], so `max_value` is 1 for report numbers.

mod image;
mod report;

pub use image::{display_map, mse, psnr, ssim, ssim_with, to_unit, SsimConfig};
pub use report::{
    evaluate_volume, mean_by_variant, metrics_csv, DisplayWindow, EvalSample, MetricsRecord, Variant, VariantSummary,
    CSV_HEADER,
};
