//! Deterministic reconstruction of fringes into B-scans.
//!
//! Two branches share the same building blocks:
//!
//! ```text
//! λ-space:  subtract background → Hann → IDFT → 20·log10|·| → drop conjugate half
//! classic:  subtract background → resample to uniform k → Hann → IDFT → 20·log10|·| → drop conjugate half
//! ```

mod pipeline;
mod psf;
mod resample;
mod transform;
mod window;

pub use pipeline::{
    apply_hann, average_bscans, classic_reconstruct, lambda_space_image, magnitude_db,
    subtract_background, truncate_conjugate, BScan, BScanKind, ComplexProfile, DEFAULT_DB_FLOOR,
};
pub use psf::{peak_bin, predicted_peak_bin, psf_fwhm, psf_fwhm_db};
pub use resample::{interpolate_cubic_spline, interpolate_linear, resample_to_linear_k, Interpolation};
pub use transform::{idft_columns, idft_direct, idft_fast};
pub use window::{hann_window, hann_weights};
