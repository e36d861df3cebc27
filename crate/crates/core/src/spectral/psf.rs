use std::f64::consts::PI;

use crate::error::{ensure, Result};
use crate::forward::SweepConfig;

/// Index of the largest value within `range`.
pub fn peak_bin(column: &[f64], range: std::ops::Range<usize>) -> usize {
    let start = range.start;
    column[range]
        .iter()
        .enumerate()
        .fold((start, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (start + i, v)
            } else {
                (bi, bv)
            }
        })
        .0
}

/// Bin at which a reflector `depth` meters beyond the reference mirror peaks
/// after uniform-k resampling over the sweep's wavenumber span and an
/// N-point transform: `2·d·Δk·N / (2π·(N−1))`.
pub fn predicted_peak_bin(depth: f64, cfg: &SweepConfig) -> f64 {
    let (k_min, k_max) = cfg.k_range();
    let n = cfg.n_samples as f64;
    2.0 * depth * (k_max - k_min) * n / (2.0 * PI * (n - 1.0))
}

/// Full width at half maximum (in bins) of the peak at `peak` of a
/// linear-magnitude profile, with linear interpolation between the samples
/// bracketing each half-maximum crossing.
pub fn psf_fwhm(column: &[f64], peak: usize) -> Result<f64> {
    ensure!(peak < column.len(), Measurement, "peak bin {peak} outside profile");
    let top = column[peak];
    ensure!(
        top > 0.0
            && (peak == 0 || column[peak - 1] <= top)
            && (peak + 1 == column.len() || column[peak + 1] <= top),
        Measurement,
        "bin {peak} is not a positive local maximum"
    );
    let half = top / 2.0;

    let mut left = None;
    for i in (0..peak).rev() {
        if column[i] <= half {
            let (lo, hi) = (column[i], column[i + 1]);
            left = Some(i as f64 + (half - lo) / (hi - lo));
            break;
        }
    }
    let mut right = None;
    for j in peak + 1..column.len() {
        if column[j] <= half {
            let (hi, lo) = (column[j - 1], column[j]);
            right = Some((j - 1) as f64 + (hi - half) / (hi - lo));
            break;
        }
    }
    match (left, right) {
        (Some(l), Some(r)) => Ok(r - l),
        _ => Err(crate::Error::Measurement(format!(
            "no half-maximum crossing on both sides of bin {peak}"
        ))),
    }
}

/// [`psf_fwhm`] on a dB profile, converted to linear magnitude first.
pub fn psf_fwhm_db(column_db: &[f64], peak: usize) -> Result<f64> {
    let linear: Vec<f64> = column_db.iter().map(|db| 10f64.powf(db / 20.0)).collect();
    psf_fwhm(&linear, peak)
}
