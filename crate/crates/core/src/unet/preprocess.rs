use std::f64::consts::PI;

use ndarray::{concatenate, s, Array2, Array3, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// Spacing of the wavenumber channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WsMode {
    /// `k_j = 2π/λ_j` for wavelengths spaced evenly between `2π/k_hi` and
    /// `2π/k_lo`. Row 0 holds the shortest wavelength, so values descend.
    #[default]
    ReciprocalLambda,
    /// Evenly spaced ascending wavenumbers.
    Uniform,
}

/// Wavenumber value attached to each image row.
pub fn ws_grid(k_lo: f64, k_hi: f64, n_rows: usize, mode: WsMode) -> Result<Vec<f64>> {
    ensure!(
        k_lo > 0.0 && k_hi > k_lo && k_hi.is_finite(),
        Domain,
        "wavenumber range [{k_lo}, {k_hi}] is invalid"
    );
    ensure!(n_rows >= 2, Domain, "wavenumber grid needs at least 2 rows, got {n_rows}");
    let last = (n_rows - 1) as f64;
    let values = match mode {
        WsMode::Uniform => {
            let mut v: Vec<f64> = (0..n_rows)
                .map(|j| k_lo + (k_hi - k_lo) * j as f64 / last)
                .collect();
            v[n_rows - 1] = k_hi;
            v
        }
        WsMode::ReciprocalLambda => {
            let (l_lo, l_hi) = (2.0 * PI / k_hi, 2.0 * PI / k_lo);
            let mut v: Vec<f64> = (0..n_rows)
                .map(|j| 2.0 * PI / (l_lo + (l_hi - l_lo) * j as f64 / last))
                .collect();
            v[0] = k_hi;
            v[n_rows - 1] = k_lo;
            v
        }
    };
    Ok(values)
}

/// Stacks an image with its wavenumber channel into a channel-first
/// `2 × H × W` array. The wavenumber row values are mapped affinely from
/// `[k_lo, k_hi]` onto `[0, 1]` and repeated across the width.
pub fn interleave_wavenumber_channel(
    image: &Array2<f64>,
    ws: &[f64],
    k_lo: f64,
    k_hi: f64,
) -> Result<Array3<f64>> {
    let (h, w) = image.dim();
    ensure!(
        ws.len() == h,
        Dimension,
        "wavenumber channel has {} rows, image has {h}",
        ws.len()
    );
    ensure!(k_hi > k_lo, Domain, "wavenumber range [{k_lo}, {k_hi}] is empty");
    let mut out = Array3::zeros((2, h, w));
    out.index_axis_mut(Axis(0), 0).assign(image);
    for (j, &k) in ws.iter().enumerate() {
        out.slice_mut(s![1, j, ..]).fill((k - k_lo) / (k_hi - k_lo));
    }
    Ok(out)
}

pub const N_PATCHES: usize = 4;

/// Cuts a channel-first image into four contiguous horizontal bands.
pub fn split_patches(t: &Array3<f64>) -> Result<Vec<Array3<f64>>> {
    let h = t.dim().1;
    ensure!(
        h % N_PATCHES == 0 && h > 0,
        Dimension,
        "height {h} does not split into {N_PATCHES} bands"
    );
    let band = h / N_PATCHES;
    Ok((0..N_PATCHES)
        .map(|i| t.slice(s![.., i * band..(i + 1) * band, ..]).to_owned())
        .collect())
}

/// Inverse of [`split_patches`].
pub fn merge_patches(patches: &[Array3<f64>]) -> Result<Array3<f64>> {
    ensure!(
        patches.len() == N_PATCHES,
        Dimension,
        "expected {N_PATCHES} patches, got {}",
        patches.len()
    );
    let views: Vec<_> = patches.iter().map(|p| p.view()).collect();
    concatenate(Axis(1), &views)
        .map_err(|e| crate::Error::Dimension(format!("patches do not line up: {e}")))
}

/// Mean and standard deviation used to standardize one patch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Standardization {
    pub mean: f64,
    pub std: f64,
    pub eps: f64,
}

pub const STANDARDIZE_EPS: f64 = 1e-8;

impl Standardization {
    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mean) / (self.std + self.eps)
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * (self.std + self.eps) + self.mean
    }
}

/// Standardizes channel 0 of a patch in place with its own statistics and
/// returns them. Channel 1 is left alone.
pub fn standardize(patch: &mut Array3<f64>, eps: f64) -> Standardization {
    let mut image = patch.index_axis_mut(Axis(0), 0);
    // two-pass for accuracy on dB images with large offsets
    let n = image.len().max(1) as f64;
    let mean = image.iter().sum::<f64>() / n;
    let var = image.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let st = Standardization {
        mean,
        std: var.sqrt(),
        eps,
    };
    image.mapv_inplace(|v| st.apply(v));
    st
}
