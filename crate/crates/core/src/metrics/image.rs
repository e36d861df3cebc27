use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// Maps `[db_lo, db_hi]` affinely onto `0..=255`, clamping outside values and
/// rounding halves away from zero.
pub fn display_map(db: &Array2<f64>, db_lo: f64, db_hi: f64) -> Result<Array2<u8>> {
    ensure!(
        db_hi > db_lo && db_lo.is_finite() && db_hi.is_finite(),
        Domain,
        "display window [{db_lo}, {db_hi}] is degenerate"
    );
    let scale = 255.0 / (db_hi - db_lo);
    Ok(db.mapv(|v| ((v - db_lo) * scale).clamp(0.0, 255.0).round() as u8))
}

/// 8-bit image rescaled to [0, 1].
pub fn to_unit(img: &Array2<u8>) -> Array2<f64> {
    img.mapv(|v| f64::from(v) / 255.0)
}

fn same_shape(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> Result<()> {
    ensure!(
        a.dim() == b.dim(),
        Dimension,
        "images differ in shape: {:?} vs {:?}",
        a.dim(),
        b.dim()
    );
    ensure!(!a.is_empty(), Dimension, "images are empty");
    Ok(())
}

pub fn mse(a: &Array2<f64>, b: &Array2<f64>) -> Result<f64> {
    same_shape(&a.view(), &b.view())?;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64)
}

/// `10·log10(max²/MSE)`; identical images give `f64::INFINITY`.
pub fn psnr(a: &Array2<f64>, b: &Array2<f64>, max_value: f64) -> Result<f64> {
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (max_value * max_value / m).log10())
}

/// Window and stabilizing constants for SSIM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SsimConfig {
    /// Side of the square Gaussian window, in pixels.
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
        }
    }
}

impl SsimConfig {
    /// Normalized separable Gaussian weights, row-major `window × window`.
    fn weights(&self) -> Vec<f64> {
        let r = (self.window as f64 - 1.0) / 2.0;
        let g: Vec<f64> = (0..self.window)
            .map(|i| (-((i as f64 - r).powi(2)) / (2.0 * self.sigma * self.sigma)).exp())
            .collect();
        let mut w: Vec<f64> = g.iter().flat_map(|a| g.iter().map(move |b| a * b)).collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        w
    }
}

/// Mean SSIM with the default 11×11 window.
pub fn ssim(a: &Array2<f64>, b: &Array2<f64>, max_value: f64) -> Result<f64> {
    ssim_with(a, b, max_value, &SsimConfig::default())
}

/// Mean of the local SSIM map over every window position that fits
/// entirely inside the image.
pub fn ssim_with(a: &Array2<f64>, b: &Array2<f64>, max_value: f64, cfg: &SsimConfig) -> Result<f64> {
    same_shape(&a.view(), &b.view())?;
    let (h, w) = a.dim();
    let n = cfg.window;
    ensure!(n >= 1 && cfg.sigma > 0.0, Domain, "SSIM window must be positive");
    ensure!(
        h >= n && w >= n,
        Domain,
        "{h}×{w} image is smaller than the {n}×{n} SSIM window"
    );
    let weights = cfg.weights();
    let c1 = (cfg.k1 * max_value).powi(2);
    let c2 = (cfg.k2 * max_value).powi(2);
    let mut total = 0.0;
    for y in 0..=h - n {
        for x in 0..=w - n {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for dy in 0..n {
                for dx in 0..n {
                    let wt = weights[dy * n + dx];
                    let (p, q) = (a[[y + dy, x + dx]], b[[y + dy, x + dx]]);
                    ma += wt * p;
                    mb += wt * q;
                    saa += wt * p * p;
                    sbb += wt * q * q;
                    sab += wt * p * q;
                }
            }
            let va = saa - ma * ma;
            let vb = sbb - mb * mb;
            let cov = sab - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
    }
    Ok(total / ((h - n + 1) * (w - n + 1)) as f64)
}
