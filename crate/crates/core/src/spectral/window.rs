use std::f64::consts::PI;

use crate::error::{ensure, Result};

/// Symmetric Hann weight `0.5·(1 − cos(2πn/(N−1)))`.
pub fn hann_window(n: usize, len: usize) -> Result<f64> {
    ensure!(len >= 2, Domain, "Hann window length must be at least 2, got {len}");
    ensure!(n < len, Domain, "index {n} outside window of length {len}");
    Ok(0.5 * (1.0 - (2.0 * PI * n as f64 / (len - 1) as f64).cos()))
}

/// All `len` symmetric Hann weights.
pub fn hann_weights(len: usize) -> Result<Vec<f64>> {
    (0..len).map(|n| hann_window(n, len)).collect()
}
