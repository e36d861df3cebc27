use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// Laser sweep parameters. All lengths in meters, times in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Central wavelength.
    pub lambda_c: f64,
    /// Full sweep bandwidth.
    pub delta_lambda: f64,
    /// Spectral samples per A-line.
    pub n_samples: usize,
    /// Sweep duration. Only ratios enter the physics, so 1 s is a fine unit.
    pub sweep_duration: f64,
    /// FWHM of the Gaussian source spectrum, in wavelength units.
    pub spectrum_fwhm: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            lambda_c: 1309e-9,
            delta_lambda: 100e-9,
            n_samples: 2304,
            sweep_duration: 1.0,
            spectrum_fwhm: 60e-9,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.delta_lambda > 0.0 && self.delta_lambda.is_finite(),
            Config,
            "delta_lambda must be positive, got {}",
            self.delta_lambda
        );
        ensure!(
            self.lambda_c > self.delta_lambda / 2.0,
            Config,
            "lambda_c ({}) must exceed delta_lambda/2 so every wavelength is positive",
            self.lambda_c
        );
        ensure!(
            self.n_samples >= 2,
            Config,
            "n_samples must be at least 2, got {}",
            self.n_samples
        );
        ensure!(
            self.sweep_duration > 0.0,
            Config,
            "sweep_duration must be positive"
        );
        ensure!(
            self.spectrum_fwhm > 0.0,
            Config,
            "spectrum_fwhm must be positive"
        );
        Ok(())
    }

    /// Sweep rate dλ/dt.
    pub fn beta(&self) -> f64 {
        self.delta_lambda / self.sweep_duration
    }

    /// Wavenumber of the central wavelength, 2π/λ_c.
    pub fn k_center(&self) -> f64 {
        2.0 * PI / self.lambda_c
    }

    /// `(k_min, k_max)` visited by the sweep.
    pub fn k_range(&self) -> (f64, f64) {
        let half = self.delta_lambda / 2.0;
        (
            2.0 * PI / (self.lambda_c + half),
            2.0 * PI / (self.lambda_c - half),
        )
    }

    /// Source FWHM mapped to wavenumber with the first-order relation
    /// Δk ≈ 2πΔλ/λ_c².
    pub fn spectrum_fwhm_k(&self) -> f64 {
        2.0 * PI * self.spectrum_fwhm / (self.lambda_c * self.lambda_c)
    }

    /// Depth that lands on the last retained bin (N/2) after uniform-k
    /// resampling and an N-point transform.
    pub fn max_depth(&self) -> f64 {
        let (k_min, k_max) = self.k_range();
        PI * (self.n_samples - 1) as f64 / (2.0 * (k_max - k_min))
    }

    /// Depth whose fringe lands on (fractional) bin `bin` after uniform-k
    /// resampling.
    pub fn depth_for_bin(&self, bin: f64) -> f64 {
        let (k_min, k_max) = self.k_range();
        let n = self.n_samples as f64;
        PI * bin * (n - 1.0) / ((k_max - k_min) * n)
    }
}

/// Wavelengths visited by the sweep, strictly increasing and uniformly spaced.
#[derive(Debug, Clone, PartialEq)]
pub struct WavelengthGrid(Vec<f64>);

impl WavelengthGrid {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Strictly monotonic wavenumbers in rad/m.
#[derive(Debug, Clone, PartialEq)]
pub struct WavenumberGrid(Vec<f64>);

impl WavenumberGrid {
    /// Wraps `values`, rejecting grids that are not strictly monotonic.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        ensure!(values.len() >= 2, Domain, "a wavenumber grid needs at least 2 points");
        ensure!(
            values.iter().all(|k| k.is_finite()),
            Domain,
            "wavenumber grid contains non-finite values"
        );
        let ascending = values.windows(2).all(|w| w[1] > w[0]);
        let descending = values.windows(2).all(|w| w[1] < w[0]);
        ensure!(
            ascending || descending,
            Domain,
            "wavenumber grid must be strictly monotonic"
        );
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_ascending(&self) -> bool {
        self.0[1] > self.0[0]
    }

    pub fn min(&self) -> f64 {
        self.0[0].min(self.0[self.0.len() - 1])
    }

    pub fn max(&self) -> f64 {
        self.0[0].max(self.0[self.0.len() - 1])
    }
}

/// λ_j = λ_c + β·t_j with t_j spanning [−ΔT/2, +ΔT/2] inclusive.
pub fn sweep_wavelength_grid(cfg: &SweepConfig) -> Result<WavelengthGrid> {
    cfg.validate()?;
    let n = cfg.n_samples;
    let step = cfg.sweep_duration / (n - 1) as f64;
    let beta = cfg.beta();
    let values = (0..n)
        .map(|j| {
            let t = -cfg.sweep_duration / 2.0 + j as f64 * step;
            cfg.lambda_c + beta * t
        })
        .collect();
    Ok(WavelengthGrid(values))
}

/// k_j = 2π/λ_j. A wavelength-ascending grid yields descending wavenumbers.
pub fn to_wavenumbers(grid: &WavelengthGrid) -> Result<WavenumberGrid> {
    ensure!(
        grid.values().iter().all(|&l| l > 0.0),
        Domain,
        "wavelengths must be positive"
    );
    WavenumberGrid::new(grid.values().iter().map(|&l| 2.0 * PI / l).collect())
}

/// `n` equally spaced ascending wavenumbers from `k_min` to `k_max`.
pub fn uniform_k_grid(k_min: f64, k_max: f64, n: usize) -> Result<WavenumberGrid> {
    ensure!(
        k_max > k_min && k_min.is_finite() && k_max.is_finite(),
        Domain,
        "degenerate wavenumber range [{k_min}, {k_max}]"
    );
    ensure!(n >= 2, Domain, "uniform grid needs n >= 2, got {n}");
    let step = (k_max - k_min) / (n - 1) as f64;
    let mut values: Vec<f64> = (0..n).map(|j| k_min + j as f64 * step).collect();
    values[n - 1] = k_max;
    WavenumberGrid::new(values)
}

/// Sweep time at which wavenumber `k` is visited:
/// t = (2πΔT/Δλ)(1/k − 1/k_c).
pub fn time_from_wavenumber(k: f64, cfg: &SweepConfig) -> Result<f64> {
    ensure!(k > 0.0, Domain, "wavenumber must be positive, got {k}");
    let kc = cfg.k_center();
    // (k_c − k)/(k·k_c) avoids cancellation between 1/k and 1/k_c near k_c.
    Ok(2.0 * PI / cfg.beta() * (kc - k) / (k * kc))
}

/// Power-series approximation of [`time_from_wavenumber`] around k_c,
/// truncated after `order` terms:
/// t ≈ (2π/β)(1/k_c) Σ_{n=1..order} (−x)ⁿ with x = k/k_c − 1.
pub fn time_from_wavenumber_series(k: f64, cfg: &SweepConfig, order: usize) -> Result<f64> {
    ensure!(k > 0.0, Domain, "wavenumber must be positive, got {k}");
    ensure!(order >= 1, Domain, "series order must be at least 1");
    let kc = cfg.k_center();
    let x = (k - kc) / kc;
    let mut term = 1.0;
    let mut sum = 0.0;
    for _ in 0..order {
        term *= -x;
        sum += term;
    }
    Ok(2.0 * PI / cfg.beta() / kc * sum)
}
