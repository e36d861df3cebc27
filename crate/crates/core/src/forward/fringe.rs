use ndarray::Array2;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::phantom::Phantom;
use super::sweep::{sweep_wavelength_grid, to_wavenumbers, uniform_k_grid, SweepConfig, WavenumberGrid};
use crate::error::{ensure, Error, Result};
use crate::rng::stream;

/// Sampling grid a fringe frame was recorded on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridTag {
    LambdaLinear,
    KLinear,
}

impl GridTag {
    pub fn code(self) -> u8 {
        match self {
            GridTag::LambdaLinear => 0,
            GridTag::KLinear => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(GridTag::LambdaLinear),
            1 => Some(GridTag::KLinear),
            _ => None,
        }
    }
}

/// Raw interferogram: one row per spectral sample, one column per A-line.
#[derive(Debug, Clone, PartialEq)]
pub struct FringeFrame {
    pub samples: Array2<f64>,
    pub grid: GridTag,
}

impl FringeFrame {
    pub fn new(samples: Array2<f64>, grid: GridTag) -> Result<Self> {
        ensure!(
            samples.iter().all(|v| v.is_finite()),
            Numeric,
            "fringe frame contains non-finite samples"
        );
        Ok(Self { samples, grid })
    }

    pub fn n_rows(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.samples.ncols()
    }
}

/// Noise applied when synthesizing a volume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Redraw scatterer phases for every repeat (fully developed speckle).
    #[serde(default)]
    pub speckle: bool,
    /// Standard deviation of zero-mean Gaussian noise added to every sample.
    #[serde(default)]
    pub detector_sigma: f64,
}

impl NoiseConfig {
    pub const OFF: NoiseConfig = NoiseConfig {
        speckle: false,
        detector_sigma: 0.0,
    };
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self::OFF
    }
}

/// Gaussian source spectrum centered at k_c = 2π/λ_c with unit peak.
pub fn source_spectrum(kgrid: &WavenumberGrid, cfg: &SweepConfig) -> Vec<f64> {
    let kc = cfg.k_center();
    let fwhm = cfg.spectrum_fwhm_k();
    let a = 4.0 * std::f64::consts::LN_2 / (fwhm * fwhm);
    kgrid
        .values()
        .iter()
        .map(|&k| (-a * (k - kc) * (k - kc)).exp())
        .collect()
}

/// One A-line of the interferometric signal
///
/// I(k) = S(k)/4 · [R² + Σ 2R√s·cos(2k(d − d_R) + φ) + |Σ √s·e^{i(2kd + φ)}|²]
///
/// where the last (sample autocorrelation) term is included only on request.
/// Layers must already be expanded with [`Phantom::realize`].
pub fn synthesize_fringe(
    phantom: &Phantom,
    kgrid: &WavenumberGrid,
    spectrum: &[f64],
    include_autocorrelation: bool,
) -> Result<Vec<f64>> {
    ensure!(
        kgrid.len() == spectrum.len(),
        Dimension,
        "wavenumber grid has {} points but spectrum has {}",
        kgrid.len(),
        spectrum.len()
    );
    ensure!(
        phantom.layers.is_empty(),
        Usage,
        "layered phantoms must be realized into point scatterers before synthesis"
    );
    let r = phantom.reference_reflectivity;
    let d_r = phantom.reference_depth;
    let amplitudes: Vec<f64> = phantom.reflectors.iter().map(|m| m.reflectivity.sqrt()).collect();
    let fringe = kgrid
        .values()
        .iter()
        .zip(spectrum)
        .map(|(&k, &s)| {
            let mut total = r * r;
            let (mut re, mut im) = (0.0, 0.0);
            for (m, &a) in phantom.reflectors.iter().zip(&amplitudes) {
                total += 2.0 * r * a * (2.0 * k * (m.depth - d_r) + m.phase).cos();
                if include_autocorrelation {
                    let (sin, cos) = (2.0 * k * m.depth + m.phase).sin_cos();
                    re += a * cos;
                    im += a * sin;
                }
            }
            if include_autocorrelation {
                total += re * re + im * im;
            }
            0.25 * s * total
        })
        .collect();
    Ok(fringe)
}

const POSITIONS: u64 = 1;
const PHASES: u64 = 2;
const DETECTOR: u64 = 3;

/// Synthesizes `n_repeats` frames of `n_alines` columns on the sweep's
/// wavelength-linear grid.
///
/// `phantoms` holds either one phantom (shared by every column) or one per
/// column. Scatterer positions depend only on the seed and phantom index, so
/// repeats image the same scene; with speckle enabled each repeat redraws
/// scatterer phases, and detector noise is always drawn per repeat.
pub fn synthesize_volume(
    phantoms: &[Phantom],
    cfg: &SweepConfig,
    n_alines: usize,
    n_repeats: usize,
    noise: &NoiseConfig,
    seed: u64,
) -> Result<Vec<FringeFrame>> {
    synthesize_volume_on(GridTag::LambdaLinear, phantoms, cfg, n_alines, n_repeats, noise, seed)
}

/// As [`synthesize_volume`], with an explicit choice of sampling grid. A
/// k-linear volume spans the same wavenumber range uniformly.
pub fn synthesize_volume_on(
    grid: GridTag,
    phantoms: &[Phantom],
    cfg: &SweepConfig,
    n_alines: usize,
    n_repeats: usize,
    noise: &NoiseConfig,
    seed: u64,
) -> Result<Vec<FringeFrame>> {
    cfg.validate()?;
    ensure!(n_alines >= 1, Config, "n_alines must be at least 1");
    ensure!(n_repeats >= 1, Config, "n_repeats must be at least 1");
    ensure!(
        phantoms.len() == 1 || phantoms.len() == n_alines,
        Config,
        "expected 1 or {n_alines} phantoms, got {}",
        phantoms.len()
    );
    ensure!(
        noise.detector_sigma >= 0.0 && noise.detector_sigma.is_finite(),
        Config,
        "detector_sigma must be a non-negative number"
    );
    let max_depth = cfg.max_depth();
    for p in phantoms {
        p.validate(max_depth)?;
    }

    let kgrid = match grid {
        GridTag::LambdaLinear => to_wavenumbers(&sweep_wavelength_grid(cfg)?)?,
        GridTag::KLinear => {
            let (k_min, k_max) = cfg.k_range();
            uniform_k_grid(k_min, k_max, cfg.n_samples)?
        }
    };
    let spectrum = source_spectrum(&kgrid, cfg);
    let detector = if noise.detector_sigma > 0.0 {
        Some(Normal::new(0.0, noise.detector_sigma).map_err(|e| Error::Config(e.to_string()))?)
    } else {
        None
    };

    let n = cfg.n_samples;
    let mut frames = vec![Array2::<f64>::zeros((n, n_alines)); n_repeats];
    for col in 0..n_alines {
        let index = if phantoms.len() == 1 { 0 } else { col };
        let phantom = &phantoms[index];
        let mut fixed: Option<Vec<f64>> = None;
        for (rep, frame) in frames.iter_mut().enumerate() {
            let mut positions = stream(seed, &[POSITIONS, index as u64]);
            let column = if noise.speckle {
                let mut phases = stream(seed, &[PHASES, col as u64, rep as u64]);
                let realized = phantom.realize(&mut positions, Some(&mut phases));
                synthesize_fringe(&realized, &kgrid, &spectrum, false)?
            } else {
                match &fixed {
                    Some(c) => c.clone(),
                    None => {
                        let realized =
                            phantom.realize(&mut positions, None::<&mut rand_chacha::ChaCha8Rng>);
                        let c = synthesize_fringe(&realized, &kgrid, &spectrum, false)?;
                        fixed = Some(c.clone());
                        c
                    }
                }
            };
            let mut target = frame.column_mut(col);
            match &detector {
                Some(dist) => {
                    let mut rng = stream(seed, &[DETECTOR, col as u64, rep as u64]);
                    for (t, v) in target.iter_mut().zip(column) {
                        *t = v + dist.sample(&mut rng);
                    }
                }
                None => {
                    for (t, v) in target.iter_mut().zip(column) {
                        *t = v;
                    }
                }
            }
        }
    }
    frames.into_iter().map(|s| FringeFrame::new(s, grid)).collect()
}

/// Fringe of a phantom with no sample reflectors: the source background
/// S(k)·R²/4 on the sweep's wavelength-linear grid.
pub fn background_column(cfg: &SweepConfig, grid: GridTag, reference_reflectivity: f64) -> Result<Vec<f64>> {
    let kgrid = match grid {
        GridTag::LambdaLinear => to_wavenumbers(&sweep_wavelength_grid(cfg)?)?,
        GridTag::KLinear => {
            let (k_min, k_max) = cfg.k_range();
            uniform_k_grid(k_min, k_max, cfg.n_samples)?
        }
    };
    let spectrum = source_spectrum(&kgrid, cfg);
    let empty = Phantom {
        reference_reflectivity,
        ..Phantom::default()
    };
    synthesize_fringe(&empty, &kgrid, &spectrum, false)
}
