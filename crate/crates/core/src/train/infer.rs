use std::time::Instant;

use ndarray::Array2;

use super::patches::{reconstruct_image, WsChannel};
use crate::error::{ensure, Result};
use crate::forward::{FringeFrame, WavenumberGrid};
use crate::spectral::{classic_reconstruct, lambda_space_image, Interpolation};
use crate::tensor::Real;
use crate::unet::{WaveUnet, N_PATCHES};

/// Network reconstructions of a volume with per-frame wall-clock times for
/// the network path and for classic reconstruction of the same frames.
#[derive(Debug, Clone)]
pub struct InferenceReport {
    pub images: Vec<Array2<f64>>,
    pub network_seconds: Vec<f64>,
    pub classic_seconds: Vec<f64>,
}

impl InferenceReport {
    pub fn network_total(&self) -> f64 {
        self.network_seconds.iter().sum()
    }

    pub fn classic_total(&self) -> f64 {
        self.classic_seconds.iter().sum()
    }

    /// Classic time over network time.
    pub fn ratio(&self) -> f64 {
        self.classic_total() / self.network_total()
    }
}

/// λ-space preprocessing, wavenumber channel, banding and an eval-mode
/// forward pass for every frame, timed against classic reconstruction.
pub fn infer_volume<T: Real>(
    model: &WaveUnet<T>,
    frames: &[FringeFrame],
    background: &[f64],
    source_k: &WavenumberGrid,
    interpolation: Interpolation,
    ws: &WsChannel,
) -> Result<InferenceReport> {
    let cfg = model.config();
    for (i, f) in frames.iter().enumerate() {
        ensure!(
            f.n_rows() == 2 * N_PATCHES * cfg.patch_height && f.n_cols() == cfg.patch_width,
            Config,
            "frame {i} is {}×{}, the model expects {}×{} fringes",
            f.n_rows(),
            f.n_cols(),
            2 * N_PATCHES * cfg.patch_height,
            cfg.patch_width
        );
    }
    let mut report = InferenceReport {
        images: Vec::with_capacity(frames.len()),
        network_seconds: Vec::with_capacity(frames.len()),
        classic_seconds: Vec::with_capacity(frames.len()),
    };
    for f in frames {
        let start = Instant::now();
        let image = lambda_space_image(f, background)?;
        let out = reconstruct_image(model, &image.intensity, ws)?;
        report.network_seconds.push(start.elapsed().as_secs_f64());
        report.images.push(out);

        let start = Instant::now();
        classic_reconstruct(f, background, source_k, interpolation)?;
        report.classic_seconds.push(start.elapsed().as_secs_f64());
    }
    Ok(report)
}

/// Classic-versus-network timing summary.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub frames: usize,
    pub classic_total_s: f64,
    pub network_total_s: f64,
    pub ratio: f64,
}

pub const BENCH_HEADER: &str = "frames,classic_total_s,network_total_s,ratio";

impl From<&InferenceReport> for BenchReport {
    fn from(r: &InferenceReport) -> Self {
        Self {
            frames: r.images.len(),
            classic_total_s: r.classic_total(),
            network_total_s: r.network_total(),
            ratio: r.ratio(),
        }
    }
}

impl BenchReport {
    pub fn csv(&self) -> String {
        format!(
            "{BENCH_HEADER}\n{},{},{},{}\n",
            self.frames, self.classic_total_s, self.network_total_s, self.ratio
        )
    }
}
