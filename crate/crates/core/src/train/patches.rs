use ndarray::{Array2, Array3, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::forward::SweepConfig;
use crate::tensor::{Real, Tensor};
use crate::unet::{
    interleave_wavenumber_channel, merge_patches, split_patches, standardize, ws_grid, Standardization, WaveUnet,
    WsMode, N_PATCHES, STANDARDIZE_EPS,
};

/// How the wavenumber channel is built for an image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WsChannel {
    pub k_lo: f64,
    pub k_hi: f64,
    #[serde(default)]
    pub mode: WsMode,
}

impl WsChannel {
    /// The sweep's full wavenumber range.
    pub fn for_sweep(cfg: &SweepConfig, mode: WsMode) -> Self {
        let (k_lo, k_hi) = cfg.k_range();
        Self { k_lo, k_hi, mode }
    }

    /// Channel-first `2 × H × W` network input for a dB image.
    pub fn interleave(&self, image: &Array2<f64>) -> Result<Array3<f64>> {
        let ws = ws_grid(self.k_lo, self.k_hi, image.nrows(), self.mode)?;
        interleave_wavenumber_channel(image, &ws, self.k_lo, self.k_hi)
    }
}

/// One standardized training example with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchPair {
    /// `1 × 2 × h × w`.
    pub input: Tensor<f32>,
    /// `1 × 1 × h × w`.
    pub target: Tensor<f32>,
    pub volume: usize,
    pub frame: usize,
    pub patch: usize,
}

fn to_tensor<T: Real>(a: &Array3<f64>) -> Tensor<T> {
    let (c, h, w) = a.dim();
    Tensor::new(vec![1, c, h, w], a.iter().map(|&v| T::of(v)).collect()).expect("matching size")
}

/// Interleaves, splits into bands and standardizes each band's image
/// channel. Returns the bands and their statistics.
pub fn input_patches(image: &Array2<f64>, ws: &WsChannel) -> Result<(Vec<Array3<f64>>, Vec<Standardization>)> {
    let mut patches = split_patches(&ws.interleave(image)?)?;
    let stats = patches.iter_mut().map(|p| standardize(p, STANDARDIZE_EPS)).collect();
    Ok((patches, stats))
}

/// Training examples for one frame. Targets are standardized with the
/// statistics of the matching input band, so the network learns a mapping
/// that [`reconstruct_image`] can undo without knowing the target.
pub fn training_patches(
    input: &Array2<f64>,
    target: &Array2<f64>,
    ws: &WsChannel,
    volume: usize,
    frame: usize,
) -> Result<Vec<PatchPair>> {
    ensure!(
        input.dim() == target.dim(),
        Dimension,
        "input {:?} and target {:?} differ in shape",
        input.dim(),
        target.dim()
    );
    let (inputs, stats) = input_patches(input, ws)?;
    let band = input.nrows() / N_PATCHES;
    Ok(inputs
        .iter()
        .zip(&stats)
        .enumerate()
        .map(|(i, (p, st))| {
            let t = target.slice(ndarray::s![i * band..(i + 1) * band, ..]).mapv(|v| st.apply(v));
            PatchPair {
                input: to_tensor(p),
                target: to_tensor(&t.insert_axis(Axis(0))),
                volume,
                frame,
                patch: i,
            }
        })
        .collect())
}

/// Runs the network on a dB image and returns the reconstruction in dB.
pub fn reconstruct_image<T: Real>(model: &WaveUnet<T>, image: &Array2<f64>, ws: &WsChannel) -> Result<Array2<f64>> {
    let cfg = model.config();
    ensure!(
        image.nrows() == cfg.patch_height * N_PATCHES && image.ncols() == cfg.patch_width,
        Config,
        "{}×{} image does not match a model trained on {}×{} patches",
        image.nrows(),
        image.ncols(),
        cfg.patch_height,
        cfg.patch_width
    );
    let (patches, stats) = input_patches(image, ws)?;
    let batch = Tensor::stack_batch(&patches.iter().map(to_tensor::<T>).collect::<Vec<_>>())?;
    let out = model.predict(&batch)?;
    let (h, w) = (cfg.patch_height, cfg.patch_width);
    let bands: Vec<Array3<f64>> = stats
        .iter()
        .enumerate()
        .map(|(i, st)| {
            let data = &out.data()[i * h * w..(i + 1) * h * w];
            Array3::from_shape_fn((1, h, w), |(_, y, x)| st.invert(data[y * w + x].as_f64()))
        })
        .collect();
    Ok(merge_patches(&bands)?.index_axis_move(Axis(0), 0))
}
