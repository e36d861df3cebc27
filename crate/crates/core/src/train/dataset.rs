use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::forward::{
    background_column, sweep_wavelength_grid, synthesize_volume, to_wavenumbers, GridTag, Layer, NoiseConfig,
    Phantom, Reflector, SweepConfig,
};
use crate::io::{read_frg1, read_pair, write_file, write_frg1, write_pair, Frg1};
use crate::rng::{derive_seed, stream};
use crate::spectral::{average_bscans, classic_reconstruct, lambda_space_image, Interpolation};

/// Random layered scenes. Depth-like quantities are fractions of the
/// sweep's maximum imaging depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomFamily {
    pub min_layers: usize,
    pub max_layers: usize,
    /// Band of depths that layers may occupy.
    pub depth_range: [f64; 2],
    pub thickness_range: [f64; 2],
    /// Per-scatterer intensity reflectivity, drawn log-uniformly per layer.
    pub layer_reflectivity: [f64; 2],
    /// Scatterers per meter of layer thickness.
    pub scatterer_density: f64,
    /// Peak lateral undulation of a layer boundary.
    pub max_undulation: f64,
    pub max_point_reflectors: usize,
    pub point_reflectivity: [f64; 2],
    pub reference_reflectivity: f64,
}

impl Default for PhantomFamily {
    fn default() -> Self {
        Self {
            min_layers: 2,
            max_layers: 4,
            depth_range: [0.08, 0.9],
            thickness_range: [0.04, 0.18],
            layer_reflectivity: [1e-5, 1e-3],
            scatterer_density: 2e5,
            max_undulation: 0.06,
            max_point_reflectors: 2,
            point_reflectivity: [1e-3, 1e-2],
            reference_reflectivity: 1.0,
        }
    }
}

fn check_range(name: &str, r: [f64; 2], lo: f64, hi: f64) -> Result<()> {
    ensure!(
        r[0] <= r[1] && r[0] >= lo && r[1] <= hi && r[0].is_finite() && r[1].is_finite(),
        Config,
        "{name} [{}, {}] must be an ordered range within [{lo}, {hi}]",
        r[0],
        r[1]
    );
    Ok(())
}

fn draw<R: Rng>(rng: &mut R, r: [f64; 2]) -> f64 {
    if r[1] > r[0] {
        rng.random_range(r[0]..r[1])
    } else {
        r[0]
    }
}

fn draw_log<R: Rng>(rng: &mut R, r: [f64; 2]) -> f64 {
    draw(rng, [r[0].ln(), r[1].ln()]).exp()
}

impl PhantomFamily {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.min_layers <= self.max_layers,
            Config,
            "min_layers exceeds max_layers"
        );
        check_range("depth_range", self.depth_range, 0.0, 1.0)?;
        check_range("thickness_range", self.thickness_range, 0.0, 1.0)?;
        ensure!(self.thickness_range[0] > 0.0, Config, "layers need a positive thickness");
        check_range("layer_reflectivity", self.layer_reflectivity, f64::MIN_POSITIVE, 1.0)?;
        check_range("point_reflectivity", self.point_reflectivity, f64::MIN_POSITIVE, 1.0)?;
        ensure!(
            self.scatterer_density >= 0.0 && self.scatterer_density.is_finite(),
            Config,
            "scatterer_density must be non-negative"
        );
        ensure!(
            (0.0..0.5).contains(&self.max_undulation),
            Config,
            "max_undulation must lie in [0, 0.5)"
        );
        ensure!(
            (0.0..=1.0).contains(&self.reference_reflectivity),
            Config,
            "reference_reflectivity outside [0, 1]"
        );
        Ok(())
    }

    /// One phantom per A-line of a frame.
    pub fn sample<R: Rng>(&self, max_depth: f64, n_alines: usize, rng: &mut R) -> Vec<Phantom> {
        let lo = self.depth_range[0] * max_depth;
        let hi = self.depth_range[1] * max_depth;
        let clamp = |d: f64| d.clamp(lo, hi);
        let wave = |rng: &mut R| {
            let amp = rng.random_range(0.0..=self.max_undulation) * max_depth;
            let cycles = rng.random_range(0.25..1.5);
            let phase = rng.random_range(0.0..2.0 * PI);
            move |col: usize| amp * (2.0 * PI * cycles * col as f64 / n_alines as f64 + phase).sin()
        };

        let n_layers = rng.random_range(self.min_layers..=self.max_layers);
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let thickness = draw(rng, self.thickness_range) * max_depth;
            let top = draw(rng, [lo, (hi - thickness).max(lo)]);
            let s = draw_log(rng, self.layer_reflectivity);
            layers.push((top, thickness, s, wave(rng)));
        }
        let n_points = rng.random_range(0..=self.max_point_reflectors);
        let mut points = Vec::with_capacity(n_points);
        for _ in 0..n_points {
            let depth = draw(rng, [lo, hi]);
            let s = draw_log(rng, self.point_reflectivity);
            let a = rng.random_range(0..n_alines);
            let b = rng.random_range(0..n_alines);
            points.push((depth, s, a.min(b), a.max(b) + 1, wave(rng)));
        }

        (0..n_alines)
            .map(|col| Phantom {
                layers: layers
                    .iter()
                    .filter_map(|(top, thickness, s, w)| {
                        let t = clamp(top + w(col));
                        let b = clamp(t + thickness);
                        (b > t).then_some(Layer {
                            top: t,
                            bottom: b,
                            reflectivity: *s,
                            density: self.scatterer_density,
                        })
                    })
                    .collect(),
                reflectors: points
                    .iter()
                    .filter(|(_, _, a, b, _)| (*a..*b).contains(&col))
                    .map(|(d, s, _, _, w)| Reflector {
                        depth: clamp(d + w(col)),
                        reflectivity: *s,
                        phase: 0.0,
                    })
                    .collect(),
                reference_reflectivity: self.reference_reflectivity,
                reference_depth: 0.0,
            })
            .collect()
    }
}

/// Train / validation / test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.7,
            val: 0.2,
            test: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles `0..n` with `seed` and cuts it into three disjoint sets.
/// Validation and test sizes are rounded down; the remainder goes to
/// training.
pub fn split_dataset(n: usize, fractions: &SplitFractions, seed: u64) -> Result<Splits> {
    ensure!(n > 0, Usage, "cannot split an empty dataset");
    let f = fractions;
    ensure!(
        f.train >= 0.0 && f.val >= 0.0 && f.test >= 0.0,
        Config,
        "split fractions must be non-negative"
    );
    ensure!(
        (f.train + f.val + f.test - 1.0).abs() <= 1e-9,
        Config,
        "split fractions sum to {}, not 1",
        f.train + f.val + f.test
    );
    // the small bias keeps products like 3000·0.2 from landing just below
    // an integer
    let count = |frac: f64| ((n as f64 * frac) + 1e-9).floor() as usize;
    let (n_val, n_test) = (count(f.val), count(f.test));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream(seed, &[0x5b11]));
    let test = idx[..n_test].to_vec();
    let val = idx[n_test..n_test + n_val].to_vec();
    let train = idx[n_test + n_val..].to_vec();
    Ok(Splits { train, val, test })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// Everything needed to regenerate a paired dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSpec {
    pub n_volumes: usize,
    pub frames_per_volume: usize,
    pub n_alines: usize,
    pub sweep: SweepConfig,
    pub phantom: PhantomFamily,
    pub noise: NoiseConfig,
    /// Independent realizations averaged into the target.
    pub averaged_frames: usize,
    pub interpolation: Interpolation,
    pub split: SplitFractions,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            n_volumes: 1,
            frames_per_volume: 10,
            n_alines: 128,
            sweep: SweepConfig::default(),
            phantom: PhantomFamily::default(),
            noise: NoiseConfig {
                speckle: true,
                detector_sigma: 1e-3,
            },
            averaged_frames: 7,
            interpolation: Interpolation::CubicSpline,
            split: SplitFractions::default(),
            seed: 0,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.n_volumes >= 1 && self.frames_per_volume >= 1 && self.n_alines >= 1,
            Config,
            "volume, frame and A-line counts must be at least 1"
        );
        ensure!(self.averaged_frames >= 1, Config, "averaged_frames must be at least 1");
        self.sweep.validate()?;
        self.phantom.validate()
    }

    pub fn n_frames(&self) -> usize {
        self.n_volumes * self.frames_per_volume
    }

    /// Image height after conjugate truncation.
    pub fn image_rows(&self) -> usize {
        self.sweep.n_samples / 2
    }
}

/// Paired dB images of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FramePair {
    /// λ-space image of a single realization.
    pub input: Array2<f64>,
    /// Mean of `averaged_frames` classic reconstructions of other
    /// realizations.
    pub target: Array2<f64>,
    /// Classic reconstruction of the input's own realization.
    pub classic: Array2<f64>,
}

/// Simulates one frame of the dataset. Depends only on the spec and the
/// frame's position.
pub fn generate_frame(spec: &DatasetSpec, volume: usize, frame: usize) -> Result<FramePair> {
    let cfg = &spec.sweep;
    let path = [volume as u64, frame as u64];
    let mut scene = stream(spec.seed, &[0x5ce7e, path[0], path[1]]);
    let phantoms = spec.phantom.sample(cfg.max_depth(), spec.n_alines, &mut scene);
    let frames = synthesize_volume(
        &phantoms,
        cfg,
        spec.n_alines,
        spec.averaged_frames + 1,
        &spec.noise,
        derive_seed(spec.seed, &[0xf7a3e, path[0], path[1]]),
    )?;
    let background = background_column(cfg, GridTag::LambdaLinear, spec.phantom.reference_reflectivity)?;
    let source_k = to_wavenumbers(&sweep_wavelength_grid(cfg)?)?;
    let input = lambda_space_image(&frames[0], &background)?.intensity;
    let classic = classic_reconstruct(&frames[0], &background, &source_k, spec.interpolation)?.intensity;
    let repeats = frames[1..]
        .iter()
        .map(|f| classic_reconstruct(f, &background, &source_k, spec.interpolation))
        .collect::<Result<Vec<_>>>()?;
    let target = average_bscans(&repeats, spec.averaged_frames)?.intensity;
    Ok(FramePair { input, target, classic })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub volume: usize,
    pub frame: usize,
    pub split: Split,
}

impl FrameEntry {
    pub fn id(&self) -> String {
        format!("vol{:03}/{:04}", self.volume, self.frame)
    }

    pub fn pair_path(&self, root: &Path) -> PathBuf {
        root.join(self.split.as_str())
            .join(format!("vol{:03}", self.volume))
            .join(format!("{:04}.pair", self.frame))
    }

    pub fn classic_path(&self, root: &Path) -> PathBuf {
        self.pair_path(root).with_extension("classic")
    }
}

/// Contents of `dataset.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetIndex {
    pub spec: DatasetSpec,
    pub frames: Vec<FrameEntry>,
}

pub const INDEX_FILE: &str = "dataset.json";

impl DatasetIndex {
    pub fn load(root: &Path) -> Result<Self> {
        let path = root.join(INDEX_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn entries(&self, split: Split) -> impl Iterator<Item = &FrameEntry> {
        self.frames.iter().filter(move |e| e.split == split)
    }
}

/// Writes every frame as `<root>/<split>/vol<v>/<frame>.pair` with its
/// classic reconstruction alongside, plus `dataset.json`.
pub fn generate_dataset(spec: &DatasetSpec, root: &Path) -> Result<DatasetIndex> {
    spec.validate()?;
    let splits = split_dataset(spec.n_frames(), &spec.split, spec.seed)?;
    let mut split_of = vec![Split::Train; spec.n_frames()];
    for &i in &splits.val {
        split_of[i] = Split::Val;
    }
    for &i in &splits.test {
        split_of[i] = Split::Test;
    }
    let mut frames = Vec::with_capacity(spec.n_frames());
    for volume in 0..spec.n_volumes {
        for frame in 0..spec.frames_per_volume {
            let entry = FrameEntry {
                volume,
                frame,
                split: split_of[volume * spec.frames_per_volume + frame],
            };
            let pair = generate_frame(spec, volume, frame)?;
            write_pair(
                &entry.pair_path(root),
                &Frg1::image(pair.input),
                &Frg1::image(pair.target),
            )?;
            write_frg1(&entry.classic_path(root), &Frg1::image(pair.classic))?;
            frames.push(entry);
        }
    }
    let index = DatasetIndex {
        spec: spec.clone(),
        frames,
    };
    let json = serde_json::to_string_pretty(&index).expect("serializable");
    write_file(&root.join(INDEX_FILE), json.as_bytes())?;
    Ok(index)
}

/// Reads one stored frame back.
pub fn load_frame(root: &Path, entry: &FrameEntry) -> Result<FramePair> {
    let (input, target) = read_pair(&entry.pair_path(root))?;
    let classic = read_frg1(&entry.classic_path(root))?;
    Ok(FramePair {
        input: input.data,
        target: target.data,
        classic: classic.data,
    })
}
