use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ssoct::forward::{GridTag, NoiseConfig, SweepConfig};
use ssoct::metrics::DisplayWindow;
use ssoct::spectral::Interpolation;
use ssoct::train::{DatasetSpec, PhantomFamily, SplitFractions, TrainConfig};
use ssoct::unet::{ModelConfig, WsMode, N_PATCHES};
use ssoct::{Error, Result};

/// The whole run in one file. Every section is optional and unknown keys
/// are rejected at any depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Root of every random stream: scenes, noise, initialization, shuffling.
    pub seed: u64,
    /// Used when `--out` is not given.
    pub output_root: Option<PathBuf>,
    pub sweep: SweepConfig,
    pub phantom: PhantomFamily,
    pub noise: NoiseConfig,
    pub simulate: SimulateSection,
    /// When present, `simulate` also writes a paired training dataset.
    pub dataset: Option<DatasetSection>,
    pub reconstruct: ReconstructSection,
    pub model: ModelConfig,
    pub wavenumber_channel: WsMode,
    pub train: TrainSection,
    pub metrics: DisplayWindow,
    pub bench: BenchSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_root: None,
            sweep: SweepConfig::default(),
            phantom: PhantomFamily::default(),
            noise: DatasetSpec::default().noise,
            simulate: SimulateSection::default(),
            dataset: None,
            reconstruct: ReconstructSection::default(),
            model: ModelConfig::default(),
            wavenumber_channel: WsMode::default(),
            train: TrainSection::default(),
            metrics: DisplayWindow::default(),
            bench: BenchSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub n_volumes: usize,
    pub frames_per_volume: usize,
    pub n_alines: usize,
    pub grid: GridTag,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            n_volumes: 1,
            frames_per_volume: 4,
            n_alines: 128,
            grid: GridTag::LambdaLinear,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    pub n_volumes: usize,
    pub frames_per_volume: usize,
    pub n_alines: usize,
    pub averaged_frames: usize,
    pub split: SplitFractions,
}

impl Default for DatasetSection {
    fn default() -> Self {
        let d = DatasetSpec::default();
        Self {
            n_volumes: d.n_volumes,
            frames_per_volume: d.frames_per_volume,
            n_alines: d.n_alines,
            averaged_frames: d.averaged_frames,
            split: d.split,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconstructSection {
    pub interpolation: Interpolation,
    /// PGM previews show this many dB below each volume's maximum.
    pub range_db: f64,
}

impl Default for ReconstructSection {
    fn default() -> Self {
        Self {
            interpolation: Interpolation::CubicSpline,
            range_db: 60.0,
        }
    }
}

/// Training options. The shuffling seed is the top-level `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub checkpoint_every: usize,
    pub eval_every: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            checkpoint_every: t.checkpoint_every,
            eval_every: t.eval_every,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSection {
    pub frames: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self { frames: 100 }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config(format!("at `{path}`: {}", e.into_inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.sweep.validate()?;
        self.phantom.validate()?;
        self.model.validate()?;
        self.train_config().validate()?;
        if let Some(d) = &self.dataset {
            self.dataset_spec(d).validate()?;
        }
        let s = &self.simulate;
        if s.n_volumes == 0 || s.frames_per_volume == 0 || s.n_alines == 0 {
            return Err(Error::Config("simulate counts must be at least 1".into()));
        }
        if !(self.reconstruct.range_db > 0.0) {
            return Err(Error::Config("reconstruct.range_db must be positive".into()));
        }
        if self.bench.frames == 0 {
            return Err(Error::Config("bench.frames must be at least 1".into()));
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            learning_rate: self.train.learning_rate,
            seed: self.seed,
            checkpoint_every: self.train.checkpoint_every,
            eval_every: self.train.eval_every,
        }
    }

    pub fn dataset_spec(&self, d: &DatasetSection) -> DatasetSpec {
        DatasetSpec {
            n_volumes: d.n_volumes,
            frames_per_volume: d.frames_per_volume,
            n_alines: d.n_alines,
            sweep: self.sweep.clone(),
            phantom: self.phantom.clone(),
            noise: self.noise,
            averaged_frames: d.averaged_frames,
            interpolation: self.reconstruct.interpolation,
            split: d.split,
            seed: self.seed,
        }
    }

    /// Fringe geometry the configured model consumes: rows, A-lines.
    pub fn model_fringe_shape(&self) -> (usize, usize) {
        (2 * N_PATCHES * self.model.patch_height, self.model.patch_width)
    }
}
