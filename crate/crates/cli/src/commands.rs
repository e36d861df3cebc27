use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use ssoct::forward::{
    background_column, sweep_wavelength_grid, synthesize_volume, synthesize_volume_on, to_wavenumbers,
    uniform_k_grid, FringeFrame, GridTag, WavenumberGrid,
};
use ssoct::io::{read_frg1, write_file, write_frg1, write_pgm, Frg1};
use ssoct::metrics::{display_map, evaluate_volume, mean_by_variant, metrics_csv, EvalSample};
use ssoct::rng::{derive_seed, stream};
use ssoct::spectral::{classic_reconstruct, lambda_space_image};
use ssoct::tensor::{AdamConfig, AdamState};
use ssoct::train::{
    generate_dataset, history_csv, infer_volume, load_checkpoint_for, load_frame, reconstruct_image, save_checkpoint,
    train, training_patches, BenchReport, Checkpoint, DatasetIndex, InferenceReport, PatchPair, Split, WsChannel,
    INDEX_FILE,
};
use ssoct::unet::{ModelConfig, WaveUnet};
use ssoct::{Error, Result};

use crate::config::RunConfig;
use crate::manifest::Manifest;

const SIM_SCENE: u64 = 0x51a1;
const SIM_NOISE: u64 = 0x51a2;
const BENCH_SCENE: u64 = 0xbe1c;
const BENCH_NOISE: u64 = 0xbe1d;

pub const BACKGROUND_FILE: &str = "background.frg1";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Lambda,
    Classic,
}

impl Mode {
    fn as_str(self) -> &'static str {
        match self {
            Mode::Lambda => "lambda",
            Mode::Classic => "classic",
        }
    }
}

/// Configuration plus verbosity, shared by every subcommand.
pub struct Context {
    pub cfg: RunConfig,
    pub quiet: bool,
}

impl Context {
    fn log(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn background(&self, grid: GridTag) -> Result<Vec<f64>> {
        background_column(&self.cfg.sweep, grid, self.cfg.phantom.reference_reflectivity)
    }

    fn source_k(&self, grid: GridTag) -> Result<WavenumberGrid> {
        match grid {
            GridTag::LambdaLinear => to_wavenumbers(&sweep_wavelength_grid(&self.cfg.sweep)?),
            GridTag::KLinear => {
                let (lo, hi) = self.cfg.sweep.k_range();
                uniform_k_grid(lo, hi, self.cfg.sweep.n_samples)
            }
        }
    }

    fn ws(&self) -> WsChannel {
        WsChannel::for_sweep(&self.cfg.sweep, self.cfg.wavenumber_channel)
    }

    fn model(&self, checkpoint: Option<&Path>) -> Result<(WaveUnet<f32>, Option<Checkpoint>)> {
        match checkpoint {
            Some(path) => {
                let ckpt = load_checkpoint_for(path, &self.cfg.model)?;
                Ok((ckpt.model.clone(), Some(ckpt)))
            }
            None => Ok((WaveUnet::new(self.cfg.model.clone(), self.cfg.seed)?, None)),
        }
    }
}

fn column_frg1(grid: GridTag, column: &[f64]) -> Frg1 {
    Frg1 {
        grid,
        data: Array2::from_shape_vec((column.len(), 1), column.to_vec()).expect("one column"),
    }
}

/// Fringe volumes, one scene per frame, plus the background column and a
/// manifest. With a `dataset` section, a paired dataset goes to `dataset/`.
pub fn simulate(ctx: &Context, out: &Path) -> Result<()> {
    let cfg = &ctx.cfg;
    let sim = &cfg.simulate;
    let mut manifest = Manifest::new("simulate", cfg);

    let bg_path = out.join(BACKGROUND_FILE);
    write_frg1(&bg_path, &column_frg1(sim.grid, &ctx.background(sim.grid)?))?;
    manifest.add(out, &bg_path)?;

    let max_depth = cfg.sweep.max_depth();
    for v in 0..sim.n_volumes {
        for f in 0..sim.frames_per_volume {
            let path = [v as u64, f as u64];
            let mut scene = stream(cfg.seed, &[SIM_SCENE, path[0], path[1]]);
            let phantoms = cfg.phantom.sample(max_depth, sim.n_alines, &mut scene);
            let frames = synthesize_volume_on(
                sim.grid,
                &phantoms,
                &cfg.sweep,
                sim.n_alines,
                1,
                &cfg.noise,
                derive_seed(cfg.seed, &[SIM_NOISE, path[0], path[1]]),
            )?;
            let file = out.join(format!("vol{v:03}")).join(format!("frame{f:04}.frg1"));
            write_frg1(&file, &Frg1::from(&frames[0]))?;
            manifest.add(out, &file)?;
        }
        ctx.log(format!("volume {v}: {} frames", sim.frames_per_volume));
    }

    if let Some(d) = &cfg.dataset {
        let spec = cfg.dataset_spec(d);
        let root = out.join("dataset");
        ctx.log(format!("dataset: {} frames", spec.n_frames()));
        let index = generate_dataset(&spec, &root)?;
        for e in &index.frames {
            manifest.add(out, &e.pair_path(&root))?;
            manifest.add(out, &e.classic_path(&root))?;
        }
        manifest.add(out, &root.join(INDEX_FILE))?;
    }
    manifest.write(&out.join(MANIFEST_FILE))
}

fn is_derived(path: &Path) -> bool {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
    name == BACKGROUND_FILE || [".lambda.frg1", ".classic.frg1", ".network.frg1"].iter().any(|s| name.ends_with(s))
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = fs::read_dir(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for e in entries {
        let p = e
            .map_err(|source| Error::Io {
                path: dir.to_path_buf(),
                source,
            })?
            .path();
        if p.is_dir() {
            walk(&p, out)?;
        } else if p.extension().is_some_and(|x| x == "frg1") && !is_derived(&p) {
            out.push(p);
        }
    }
    Ok(())
}

/// Raw fringe frames under `input`, grouped by the directory holding them
/// (one volume per directory), in path order.
fn input_volumes(input: &Path) -> Result<BTreeMap<PathBuf, Vec<PathBuf>>> {
    let mut files = Vec::new();
    walk(input, &mut files)?;
    if files.is_empty() {
        return Err(Error::Usage(format!("no input frames under {}", input.display())));
    }
    let mut volumes: BTreeMap<PathBuf, Vec<PathBuf>> = BTreeMap::new();
    for f in files {
        let rel = f.strip_prefix(input).expect("walked from input").to_path_buf();
        volumes.entry(rel.parent().map(Path::to_path_buf).unwrap_or_default()).or_default().push(rel);
    }
    for v in volumes.values_mut() {
        v.sort();
    }
    Ok(volumes)
}

fn read_frames(input: &Path, rel: &[PathBuf]) -> Result<Vec<FringeFrame>> {
    rel.iter().map(|r| read_frg1(&input.join(r))?.into_frame()).collect()
}

/// The background stored with the volume, else at the input root, else
/// one computed from the configured sweep.
fn background_for(ctx: &Context, input: &Path, volume_dir: &Path, grid: GridTag, rows: usize) -> Result<Vec<f64>> {
    let stored = [input.join(volume_dir).join(BACKGROUND_FILE), input.join(BACKGROUND_FILE)]
        .into_iter()
        .find(|p| p.exists());
    let bg = match stored {
        Some(path) => {
            let b = read_frg1(&path)?;
            if b.grid != grid || b.data.ncols() != 1 {
                return Err(Error::Dimension(format!(
                    "{} is not a single {grid:?} column",
                    path.display()
                )));
            }
            b.data.column(0).to_vec()
        }
        None => ctx.background(grid)?,
    };
    if bg.len() != rows {
        return Err(Error::Dimension(format!(
            "background has {} samples, frames have {rows}",
            bg.len()
        )));
    }
    Ok(bg)
}

fn with_suffix(rel: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = rel.file_stem().and_then(|s| s.to_str()).unwrap_or("frame");
    rel.with_file_name(format!("{stem}.{suffix}.{ext}"))
}

/// Writes dB images and PGM previews sharing one window per volume.
fn write_images(ctx: &Context, out: &Path, rel: &[PathBuf], images: &[Array2<f64>], suffix: &str) -> Result<()> {
    let top = images.iter().flat_map(|m| m.iter()).cloned().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::Numeric("images contain no finite maximum".into()));
    }
    for (r, img) in rel.iter().zip(images) {
        write_frg1(&out.join(with_suffix(r, suffix, "frg1")), &Frg1::image(img.clone()))?;
        let preview = display_map(img, top - ctx.cfg.reconstruct.range_db, top)?;
        write_pgm(&out.join(with_suffix(r, suffix, "pgm")), &preview)?;
    }
    Ok(())
}

pub fn reconstruct(ctx: &Context, input: &Path, mode: Mode, out: &Path) -> Result<()> {
    let mut count = 0;
    for (dir, rel) in input_volumes(input)? {
        let frames = read_frames(input, &rel)?;
        let grid = frames[0].grid;
        if let Some(i) = frames.iter().position(|f| f.grid != grid) {
            return Err(Error::Dimension(format!("{} is on a different grid", rel[i].display())));
        }
        let bg = background_for(ctx, input, &dir, grid, frames[0].n_rows())?;
        let source_k = ctx.source_k(grid)?;
        let images = frames
            .iter()
            .map(|f| {
                Ok(match mode {
                    Mode::Lambda => lambda_space_image(f, &bg)?,
                    Mode::Classic => classic_reconstruct(f, &bg, &source_k, ctx.cfg.reconstruct.interpolation)?,
                }
                .intensity)
            })
            .collect::<Result<Vec<_>>>()?;
        write_images(ctx, out, &rel, &images, mode.as_str())?;
        count += rel.len();
    }
    ctx.log(format!("{count} frames reconstructed ({})", mode.as_str()));
    Ok(())
}

fn check_geometry(model: &ModelConfig, rows: usize, cols: usize) -> Result<()> {
    if rows != ssoct::unet::N_PATCHES * model.patch_height || cols != model.patch_width {
        return Err(Error::Config(format!(
            "dataset images are {rows}×{cols}, model patches are {}×{} in {} bands",
            model.patch_height,
            model.patch_width,
            ssoct::unet::N_PATCHES
        )));
    }
    Ok(())
}

fn split_patches(root: &Path, index: &DatasetIndex, split: Split, ws: &WsChannel) -> Result<Vec<PatchPair>> {
    let mut out = Vec::new();
    for e in index.entries(split) {
        let pair = load_frame(root, e)?;
        out.extend(training_patches(&pair.input, &pair.target, ws, e.volume, e.frame)?);
    }
    Ok(out)
}

pub fn train_cmd(ctx: &Context, input: &Path, checkpoint: Option<&Path>, out: &Path) -> Result<()> {
    let index = DatasetIndex::load(input)?;
    check_geometry(&ctx.cfg.model, index.spec.image_rows(), index.spec.n_alines)?;
    let ws = WsChannel::for_sweep(&index.spec.sweep, ctx.cfg.wavenumber_channel);
    let train_set = split_patches(input, &index, Split::Train, &ws)?;
    let val_set = split_patches(input, &index, Split::Val, &ws)?;
    if train_set.is_empty() {
        return Err(Error::Usage(format!("{} has no training frames", input.display())));
    }
    let (mut model, resumed) = ctx.model(checkpoint)?;
    let offset = resumed.as_ref().map_or(0, |c| c.epoch);
    let mut adam = resumed.map_or_else(|| AdamState::new(AdamConfig::default()), |c| c.adam);
    let tcfg = ctx.cfg.train_config();
    ctx.log(format!(
        "training {} parameters on {} patches ({} validation)",
        model.param_count(),
        train_set.len(),
        val_set.len()
    ));

    let outcome = train(&mut model, &mut adam, &train_set, &val_set, &tcfg, |ev| {
        let epoch = offset + ev.record.epoch;
        let val = ev.record.val_loss.map_or_else(|| "-".to_string(), |v| format!("{v:.6}"));
        ctx.log(format!("epoch {epoch}: train {:.6} val {val}", ev.record.train_loss));
        let snapshot = || Checkpoint {
            model: ev.model.clone(),
            adam: ev.adam.clone(),
            epoch,
            best_val_loss: ev.record.val_loss,
        };
        if ev.is_best {
            save_checkpoint(&out.join("best.wun"), &snapshot())?;
        }
        if tcfg.checkpoint_every > 0 && ev.record.epoch % tcfg.checkpoint_every == 0 {
            save_checkpoint(&out.join(format!("epoch{epoch:04}.wun")), &snapshot())?;
        }
        Ok(())
    })?;

    save_checkpoint(
        &out.join("final.wun"),
        &Checkpoint {
            model,
            adam,
            epoch: offset + tcfg.epochs,
            best_val_loss: outcome.best_val_loss,
        },
    )?;
    let mut history = outcome.history;
    for r in &mut history {
        r.epoch += offset;
    }
    write_file(&out.join("history.csv"), history_csv(&history).as_bytes())
}

pub fn infer(ctx: &Context, input: &Path, checkpoint: &Path, out: &Path) -> Result<()> {
    let (model, _) = ctx.model(Some(checkpoint))?;
    let ws = ctx.ws();
    let mut all = InferenceReport {
        images: Vec::new(),
        network_seconds: Vec::new(),
        classic_seconds: Vec::new(),
    };
    for (dir, rel) in input_volumes(input)? {
        let frames = read_frames(input, &rel)?;
        let grid = frames[0].grid;
        let bg = background_for(ctx, input, &dir, grid, frames[0].n_rows())?;
        let report = infer_volume(
            &model,
            &frames,
            &bg,
            &ctx.source_k(grid)?,
            ctx.cfg.reconstruct.interpolation,
            &ws,
        )?;
        write_images(ctx, out, &rel, &report.images, "network")?;
        all.images.extend(report.images);
        all.network_seconds.extend(report.network_seconds);
        all.classic_seconds.extend(report.classic_seconds);
    }
    let bench = BenchReport::from(&all);
    ctx.log(format!(
        "{} frames: network {:.3} s, classic {:.3} s",
        bench.frames, bench.network_total_s, bench.classic_total_s
    ));
    write_file(&out.join("latency.csv"), bench.csv().as_bytes())
}

pub fn evaluate(ctx: &Context, input: &Path, checkpoint: &Path, out: &Path) -> Result<()> {
    let index = DatasetIndex::load(input)?;
    check_geometry(&ctx.cfg.model, index.spec.image_rows(), index.spec.n_alines)?;
    let (model, _) = ctx.model(Some(checkpoint))?;
    let ws = WsChannel::for_sweep(&index.spec.sweep, ctx.cfg.wavenumber_channel);

    let mut by_volume: BTreeMap<usize, Vec<EvalSample>> = BTreeMap::new();
    for e in index.entries(Split::Test) {
        let pair = load_frame(input, e)?;
        let network = reconstruct_image(&model, &pair.input, &ws)?;
        by_volume.entry(e.volume).or_default().push(EvalSample {
            id: e.id(),
            ground_truth: pair.target,
            input: pair.input,
            classic: pair.classic,
            network: Some(network),
        });
    }
    if by_volume.is_empty() {
        return Err(Error::Usage(format!("{} has no test frames", input.display())));
    }
    let mut records = Vec::new();
    for samples in by_volume.values() {
        records.extend(evaluate_volume(samples, &ctx.cfg.metrics)?);
    }
    for s in mean_by_variant(&records) {
        ctx.log(format!(
            "{:8} psnr {:.3} dB  ssim {:.4}  mse {:.5}",
            s.variant.as_str(),
            s.psnr,
            s.ssim,
            s.mse
        ));
    }
    write_file(&out.join("metrics.csv"), metrics_csv(&records).as_bytes())
}

/// Times classic reconstruction against network inference on a synthetic
/// volume shaped for the configured model.
pub fn bench(ctx: &Context, checkpoint: Option<&Path>, out: &Path) -> Result<()> {
    let cfg = &ctx.cfg;
    let (rows, n_alines) = cfg.model_fringe_shape();
    if cfg.sweep.n_samples != rows {
        return Err(Error::Config(format!(
            "sweep.n_samples is {}, the model needs {rows}",
            cfg.sweep.n_samples
        )));
    }
    let (model, _) = ctx.model(checkpoint)?;
    let ws = ctx.ws();
    let bg = ctx.background(GridTag::LambdaLinear)?;
    let source_k = ctx.source_k(GridTag::LambdaLinear)?;
    let phantoms = cfg.phantom.sample(cfg.sweep.max_depth(), n_alines, &mut stream(cfg.seed, &[BENCH_SCENE]));
    let mut report = InferenceReport {
        images: Vec::new(),
        network_seconds: Vec::new(),
        classic_seconds: Vec::new(),
    };
    // One frame at a time keeps memory flat for full-size sweeps.
    for i in 0..cfg.bench.frames {
        let frames = synthesize_volume(
            &phantoms,
            &cfg.sweep,
            n_alines,
            1,
            &cfg.noise,
            derive_seed(cfg.seed, &[BENCH_NOISE, i as u64]),
        )?;
        let r = infer_volume(&model, &frames, &bg, &source_k, cfg.reconstruct.interpolation, &ws)?;
        report.images.push(Array2::zeros((0, 0)));
        report.network_seconds.extend(r.network_seconds);
        report.classic_seconds.extend(r.classic_seconds);
    }
    let bench = BenchReport::from(&report);
    ctx.log(format!(
        "{} frames: classic {:.3} s, network {:.3} s, ratio {:.3}",
        bench.frames, bench.classic_total_s, bench.network_total_s, bench.ratio
    ));
    write_file(&out.join("bench.csv"), bench.csv().as_bytes())
}
