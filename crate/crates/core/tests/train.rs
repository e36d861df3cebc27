use std::fs;
use std::path::Path;

use ssoct::forward::{background_column, sweep_wavelength_grid, synthesize_volume, to_wavenumbers, GridTag, NoiseConfig, Phantom, SweepConfig};
use ssoct::spectral::Interpolation;
use ssoct::tensor::{AdamConfig, AdamState};
use ssoct::train::{
    decode_checkpoint, encode_checkpoint, generate_dataset, generate_frame, infer_volume, load_checkpoint_for,
    load_frame, save_checkpoint, train, training_patches, Checkpoint, DatasetIndex, DatasetSpec, PatchPair, Split,
    TrainConfig, WsChannel,
};
use ssoct::unet::{ModelConfig, WaveUnet, WsMode};
use ssoct::Error;

fn small_spec() -> DatasetSpec {
    DatasetSpec {
        n_volumes: 2,
        frames_per_volume: 5,
        n_alines: 16,
        sweep: SweepConfig {
            n_samples: 64,
            ..SweepConfig::default()
        },
        averaged_frames: 3,
        seed: 11,
        ..DatasetSpec::default()
    }
}

fn small_model(base: usize) -> ModelConfig {
    ModelConfig {
        levels: 2,
        base_channels: base,
        patch_height: 8,
        patch_width: 16,
        ..ModelConfig::default()
    }
}

fn files(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn patches(spec: &DatasetSpec, frames: usize) -> Vec<PatchPair> {
    let ws = WsChannel::for_sweep(&spec.sweep, WsMode::ReciprocalLambda);
    (0..frames)
        .flat_map(|f| {
            let pair = generate_frame(spec, 0, f).unwrap();
            training_patches(&pair.input, &pair.target, &ws, 0, f).unwrap()
        })
        .collect()
}

#[test]
fn dataset_is_byte_identical_per_seed() {
    let spec = small_spec();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let index = generate_dataset(&spec, a.path()).unwrap();
    generate_dataset(&spec, b.path()).unwrap();
    assert_eq!(files(a.path()), files(b.path()));
    assert_eq!(index.frames.len(), 10);
    assert_eq!(DatasetIndex::load(a.path()).unwrap(), index);

    let entry = index.entries(Split::Test).next().unwrap();
    let loaded = load_frame(a.path(), entry).unwrap();
    let fresh = generate_frame(&spec, entry.volume, entry.frame).unwrap();
    let narrow = |a: &ndarray::Array2<f64>| a.mapv(|v| f64::from(v as f32));
    assert_eq!(loaded.input, narrow(&fresh.input));
    assert_eq!(loaded.target, narrow(&fresh.target));
    assert_eq!(loaded.classic, narrow(&fresh.classic));
    assert_eq!(loaded.input.dim(), (32, 16));
}

#[test]
fn noiseless_target_is_the_classic_image() {
    let spec = DatasetSpec {
        noise: NoiseConfig::OFF,
        ..small_spec()
    };
    let pair = generate_frame(&spec, 1, 2).unwrap();
    for (t, c) in pair.target.iter().zip(&pair.classic) {
        assert!((t - c).abs() < 1e-9, "{t} vs {c}");
    }
    assert!(pair.input.iter().zip(&pair.classic).any(|(a, b)| (a - b).abs() > 1.0));
}

fn checkpoint(seed: u64) -> Checkpoint {
    let spec = small_spec();
    let mut model = WaveUnet::<f32>::new(small_model(2), seed).unwrap();
    let mut adam = AdamState::new(AdamConfig::default());
    let set = patches(&spec, 1);
    let cfg = TrainConfig {
        epochs: 1,
        batch_size: 2,
        learning_rate: 1e-3,
        seed,
        ..TrainConfig::default()
    };
    train(&mut model, &mut adam, &set, &[], &cfg, |_| Ok(())).unwrap();
    Checkpoint {
        model,
        adam,
        epoch: 1,
        best_val_loss: Some(0.25),
    }
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let ckpt = checkpoint(1);
    let bytes = encode_checkpoint(&ckpt).unwrap();
    let back = decode_checkpoint(&bytes).unwrap();
    assert_eq!(back, ckpt);
    assert_eq!(encode_checkpoint(&back).unwrap(), bytes);
}

#[test]
fn truncated_checkpoint_is_a_format_error() {
    let bytes = encode_checkpoint(&checkpoint(2)).unwrap();
    for cut in [0, 3, 20, bytes.len() / 2, bytes.len() - 1] {
        match decode_checkpoint(&bytes[..cut]) {
            Err(Error::Format { .. }) => {}
            other => panic!("cut at {cut}: {other:?}"),
        }
    }
}

#[test]
fn mismatched_checkpoint_names_the_tensor() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("small.wun");
    save_checkpoint(&path, &checkpoint(3)).unwrap();
    let err = load_checkpoint_for(&path, &small_model(8)).unwrap_err().to_string();
    assert!(err.contains("weight"), "{err}");
    assert!(load_checkpoint_for(&path, &small_model(2)).is_ok());
}

#[test]
fn zero_learning_rate_freezes_parameters() {
    let spec = small_spec();
    let mut model = WaveUnet::<f32>::new(small_model(2), 4).unwrap();
    let before = model.store().params.clone();
    let mut adam = AdamState::new(AdamConfig::default());
    let cfg = TrainConfig {
        epochs: 2,
        batch_size: 3,
        learning_rate: 0.0,
        ..TrainConfig::default()
    };
    train(&mut model, &mut adam, &patches(&spec, 2), &[], &cfg, |_| Ok(())).unwrap();
    assert_eq!(model.store().params, before);
}

#[test]
fn training_is_deterministic_per_seed() {
    let spec = small_spec();
    let set = patches(&spec, 2);
    let val = patches(&DatasetSpec { seed: 99, ..spec.clone() }, 1);
    let run = |seed| {
        let mut model = WaveUnet::<f32>::new(small_model(2), 5).unwrap();
        let mut adam = AdamState::new(AdamConfig::default());
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 3,
            learning_rate: 1e-3,
            seed,
            ..TrainConfig::default()
        };
        let out = train(&mut model, &mut adam, &set, &val, &cfg, |_| Ok(())).unwrap();
        (out.history, model)
    };
    let (h1, m1) = run(7);
    let (h2, m2) = run(7);
    assert_eq!(h1, h2);
    assert_eq!(m1, m2);
    let (h3, _) = run(8);
    assert_ne!(h1, h3);
}

#[test]
fn volume_inference_counts_and_repeats() {
    let cfg = SweepConfig {
        n_samples: 64,
        ..SweepConfig::default()
    };
    let frames = synthesize_volume(&[Phantom::single(cfg.max_depth() / 3.0, 0.5)], &cfg, 16, 3, &NoiseConfig::OFF, 0).unwrap();
    let bg = background_column(&cfg, GridTag::LambdaLinear, 1.0).unwrap();
    let k = to_wavenumbers(&sweep_wavelength_grid(&cfg).unwrap()).unwrap();
    let ws = WsChannel::for_sweep(&cfg, WsMode::ReciprocalLambda);
    let model = WaveUnet::<f32>::new(small_model(2), 6).unwrap();
    let a = infer_volume(&model, &frames, &bg, &k, Interpolation::CubicSpline, &ws).unwrap();
    let b = infer_volume(&model, &frames, &bg, &k, Interpolation::CubicSpline, &ws).unwrap();
    assert_eq!(a.images.len(), 3);
    assert_eq!(a.network_seconds.len(), 3);
    assert!(a.images.iter().all(|im| im.dim() == (32, 16) && im.iter().all(|v| v.is_finite())));
    assert_eq!(a.images, b.images);

    let wrong = WaveUnet::<f32>::new(ModelConfig { patch_width: 32, ..small_model(2) }, 6).unwrap();
    assert!(matches!(
        infer_volume(&wrong, &frames, &bg, &k, Interpolation::CubicSpline, &ws),
        Err(Error::Config(_))
    ));
}
