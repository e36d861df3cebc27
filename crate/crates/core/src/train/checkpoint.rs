use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{decode_wun1, encode_wun1, read_file, write_file, NamedTensor, Wun1};
use crate::tensor::{AdamConfig, AdamState, Tensor};
use crate::unet::{ModelConfig, WaveUnet};

/// Model, optimizer state and training progress.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: WaveUnet<f32>,
    pub adam: AdamState<f32>,
    pub epoch: usize,
    pub best_val_loss: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    model: ModelConfig,
    adam: AdamConfig,
    adam_step: u64,
    epoch: usize,
    best_val_loss: Option<f64>,
}

const PARAM: &str = "param/";
const BUFFER: &str = "buffer/";
const FIRST: &str = "adam.m/";
const SECOND: &str = "adam.v/";

fn named<'a>(prefix: &str, map: &'a BTreeMap<String, Tensor<f32>>) -> impl Iterator<Item = NamedTensor> + 'a {
    let prefix = prefix.to_string();
    map.iter().map(move |(k, t)| NamedTensor {
        name: format!("{prefix}{k}"),
        shape: t.shape().to_vec(),
        data: t.data().to_vec(),
    })
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let header = Header {
        model: ckpt.model.config().clone(),
        adam: ckpt.adam.config,
        adam_step: ckpt.adam.step,
        epoch: ckpt.epoch,
        best_val_loss: ckpt.best_val_loss,
    };
    let store = ckpt.model.store();
    let moments = |m: &BTreeMap<String, Vec<f32>>| -> BTreeMap<String, Tensor<f32>> {
        m.iter()
            .map(|(k, v)| {
                let shape = store.params.get(k).map_or_else(|| vec![v.len()], |p| p.shape().to_vec());
                (k.clone(), Tensor::new(shape, v.clone()).expect("moment shaped like parameter"))
            })
            .collect()
    };
    let first = moments(&ckpt.adam.first);
    let second = moments(&ckpt.adam.second);
    let tensors = named(PARAM, &store.params)
        .chain(named(BUFFER, &store.buffers))
        .chain(named(FIRST, &first))
        .chain(named(SECOND, &second))
        .collect();
    encode_wun1(&Wun1 {
        config: serde_json::to_string(&header).expect("serializable"),
        tensors,
    })
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let raw = decode_wun1(bytes)?;
    let header: Header = serde_json::from_str(&raw.config)
        .map_err(|e| Error::format(10, format!("checkpoint config blob: {e}")))?;
    let mut params = BTreeMap::new();
    let mut buffers = BTreeMap::new();
    let mut first = BTreeMap::new();
    let mut second = BTreeMap::new();
    for t in raw.tensors {
        let (map, key) = if let Some(k) = t.name.strip_prefix(PARAM) {
            (&mut params, k.to_string())
        } else if let Some(k) = t.name.strip_prefix(BUFFER) {
            (&mut buffers, k.to_string())
        } else if let Some(k) = t.name.strip_prefix(FIRST) {
            first.insert(k.to_string(), t.data);
            continue;
        } else if let Some(k) = t.name.strip_prefix(SECOND) {
            second.insert(k.to_string(), t.data);
            continue;
        } else {
            return Err(Error::Dimension(format!("unexpected checkpoint tensor {}", t.name)));
        };
        map.insert(key, Tensor::new(t.shape, t.data)?);
    }
    let model = WaveUnet::from_parts(header.model, params, buffers)?;
    for (k, v) in first.iter().chain(&second) {
        let p = model
            .store()
            .params
            .get(k)
            .ok_or_else(|| Error::Dimension(format!("optimizer moment for unknown parameter {k}")))?;
        if p.numel() != v.len() {
            return Err(Error::Dimension(format!("optimizer moment for {k} has the wrong size")));
        }
    }
    Ok(Checkpoint {
        model,
        adam: AdamState {
            config: header.adam,
            step: header.adam_step,
            first,
            second,
        },
        epoch: header.epoch,
        best_val_loss: header.best_val_loss,
    })
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    write_file(path, &encode_checkpoint(ckpt)?)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&read_file(path)?).map_err(|e| match e {
        Error::Format { offset, message } => Error::Format {
            offset,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

/// Loads a checkpoint and checks it against the model shape the caller
/// expects, naming the first tensor that does not fit.
pub fn load_checkpoint_for(path: &Path, expected: &ModelConfig) -> Result<Checkpoint> {
    let ckpt = load_checkpoint(path)?;
    if ckpt.model.config() != expected {
        let store = ckpt.model.store().clone();
        WaveUnet::<f32>::from_parts(expected.clone(), store.params, store.buffers)?;
        return Err(Error::Config(format!(
            "checkpoint model config {:?} differs from expected {:?}",
            ckpt.model.config(),
            expected
        )));
    }
    Ok(ckpt)
}
