use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::tensor::{BatchNormMode, BatchStats, Graph, Real, Tensor, Var};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Shape of the network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub levels: usize,
    pub base_channels: usize,
    pub input_channels: usize,
    pub output_channels: usize,
    pub patch_height: usize,
    pub patch_width: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            levels: 4,
            base_channels: 16,
            input_channels: 2,
            output_channels: 1,
            patch_height: 288,
            patch_width: 512,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.levels >= 1, Config, "model needs at least one level");
        ensure!(
            self.base_channels >= 2,
            Config,
            "base_channels must be at least 2, got {}",
            self.base_channels
        );
        ensure!(
            self.input_channels >= 1 && self.output_channels >= 1,
            Config,
            "channel counts must be positive"
        );
        let step = 1usize << self.levels;
        ensure!(
            self.patch_height > 0
                && self.patch_width > 0
                && self.patch_height % step == 0
                && self.patch_width % step == 0,
            Config,
            "patch {}×{} is not divisible by 2^{} = {step}",
            self.patch_height,
            self.patch_width,
            self.levels
        );
        Ok(())
    }

    /// Feature channels at encoder depth `level`; `level == levels` is the
    /// bottleneck.
    pub fn channels(&self, level: usize) -> usize {
        self.base_channels << level
    }
}

/// Named parameters and running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<T> {
    pub params: BTreeMap<String, Tensor<T>>,
    pub buffers: BTreeMap<String, Tensor<T>>,
}

impl<T: Real> Default for ParamStore<T> {
    fn default() -> Self {
        Self {
            params: BTreeMap::new(),
            buffers: BTreeMap::new(),
        }
    }
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Convolution weight drawn from N(0, 2/fan_in), optional zero bias.
    pub fn add_conv<R: Rng>(&mut self, name: &str, out_ch: usize, in_ch: usize, k: usize, bias: bool, rng: &mut R) {
        let std = (2.0 / (in_ch * k * k) as f64).sqrt();
        self.params
            .insert(format!("{name}.weight"), Tensor::randn(vec![out_ch, in_ch, k, k], std, rng));
        if bias {
            self.params.insert(format!("{name}.bias"), Tensor::zeros(vec![out_ch]));
        }
    }

    pub fn add_norm(&mut self, name: &str, channels: usize) {
        self.params
            .insert(format!("{name}.gamma"), Tensor::full(vec![channels], T::one()));
        self.params.insert(format!("{name}.beta"), Tensor::zeros(vec![channels]));
        self.buffers
            .insert(format!("{name}.running_mean"), Tensor::zeros(vec![channels]));
        self.buffers
            .insert(format!("{name}.running_var"), Tensor::full(vec![channels], T::one()));
    }

    /// Two 3×3 conv + norm stages, with a 1×1 projection shortcut when the
    /// channel count changes.
    pub fn add_residual_block<R: Rng>(&mut self, prefix: &str, in_ch: usize, out_ch: usize, rng: &mut R) {
        self.add_conv(&format!("{prefix}.conv1"), out_ch, in_ch, 3, false, rng);
        self.add_norm(&format!("{prefix}.norm1"), out_ch);
        self.add_conv(&format!("{prefix}.conv2"), out_ch, out_ch, 3, false, rng);
        self.add_norm(&format!("{prefix}.norm2"), out_ch);
        if in_ch != out_ch {
            self.add_conv(&format!("{prefix}.shortcut"), out_ch, in_ch, 1, true, rng);
        }
    }

    /// Additive attention gate between a skip feature with `skip_ch`
    /// channels and a coarser gating feature with `gate_ch` channels.
    pub fn add_attention_gate<R: Rng>(&mut self, prefix: &str, skip_ch: usize, gate_ch: usize, rng: &mut R) {
        let inter = (skip_ch / 2).max(1);
        self.add_conv(&format!("{prefix}.skip"), inter, skip_ch, 2, false, rng);
        self.add_conv(&format!("{prefix}.gate"), inter, gate_ch, 1, true, rng);
        self.add_conv(&format!("{prefix}.psi"), 1, inter, 1, true, rng);
    }

    pub fn param_count(&self) -> usize {
        self.params.values().map(Tensor::numel).sum()
    }

    /// Records every parameter as a leaf of `g`.
    pub fn bind(&self, g: &mut Graph<T>, requires_grad: bool) -> BTreeMap<String, Var> {
        self.params
            .iter()
            .map(|(name, t)| (name.clone(), g.leaf(t.clone(), requires_grad)))
            .collect()
    }

    /// Folds training-batch statistics into the running averages.
    pub fn apply_batch_stats(&mut self, stats: &[(String, BatchStats)], momentum: f64) {
        for (name, s) in stats {
            let mut mean = self.buffers.remove(&format!("{name}.running_mean"));
            let mut var = self.buffers.remove(&format!("{name}.running_var"));
            if let (Some(m), Some(v)) = (mean.as_mut(), var.as_mut()) {
                s.update_running(m.data_mut(), v.data_mut(), momentum);
            }
            if let Some(m) = mean {
                self.buffers.insert(format!("{name}.running_mean"), m);
            }
            if let Some(v) = var {
                self.buffers.insert(format!("{name}.running_var"), v);
            }
        }
    }
}

/// Forward-pass context: a graph, bound parameters and the normalization
/// mode. Training-mode batch statistics are collected for the caller.
pub struct Scope<'a, T: Real> {
    pub graph: &'a mut Graph<T>,
    vars: &'a BTreeMap<String, Var>,
    buffers: &'a BTreeMap<String, Tensor<T>>,
    train: bool,
    stats: Vec<(String, BatchStats)>,
}

impl<'a, T: Real> Scope<'a, T> {
    pub fn new(
        graph: &'a mut Graph<T>,
        store: &'a ParamStore<T>,
        vars: &'a BTreeMap<String, Var>,
        train: bool,
    ) -> Self {
        Self {
            graph,
            vars,
            buffers: &store.buffers,
            train,
            stats: Vec::new(),
        }
    }

    pub fn into_stats(self) -> Vec<(String, BatchStats)> {
        self.stats
    }

    fn var(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::Dimension(format!("missing parameter {name}")))
    }

    pub fn conv(&mut self, name: &str, x: Var, stride: usize, padding: usize) -> Result<Var> {
        let w = self.var(&format!("{name}.weight"))?;
        let b = self.vars.get(&format!("{name}.bias")).copied();
        self.graph.conv2d(x, w, b, stride, padding)
    }

    pub fn norm(&mut self, name: &str, x: Var) -> Result<Var> {
        let gamma = self.var(&format!("{name}.gamma"))?;
        let beta = self.var(&format!("{name}.beta"))?;
        if self.train {
            let (y, stats) = self.graph.batch_norm(x, gamma, beta, BatchNormMode::Train, BN_EPS)?;
            self.stats.push((name.to_string(), stats.expect("train mode")));
            Ok(y)
        } else {
            let buffer = |suffix: &str| {
                self.buffers
                    .get(&format!("{name}.{suffix}"))
                    .ok_or_else(|| Error::Dimension(format!("missing buffer {name}.{suffix}")))
            };
            let mode = BatchNormMode::Eval {
                running_mean: buffer("running_mean")?.data(),
                running_var: buffer("running_var")?.data(),
            };
            Ok(self.graph.batch_norm(x, gamma, beta, mode, BN_EPS)?.0)
        }
    }

    pub fn residual_block(&mut self, prefix: &str, x: Var) -> Result<Var> {
        let h = self.conv(&format!("{prefix}.conv1"), x, 1, 1)?;
        let h = self.norm(&format!("{prefix}.norm1"), h)?;
        let h = self.graph.relu(h);
        let h = self.conv(&format!("{prefix}.conv2"), h, 1, 1)?;
        let h = self.norm(&format!("{prefix}.norm2"), h)?;
        let shortcut = if self.vars.contains_key(&format!("{prefix}.shortcut.weight")) {
            self.conv(&format!("{prefix}.shortcut"), x, 1, 0)?
        } else {
            x
        };
        let sum = self.graph.add(h, shortcut)?;
        Ok(self.graph.relu(sum))
    }

    /// Attention coefficients in (0, 1) at the resolution of `skip`, shape
    /// `batch × 1 × H × W`.
    pub fn attention_map(&mut self, prefix: &str, skip: Var, gate: Var) -> Result<Var> {
        let [bs, _, hs, ws] = self.graph.value(skip).dims4()?;
        let [bg, _, hg, wg] = self.graph.value(gate).dims4()?;
        ensure!(
            bs == bg && hs == 2 * hg && ws == 2 * wg,
            Dimension,
            "gate {:?} must have half the resolution of skip {:?}",
            self.graph.shape(gate),
            self.graph.shape(skip)
        );
        let from_skip = self.conv(&format!("{prefix}.skip"), skip, 2, 0)?;
        let from_gate = self.conv(&format!("{prefix}.gate"), gate, 1, 0)?;
        let q = self.graph.add(from_skip, from_gate)?;
        let q = self.graph.relu(q);
        let logits = self.conv(&format!("{prefix}.psi"), q, 1, 0)?;
        let alpha = self.graph.sigmoid(logits);
        self.graph.upsample_nearest(alpha, 2)
    }

    pub fn attention_gate(&mut self, prefix: &str, skip: Var, gate: Var) -> Result<Var> {
        let alpha = self.attention_map(prefix, skip, gate)?;
        self.graph.scale_by_map(skip, alpha)
    }
}

/// Residual U-Net with attention-gated skips.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveUnet<T: Real = f32> {
    config: ModelConfig,
    store: ParamStore<T>,
}

impl<T: Real> WaveUnet<T> {
    /// Fresh model with parameters drawn deterministically from `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = crate::rng::stream(seed, &[0x0007_e70e]);
        let mut store = ParamStore::new();
        let c = |l| config.channels(l);
        let n = config.levels;
        for l in 0..n {
            let in_ch = if l == 0 { config.input_channels } else { c(l - 1) };
            store.add_residual_block(&format!("enc{l}"), in_ch, c(l), &mut rng);
        }
        store.add_residual_block("bottleneck", c(n - 1), c(n), &mut rng);
        for l in (0..n).rev() {
            store.add_conv(&format!("dec{l}.up"), c(l), c(l + 1), 3, false, &mut rng);
            store.add_norm(&format!("dec{l}.up_norm"), c(l));
            store.add_attention_gate(&format!("dec{l}.attn"), c(l), c(l + 1), &mut rng);
            store.add_residual_block(&format!("dec{l}.block"), 2 * c(l), c(l), &mut rng);
        }
        store.add_conv("head", config.output_channels, c(0), 1, true, &mut rng);
        Ok(Self { config, store })
    }

    /// Rebuilds a model from stored tensors. Every name and shape must match
    /// the topology implied by `config`; the first mismatch is reported.
    pub fn from_parts(
        config: ModelConfig,
        params: BTreeMap<String, Tensor<T>>,
        buffers: BTreeMap<String, Tensor<T>>,
    ) -> Result<Self> {
        let template = Self::new(config.clone(), 0)?;
        for (expected, got, kind) in [
            (&template.store.params, &params, "parameter"),
            (&template.store.buffers, &buffers, "buffer"),
        ] {
            for (name, t) in expected {
                let Some(g) = got.get(name) else {
                    return Err(Error::Dimension(format!("missing {kind} {name}")));
                };
                ensure!(
                    g.shape() == t.shape(),
                    Dimension,
                    "{kind} {name} has shape {:?}, model expects {:?}",
                    g.shape(),
                    t.shape()
                );
            }
            if let Some(extra) = got.keys().find(|k| !expected.contains_key(*k)) {
                return Err(Error::Dimension(format!("unexpected {kind} {extra}")));
            }
        }
        Ok(Self {
            config,
            store: ParamStore { params, buffers },
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore<T> {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.store
    }

    pub fn param_count(&self) -> usize {
        self.store.param_count()
    }

    pub fn cast<U: Real>(&self) -> WaveUnet<U> {
        let cast = |m: &BTreeMap<String, Tensor<T>>| m.iter().map(|(k, v)| (k.clone(), v.cast())).collect();
        WaveUnet {
            config: self.config.clone(),
            store: ParamStore {
                params: cast(&self.store.params),
                buffers: cast(&self.store.buffers),
            },
        }
    }

    /// Records the network on `g`. `x` must be `batch × input_channels ×
    /// patch_height × patch_width`. Returns the output and, in training
    /// mode, the per-layer batch statistics.
    pub fn forward(
        &self,
        g: &mut Graph<T>,
        vars: &BTreeMap<String, Var>,
        x: Var,
        train: bool,
    ) -> Result<(Var, Vec<(String, BatchStats)>)> {
        let [_, c, h, w] = g.value(x).dims4()?;
        let cfg = &self.config;
        ensure!(
            (c, h, w) == (cfg.input_channels, cfg.patch_height, cfg.patch_width),
            Dimension,
            "input {:?} does not match model patches {}×{}×{}",
            g.shape(x),
            cfg.input_channels,
            cfg.patch_height,
            cfg.patch_width
        );
        let mut s = Scope::new(g, &self.store, vars, train);
        let mut skips = Vec::with_capacity(cfg.levels);
        let mut h = x;
        for l in 0..cfg.levels {
            h = s.residual_block(&format!("enc{l}"), h)?;
            skips.push(h);
            h = s.graph.max_pool2d(h, 2, 2)?;
        }
        h = s.residual_block("bottleneck", h)?;
        for l in (0..cfg.levels).rev() {
            let up = s.graph.upsample_nearest(h, 2)?;
            let up = s.conv(&format!("dec{l}.up"), up, 1, 1)?;
            let up = s.norm(&format!("dec{l}.up_norm"), up)?;
            let up = s.graph.relu(up);
            let gated = s.attention_gate(&format!("dec{l}.attn"), skips[l], h)?;
            let joined = s.graph.concat_channels(up, gated)?;
            h = s.residual_block(&format!("dec{l}.block"), joined)?;
        }
        let out = s.conv("head", h, 1, 0)?;
        Ok((out, s.into_stats()))
    }

    /// Evaluation-mode forward pass without gradients.
    pub fn predict(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = Graph::new();
        let vars = self.store.bind(&mut g, false);
        let x = g.leaf(input.clone(), false);
        let (y, _) = self.forward(&mut g, &vars, x, false)?;
        Ok(g.value(y).clone())
    }
}
