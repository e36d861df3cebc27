use super::graph::{slot, Node, Op};
use super::{Graph, Real, Tensor, Var};
use crate::error::{ensure, Result};

/// How batch normalization obtains its statistics.
#[derive(Debug, Clone, Copy)]
pub enum BatchNormMode<'a, T> {
    /// Normalize with the statistics of the current batch.
    Train,
    /// Normalize with stored running statistics.
    Eval {
        running_mean: &'a [T],
        running_var: &'a [T],
    },
}

/// Per-channel statistics of a training batch. `var` is the unbiased
/// estimate, as used for running averages.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl BatchStats {
    /// `running ← (1 − momentum)·running + momentum·batch`.
    pub fn update_running<T: Real>(&self, mean: &mut [T], var: &mut [T], momentum: f64) {
        for (r, &b) in mean.iter_mut().zip(&self.mean) {
            *r = T::of((1.0 - momentum) * r.as_f64() + momentum * b);
        }
        for (r, &b) in var.iter_mut().zip(&self.var) {
            *r = T::of((1.0 - momentum) * r.as_f64() + momentum * b);
        }
    }
}

impl<T: Real> Graph<T> {
    /// Per-channel normalization over batch × height × width followed by the
    /// affine map `gamma·x̂ + beta`. In training mode the batch statistics are
    /// returned so the caller can update its running averages.
    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        mode: BatchNormMode<'_, T>,
        eps: f64,
    ) -> Result<(Var, Option<BatchStats>)> {
        let [b, c, h, w] = self.value(x).dims4()?;
        ensure!(
            self.shape(gamma) == [c] && self.shape(beta) == [c],
            Dimension,
            "batch_norm affine parameters must have shape [{c}]"
        );
        let hw = h * w;
        let count = b * hw;
        let xv = self.value(x).data();
        let (mean, var_biased, stats) = match mode {
            BatchNormMode::Train => {
                let mut mean = vec![0.0f64; c];
                let mut var = vec![0.0f64; c];
                for ch in 0..c {
                    let mut s = 0.0;
                    for bi in 0..b {
                        let base = (bi * c + ch) * hw;
                        s += xv[base..base + hw].iter().map(|v| v.as_f64()).sum::<f64>();
                    }
                    let m = s / count as f64;
                    let mut ss = 0.0;
                    for bi in 0..b {
                        let base = (bi * c + ch) * hw;
                        ss += xv[base..base + hw]
                            .iter()
                            .map(|v| (v.as_f64() - m).powi(2))
                            .sum::<f64>();
                    }
                    mean[ch] = m;
                    var[ch] = ss / count as f64;
                }
                let unbiased = var
                    .iter()
                    .map(|v| if count > 1 { v * count as f64 / (count - 1) as f64 } else { *v })
                    .collect();
                let stats = BatchStats {
                    mean: mean.clone(),
                    var: unbiased,
                };
                (mean, var, Some(stats))
            }
            BatchNormMode::Eval {
                running_mean,
                running_var,
            } => {
                ensure!(
                    running_mean.len() == c && running_var.len() == c,
                    Dimension,
                    "running statistics must have {c} channels"
                );
                (
                    running_mean.iter().map(|v| v.as_f64()).collect(),
                    running_var.iter().map(|v| v.as_f64()).collect(),
                    None,
                )
            }
        };
        let inv_std: Vec<T> = var_biased.iter().map(|v| T::of(1.0 / (v + eps).sqrt())).collect();
        let gv = self.value(gamma).data();
        let bv = self.value(beta).data();
        let mut normalized = vec![T::zero(); xv.len()];
        let mut out = vec![T::zero(); xv.len()];
        for bi in 0..b {
            for ch in 0..c {
                let base = (bi * c + ch) * hw;
                let m = T::of(mean[ch]);
                for k in base..base + hw {
                    let n = (xv[k] - m) * inv_std[ch];
                    normalized[k] = n;
                    out[k] = gv[ch] * n + bv[ch];
                }
            }
        }
        let value = Tensor::new(vec![b, c, h, w], out)?;
        let rg = self.needs(&[x, gamma, beta]);
        let batch_stats = stats.is_some();
        let v = self.push(
            value,
            rg,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                normalized,
                inv_std,
                batch_stats,
            },
        );
        Ok((v, stats))
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn batch_norm_backward<T: Real>(
    nodes: &[Node<T>],
    grads: &mut [Option<Vec<T>>],
    x: Var,
    gamma: Var,
    beta: Var,
    normalized: &[T],
    inv_std: &[T],
    batch_stats: bool,
    dy: &[T],
) {
    let [b, c, h, w] = nodes[x.0].value.dims4().expect("validated in forward");
    let hw = h * w;
    let count = T::of((b * hw) as f64);
    let gv = nodes[gamma.0].value.data();

    let mut sum_dy = vec![T::zero(); c];
    let mut sum_dy_n = vec![T::zero(); c];
    for bi in 0..b {
        for ch in 0..c {
            let base = (bi * c + ch) * hw;
            for k in base..base + hw {
                sum_dy[ch] += dy[k];
                sum_dy_n[ch] += dy[k] * normalized[k];
            }
        }
    }
    if let Some(gg) = slot(nodes, grads, gamma) {
        gg.iter_mut().zip(&sum_dy_n).for_each(|(g, s)| *g += *s);
    }
    if let Some(gb) = slot(nodes, grads, beta) {
        gb.iter_mut().zip(&sum_dy).for_each(|(g, s)| *g += *s);
    }
    if let Some(gx) = slot(nodes, grads, x) {
        for bi in 0..b {
            for ch in 0..c {
                let base = (bi * c + ch) * hw;
                let scale = gv[ch] * inv_std[ch];
                if batch_stats {
                    let mean_dy = sum_dy[ch] / count;
                    let mean_dy_n = sum_dy_n[ch] / count;
                    for k in base..base + hw {
                        gx[k] += scale * (dy[k] - mean_dy - normalized[k] * mean_dy_n);
                    }
                } else {
                    for k in base..base + hw {
                        gx[k] += scale * dy[k];
                    }
                }
            }
        }
    }
}
