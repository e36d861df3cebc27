use super::{Real, Tensor};
use crate::error::{ensure, Result};

/// Handle to a node recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

pub(crate) enum Op<T> {
    Leaf,
    Conv2d {
        x: Var,
        weight: Var,
        bias: Option<Var>,
        stride: usize,
        padding: usize,
    },
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        normalized: Vec<T>,
        inv_std: Vec<T>,
        batch_stats: bool,
    },
    Relu(Var),
    Sigmoid(Var),
    MaxPool {
        x: Var,
        argmax: Vec<usize>,
    },
    Upsample {
        x: Var,
        factor: usize,
    },
    Concat(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    ScaleByMap {
        x: Var,
        map: Var,
    },
    Sum(Var),
    Mse {
        pred: Var,
        target: Var,
    },
}

pub(crate) struct Node<T> {
    pub(crate) value: Tensor<T>,
    pub(crate) requires_grad: bool,
    pub(crate) op: Op<T>,
}

/// Tape of recorded operations.
pub struct Graph<T: Real = f64> {
    pub(crate) nodes: Vec<Node<T>>,
    grads: Vec<Option<Vec<T>>>,
    consumed: bool,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grads: Vec::new(),
            consumed: false,
        }
    }

    /// Records an input or parameter.
    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.push(value, requires_grad, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Gradient of the last backward pass with respect to leaf `v`.
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub(crate) fn push(&mut self, value: Tensor<T>, requires_grad: bool, op: Op<T>) -> Var {
        self.nodes.push(Node {
            value,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub(crate) fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Reverse-mode accumulation from the scalar `loss`. Gradients add up
    /// across fan-out. A graph supports a single backward pass; a second
    /// call is an error.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        ensure!(
            !self.consumed,
            Usage,
            "backward already ran on this graph; record a new graph"
        );
        ensure!(
            self.nodes[loss.0].value.numel() == 1,
            Usage,
            "backward needs a scalar loss, got shape {:?}",
            self.nodes[loss.0].value.shape()
        );
        self.consumed = true;
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        self.grads[loss.0] = Some(vec![T::one()]);

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let is_leaf = matches!(self.nodes[i].op, Op::Leaf);
            if is_leaf {
                continue;
            }
            let Some(upstream) = self.grads[i].take() else {
                continue;
            };
            self.backward_node(i, &upstream);
        }
        Ok(())
    }

    fn backward_node(&mut self, i: usize, dy: &[T]) {
        let nodes = &self.nodes;
        let grads = &mut self.grads;
        let node = &nodes[i];
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d {
                x,
                weight,
                bias,
                stride,
                padding,
            } => super::conv::conv2d_backward(nodes, grads, *x, *weight, *bias, *stride, *padding, dy),
            Op::BatchNorm {
                x,
                gamma,
                beta,
                normalized,
                inv_std,
                batch_stats,
            } => super::norm::batch_norm_backward(
                nodes,
                grads,
                *x,
                *gamma,
                *beta,
                normalized,
                inv_std,
                *batch_stats,
                dy,
            ),
            Op::Relu(x) => {
                let xv = nodes[x.0].value.data();
                accumulate_with(nodes, grads, *x, |k| if xv[k] > T::zero() { dy[k] } else { T::zero() });
            }
            Op::Sigmoid(x) => {
                let y = node.value.data();
                accumulate_with(nodes, grads, *x, |k| dy[k] * y[k] * (T::one() - y[k]));
            }
            Op::MaxPool { x, argmax } => {
                if let Some(g) = slot(nodes, grads, *x) {
                    for (o, &src) in argmax.iter().enumerate() {
                        g[src] += dy[o];
                    }
                }
            }
            Op::Upsample { x, factor } => {
                super::pool::upsample_backward(nodes, grads, *x, *factor, &node.value, dy)
            }
            Op::Concat(a, b) => super::elementwise::concat_backward(nodes, grads, *a, *b, dy),
            Op::Add(a, b) => {
                accumulate_with(nodes, grads, *a, |k| dy[k]);
                accumulate_with(nodes, grads, *b, |k| dy[k]);
            }
            Op::Mul(a, b) => {
                let av = nodes[a.0].value.data();
                let bv = nodes[b.0].value.data();
                accumulate_with(nodes, grads, *a, |k| dy[k] * bv[k]);
                accumulate_with(nodes, grads, *b, |k| dy[k] * av[k]);
            }
            Op::ScaleByMap { x, map } => {
                super::elementwise::scale_by_map_backward(nodes, grads, *x, *map, dy)
            }
            Op::Sum(x) => accumulate_with(nodes, grads, *x, |_| dy[0]),
            Op::Mse { pred, target } => {
                let p = nodes[pred.0].value.data();
                let t = nodes[target.0].value.data();
                let scale = T::of(2.0) / T::of(p.len() as f64) * dy[0];
                accumulate_with(nodes, grads, *pred, |k| scale * (p[k] - t[k]));
                accumulate_with(nodes, grads, *target, |k| scale * (t[k] - p[k]));
            }
        }
    }
}

/// Gradient buffer of `v`, allocated on first use, or `None` when `v` does
/// not take gradients.
pub(crate) fn slot<'a, T: Real>(
    nodes: &[Node<T>],
    grads: &'a mut [Option<Vec<T>>],
    v: Var,
) -> Option<&'a mut Vec<T>> {
    if !nodes[v.0].requires_grad {
        return None;
    }
    let len = nodes[v.0].value.numel();
    Some(grads[v.0].get_or_insert_with(|| vec![T::zero(); len]))
}

pub(crate) fn accumulate_with<T: Real>(
    nodes: &[Node<T>],
    grads: &mut [Option<Vec<T>>],
    v: Var,
    f: impl Fn(usize) -> T,
) {
    if let Some(g) = slot(nodes, grads, v) {
        for (k, gk) in g.iter_mut().enumerate() {
            *gk += f(k);
        }
    }
}
