//! Minimal reverse-mode automatic differentiation over dense 4-D tensors.
//!
//! Computation is recorded on a [`Graph`] tape as it runs. Calling
//! [`Graph::backward`] on a scalar node walks the tape in reverse and leaves
//! gradients on every leaf that requires them. A graph is consumed by its
//! backward pass; build a fresh one for the next step.
//!
//! Only the layers needed by the U-Net are provided: convolution, batch
//! normalization, ReLU, sigmoid, max pooling, nearest upsampling, channel
//! concatenation, elementwise add and multiply, per-pixel channel scaling,
//! sum and MSE.
//!
//! ```
//! use ssoct::tensor::{Graph, Tensor};
//!
//! let mut g = Graph::<f64>::new();
//! let x = g.leaf(Tensor::new(vec![1, 1, 1, 2], vec![-1.0, 2.0]).unwrap(), true);
//! let y = g.relu(x);
//! let loss = g.sum(y);
//! g.backward(loss).unwrap();
//! assert_eq!(g.grad(x).unwrap(), &[0.0, 1.0]);
//! ```

mod adam;
mod conv;
mod elementwise;
mod graph;
pub mod gradcheck;
mod norm;
mod pool;
mod real;

pub use adam::{AdamConfig, AdamState};
pub use graph::{Graph, Var};
pub use norm::{BatchNormMode, BatchStats};
pub use real::Real;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{ensure, Result};

/// Dense row-major array; image tensors use batch × channels × height × width.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T = f64> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        ensure!(
            numel == data.len(),
            Dimension,
            "shape {shape:?} needs {numel} elements, got {}",
            data.len()
        );
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: Vec<usize>, value: T) -> Self {
        let numel = shape.iter().product();
        Self {
            shape,
            data: vec![value; numel],
        }
    }

    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(usize) -> T) -> Self {
        let numel = shape.iter().product();
        Self {
            shape,
            data: (0..numel).map(&mut f).collect(),
        }
    }

    /// Zero-mean normal entries with standard deviation `std`.
    pub fn randn<R: Rng + ?Sized>(shape: Vec<usize>, std: f64, rng: &mut R) -> Self {
        Self::from_fn(shape, |_| {
            let z: f64 = StandardNormal.sample(rng);
            T::of(z * std)
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// The four extents of an image tensor.
    pub fn dims4(&self) -> Result<[usize; 4]> {
        ensure!(
            self.shape.len() == 4,
            Dimension,
            "expected a 4-D tensor, got shape {:?}",
            self.shape
        );
        Ok([self.shape[0], self.shape[1], self.shape[2], self.shape[3]])
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Element type conversion.
    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }

    /// Sample `index` of the batch axis, keeping a batch extent of 1.
    pub fn batch_item(&self, index: usize) -> Result<Self> {
        let [b, c, h, w] = self.dims4()?;
        ensure!(index < b, Dimension, "batch index {index} out of range {b}");
        let len = c * h * w;
        Ok(Self {
            shape: vec![1, c, h, w],
            data: self.data[index * len..(index + 1) * len].to_vec(),
        })
    }

    /// Stacks equally shaped tensors along the batch axis.
    pub fn stack_batch(items: &[Tensor<T>]) -> Result<Self> {
        ensure!(!items.is_empty(), Dimension, "cannot stack an empty batch");
        let [_, c, h, w] = items[0].dims4()?;
        let mut data = Vec::with_capacity(items.len() * c * h * w);
        let mut total = 0;
        for t in items {
            let [b, ci, hi, wi] = t.dims4()?;
            ensure!(
                (ci, hi, wi) == (c, h, w),
                Dimension,
                "cannot stack {:?} with {:?}",
                t.shape(),
                items[0].shape()
            );
            data.extend_from_slice(&t.data);
            total += b;
        }
        Ok(Self {
            shape: vec![total, c, h, w],
            data,
        })
    }
}

