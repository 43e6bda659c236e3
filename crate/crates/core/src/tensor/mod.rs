//! Dense f32 tensors with reverse-mode automatic differentiation.
//!
//! [`Tensor`] is a plain value: a shape plus row-major f32 storage. Gradients
//! are computed through a [`Tape`] that records primitive operations during
//! the forward pass and replays them in reverse. Trainable parameters live in
//! a [`ParamStore`] with a deterministic iteration order; [`Tape::backward`]
//! accumulates parameter gradients back into the store, so calling it twice
//! without [`ParamStore::reset_grads`] doubles every gradient.

mod check;
mod tape;

pub use check::grad_check;
pub use tape::{Tape, Var};

use rand::Rng;
use std::collections::HashMap;
use thiserror::Error;

/// Errors from tensor construction and tape operations.
#[derive(Debug, Error)]
pub enum TensorError {
    #[error("shape {shape:?} implies {expected} elements, got {got}")]
    DataLength {
        shape: Vec<usize>,
        expected: usize,
        got: usize,
    },
    #[error("{op}: dimension `{dim}` mismatch, expected {expected}, got {got}")]
    DimMismatch {
        op: &'static str,
        dim: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{op}: expected a {expected}-d tensor, got shape {shape:?}")]
    Rank {
        op: &'static str,
        expected: usize,
        shape: Vec<usize>,
    },
    #[error("conv1d kernel size must be odd, got {k}")]
    EvenKernel { k: usize },
    #[error("backward requires a scalar loss, got shape {shape:?}")]
    NotScalar { shape: Vec<usize> },
    #[error("loss is not finite ({value})")]
    NonFiniteLoss { value: f32 },
    #[error("log applied to a non-positive entry ({value} at index {index})")]
    LogDomain { index: usize, value: f32 },
    #[error("unknown parameter `{name}`")]
    UnknownParam { name: String },
    #[error("duplicate parameter `{name}`")]
    DuplicateParam { name: String },
    #[error("grad_check eps must lie in [1e-5, 1e-2], got {eps}")]
    EpsOutOfRange { eps: f32 },
    #[error("{op}: index {index} out of bounds for {len} rows")]
    IndexOutOfBounds {
        op: &'static str,
        index: usize,
        len: usize,
    },
}

/// A dense tensor: row-major f32 data plus shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
    pub requires_grad: bool,
    pub grad: Option<Vec<f32>>,
}

impl Tensor {
    pub fn from_vec(shape: Vec<usize>, data: Vec<f32>) -> Result<Self, TensorError> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(TensorError::DataLength {
                shape,
                expected,
                got: data.len(),
            });
        }
        Ok(Tensor {
            shape,
            data,
            requires_grad: false,
            grad: None,
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; n],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn scalar(v: f32) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![v],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// Flip on gradient tracking (allocates a zeroed grad buffer).
    pub fn with_grad(mut self) -> Self {
        self.requires_grad = true;
        if self.grad.is_none() {
            self.grad = Some(vec![0.0; self.data.len()]);
        }
        self
    }

    pub fn reset_grad(&mut self) {
        if let Some(g) = self.grad.as_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        } else if self.requires_grad {
            self.grad = Some(vec![0.0; self.data.len()]);
        }
    }

    /// Row-major element count check plus finiteness scan.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Named trainable parameters with a deterministic iteration order.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert a parameter; `requires_grad` is forced on.
    pub fn insert(&mut self, name: &str, tensor: Tensor) -> Result<(), TensorError> {
        if self.index.contains_key(name) {
            return Err(TensorError::DuplicateParam { name: name.into() });
        }
        self.index.insert(name.to_string(), self.tensors.len());
        self.names.push(name.to_string());
        self.tensors.push(tensor.with_grad());
        Ok(())
    }

    /// Insert a tensor initialized uniformly in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn insert_uniform<R: Rng>(
        &mut self,
        name: &str,
        shape: Vec<usize>,
        fan_in: usize,
        rng: &mut R,
    ) -> Result<(), TensorError> {
        let bound = 1.0 / (fan_in.max(1) as f32).sqrt();
        let n: usize = shape.iter().product();
        let data: Vec<f32> = (0..n).map(|_| rng.gen_range(-bound..=bound)).collect();
        self.insert(name, Tensor::from_vec(shape, data)?)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn slot(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Result<&Tensor, TensorError> {
        self.index
            .get(name)
            .map(|&i| &self.tensors[i])
            .ok_or_else(|| TensorError::UnknownParam { name: name.into() })
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor, TensorError> {
        match self.index.get(name) {
            Some(&i) => Ok(&mut self.tensors[i]),
            None => Err(TensorError::UnknownParam { name: name.into() }),
        }
    }

    pub(crate) fn by_slot(&self, slot: usize) -> &Tensor {
        &self.tensors[slot]
    }

    pub(crate) fn by_slot_mut(&mut self, slot: usize) -> &mut Tensor {
        &mut self.tensors[slot]
    }

    /// Parameter names in insertion order.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names
            .iter()
            .zip(self.tensors.iter())
            .map(|(n, t)| (n.as_str(), t))
    }

    pub fn reset_grads(&mut self) {
        for t in &mut self.tensors {
            t.reset_grad();
        }
    }

    /// Total number of scalar entries across all parameters.
    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(|t| t.numel()).sum()
    }
}

#[cfg(test)]
pub(crate) mod test_helpers {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Random tensor with |entries| in [lo, hi]; keeps values away from the
    /// relu kink so finite differences stay valid.
    pub fn rand_tensor<R: Rng>(shape: Vec<usize>, lo: f32, hi: f32, r: &mut R) -> Tensor {
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| {
                let mag = r.gen_range(lo..hi);
                if r.gen_bool(0.5) {
                    mag
                } else {
                    -mag
                }
            })
            .collect();
        Tensor::from_vec(shape, data).expect("shape matches data")
    }

    /// Like `rand_tensor` but strictly positive entries.
    pub fn rand_positive<R: Rng>(shape: Vec<usize>, lo: f32, hi: f32, r: &mut R) -> Tensor {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| r.gen_range(lo..hi)).collect();
        Tensor::from_vec(shape, data).expect("shape matches data")
    }
}
