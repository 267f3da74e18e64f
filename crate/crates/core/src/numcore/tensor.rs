//! Dense rank-1/rank-2 tensors with optional gradient storage.
//!
//! A [`Tensor`] is a cheaply cloneable handle to shared storage, so the same
//! parameter can appear in many recorded operations and receive accumulated
//! gradients from all of them. Tensors are single-threaded by design; see the
//! tape module for the recording/backward machinery.

use std::cell::{Ref, RefCell};
use std::fmt;
use std::rc::Rc;

use rand::Rng;

use crate::error::{Error, Result};

struct TensorInner {
    shape: Vec<usize>,
    data: Vec<f64>,
    grad: Option<Vec<f64>>,
    requires_grad: bool,
}

/// Shared handle to a dense rank-1 or rank-2 array of f64 values.
#[derive(Clone)]
pub struct Tensor {
    inner: Rc<RefCell<TensorInner>>,
}

impl Tensor {
    fn from_inner(shape: Vec<usize>, data: Vec<f64>, requires_grad: bool) -> Tensor {
        debug_assert!(!shape.is_empty() && shape.len() <= 2);
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        let grad = requires_grad.then(|| vec![0.0; data.len()]);
        Tensor {
            inner: Rc::new(RefCell::new(TensorInner {
                shape,
                data,
                grad,
                requires_grad,
            })),
        }
    }

    /// Rank-1 tensor owning `data`.
    pub fn vector(data: Vec<f64>) -> Tensor {
        let n = data.len();
        Tensor::from_inner(vec![n], data, false)
    }

    /// Rank-2 tensor in row-major order; `data.len()` must be `rows * cols`.
    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Tensor> {
        if data.len() != rows * cols {
            return Err(Error::Contract(format!(
                "matrix data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Tensor::from_inner(vec![rows, cols], data, false))
    }

    /// Rank-1 zero tensor.
    pub fn zeros(len: usize) -> Tensor {
        Tensor::vector(vec![0.0; len])
    }

    /// Single-element rank-1 tensor (the scalar carrier).
    pub fn scalar(value: f64) -> Tensor {
        Tensor::vector(vec![value])
    }

    /// Trainable rank-1 tensor: `requires_grad` set and gradient storage
    /// allocated (zeros) from birth.
    pub fn param_vector(data: Vec<f64>) -> Tensor {
        let n = data.len();
        Tensor::from_inner(vec![n], data, true)
    }

    /// Trainable rank-2 tensor.
    pub fn param_matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Tensor> {
        if data.len() != rows * cols {
            return Err(Error::Contract(format!(
                "matrix data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Tensor::from_inner(vec![rows, cols], data, true))
    }

    pub fn shape(&self) -> Vec<usize> {
        self.inner.borrow().shape.clone()
    }

    pub fn rank(&self) -> usize {
        self.inner.borrow().shape.len()
    }

    /// Total number of stored values.
    pub fn len(&self) -> usize {
        self.inner.borrow().data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.borrow().requires_grad
    }

    /// Borrow the raw values. Do not hold across mutating calls.
    pub fn data(&self) -> Ref<'_, [f64]> {
        Ref::map(self.inner.borrow(), |t| t.data.as_slice())
    }

    /// Copy of the raw values.
    pub fn to_vec(&self) -> Vec<f64> {
        self.inner.borrow().data.clone()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> Result<f64> {
        let inner = self.inner.borrow();
        if inner.data.len() != 1 {
            return Err(Error::Contract(format!(
                "item() on tensor of shape {:?}",
                inner.shape
            )));
        }
        Ok(inner.data[0])
    }

    /// Copy of the gradient, if gradient storage exists.
    pub fn grad(&self) -> Option<Vec<f64>> {
        self.inner.borrow().grad.clone()
    }

    /// Reset the gradient to zeros (no-op on tensors without gradient storage).
    pub fn zero_grad(&self) {
        if let Some(g) = self.inner.borrow_mut().grad.as_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// Replace the stored values; the length must match.
    pub fn set_data(&self, data: Vec<f64>) -> Result<()> {
        let mut inner = self.inner.borrow_mut();
        if data.len() != inner.data.len() {
            return Err(Error::Contract(format!(
                "set_data length {} on tensor of shape {:?}",
                data.len(),
                inner.shape
            )));
        }
        inner.data = data;
        Ok(())
    }

    /// Read one value by flat index.
    pub fn get(&self, index: usize) -> f64 {
        self.inner.borrow().data[index]
    }

    /// Overwrite one value by flat index.
    pub fn set(&self, index: usize, value: f64) {
        self.inner.borrow_mut().data[index] = value;
    }

    /// In-place update of every stored value.
    pub fn update_data(&self, f: impl FnMut(&mut f64)) {
        self.inner.borrow_mut().data.iter_mut().for_each(f);
    }

    pub fn is_finite(&self) -> bool {
        self.inner.borrow().data.iter().all(|v| v.is_finite())
    }

    /// Stable identity of the underlying storage; handles cloned from the
    /// same tensor compare equal.
    pub fn storage_id(&self) -> usize {
        Rc::as_ptr(&self.inner) as usize
    }

    /// Whether `self` and `other` share storage.
    pub fn same_storage(&self, other: &Tensor) -> bool {
        Rc::ptr_eq(&self.inner, &other.inner)
    }

    /// Split a rank-1 tensor at the given part sizes; sizes must sum to the
    /// tensor length. Returns fresh non-trainable tensors.
    pub fn split(&self, sizes: &[usize]) -> Result<Vec<Tensor>> {
        let inner = self.inner.borrow();
        if inner.shape.len() != 1 {
            return Err(Error::Rank {
                op: "split",
                expected: 1,
                shape: inner.shape.clone(),
            });
        }
        let total: usize = sizes.iter().sum();
        if total != inner.data.len() {
            return Err(Error::Contract(format!(
                "split sizes sum to {} but tensor has {} entries",
                total,
                inner.data.len()
            )));
        }
        let mut parts = Vec::with_capacity(sizes.len());
        let mut offset = 0;
        for &s in sizes {
            parts.push(Tensor::vector(inner.data[offset..offset + s].to_vec()));
            offset += s;
        }
        Ok(parts)
    }

    pub(crate) fn accumulate_grad(&self, contribution: &[f64]) {
        let mut inner = self.inner.borrow_mut();
        if let Some(grad) = inner.grad.as_mut() {
            debug_assert_eq!(grad.len(), contribution.len());
            for (g, c) in grad.iter_mut().zip(contribution) {
                *g += c;
            }
        }
    }

    pub(crate) fn grad_or_none(&self) -> Option<Vec<f64>> {
        self.inner.borrow().grad.clone()
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let inner = self.inner.borrow();
        f.debug_struct("Tensor")
            .field("shape", &inner.shape)
            .field("data", &inner.data)
            .field("requires_grad", &inner.requires_grad)
            .finish()
    }
}

/// Inverted-dropout mask: each entry is 0 with probability `rate`, otherwise
/// `1/(1-rate)`, so the mask has unit expectation. Training-mode only; eval
/// paths must skip masking entirely.
pub fn dropout_mask(dim: usize, rate: f64, rng: &mut impl Rng) -> Result<Tensor> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!(
            "dropout rate must lie in [0, 1), got {rate}"
        )));
    }
    let keep_scale = 1.0 / (1.0 - rate);
    let data = (0..dim)
        .map(|_| {
            if rng.random::<f64>() < rate {
                0.0
            } else {
                keep_scale
            }
        })
        .collect();
    Ok(Tensor::vector(data))
}
