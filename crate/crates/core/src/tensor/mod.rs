//! Dense row-major tensors with tape-free reverse-mode differentiation.
//!
//! Every op that consumes a tensor requiring gradients records its inputs and
//! a backward closure on the output node. [`Tensor::backward`] walks the
//! resulting DAG once in reverse topological order and accumulates into the
//! `grad` buffers of leaf tensors. Intermediate gradients are not retained.
//!
//! Gradients accumulate across calls; clear them with [`Tensor::zero_grad`].

mod conv;
mod elementwise;
mod float;
pub mod gradcheck;
mod linalg;
mod nn;
pub mod optim;
mod reduce;
mod shape;

use std::cell::Cell;
use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock, RwLockReadGuard, RwLockWriteGuard};

pub use float::Float;
pub use optim::{LrSchedule, Optimizer, OptimizerKind};

use crate::error::{Error, Result};

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

thread_local! {
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
}

/// Runs `f` without recording any backward graph on this thread.
pub fn no_grad<R>(f: impl FnOnce() -> R) -> R {
    struct Restore(bool);
    impl Drop for Restore {
        fn drop(&mut self) {
            GRAD_ENABLED.with(|g| g.set(self.0));
        }
    }
    let _restore = Restore(GRAD_ENABLED.with(|g| g.replace(false)));
    f()
}

fn grad_enabled() -> bool {
    GRAD_ENABLED.with(|g| g.get())
}

pub(crate) struct BackwardCtx<'a, T: Float> {
    pub grad: &'a [T],
    pub out: &'a [T],
    pub inputs: &'a [Tensor<T>],
}

pub(crate) type BackwardFn<T> =
    Box<dyn Fn(&BackwardCtx<'_, T>) -> Vec<Option<Vec<T>>> + Send + Sync>;

struct GradFn<T: Float> {
    op: &'static str,
    inputs: Vec<Tensor<T>>,
    backward: BackwardFn<T>,
}

struct Node<T: Float> {
    id: u64,
    shape: Vec<usize>,
    data: RwLock<Vec<T>>,
    grad: Mutex<Option<Vec<T>>>,
    requires_grad: bool,
    grad_fn: Option<GradFn<T>>,
}

/// An n-dimensional array, optionally part of a differentiable graph.
///
/// Cloning is cheap and shares storage.
pub struct Tensor<T: Float = f32>(Arc<Node<T>>);

impl<T: Float> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor(Arc::clone(&self.0))
    }
}

impl<T: Float> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let data = self.data();
        let preview: Vec<_> = data.iter().take(8).collect();
        f.debug_struct("Tensor")
            .field("shape", &self.0.shape)
            .field("requires_grad", &self.0.requires_grad)
            .field("op", &self.0.grad_fn.as_ref().map(|g| g.op))
            .field("data", &preview)
            .finish()
    }
}

impl<T: Float> Tensor<T> {
    fn make(data: Vec<T>, shape: Vec<usize>, requires_grad: bool, grad_fn: Option<GradFn<T>>) -> Self {
        Tensor(Arc::new(Node {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            shape,
            data: RwLock::new(data),
            grad: Mutex::new(None),
            requires_grad,
            grad_fn,
        }))
    }

    /// Constant tensor. Fails if `data.len()` disagrees with `shape`.
    pub fn from_vec(data: Vec<T>, shape: &[usize]) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::shape("from_vec", shape, &[data.len()]));
        }
        Ok(Self::make(data, shape.to_vec(), false, None))
    }

    /// Trainable leaf tensor.
    pub fn parameter(data: Vec<T>, shape: &[usize]) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::shape("parameter", shape, &[data.len()]));
        }
        Ok(Self::make(data, shape.to_vec(), true, None))
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self::make(vec![T::zero(); n], shape.to_vec(), false, None)
    }

    pub fn ones(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self::make(vec![T::one(); n], shape.to_vec(), false, None)
    }

    pub fn scalar(value: T) -> Self {
        Self::make(vec![value], Vec::new(), false, None)
    }

    /// Builds `rows × cols` from nested rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Input("ragged rows".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::from_vec(data, &[rows.len(), cols])
    }

    /// Same values, detached from any graph; `requires_grad` as given.
    pub fn detach(&self, requires_grad: bool) -> Self {
        Self::make(self.to_vec(), self.0.shape.clone(), requires_grad, None)
    }

    /// Records the output of an op. Rejects non-finite results.
    pub(crate) fn from_op(
        op: &'static str,
        data: Vec<T>,
        shape: Vec<usize>,
        inputs: Vec<Tensor<T>>,
        backward: BackwardFn<T>,
    ) -> Result<Self> {
        debug_assert_eq!(data.len(), shape.iter().product::<usize>());
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { op });
        }
        let track = grad_enabled() && inputs.iter().any(Tensor::requires_grad);
        let grad_fn = track.then(|| GradFn {
            op,
            inputs,
            backward,
        });
        Ok(Self::make(data, shape, track, grad_fn))
    }

    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn ndim(&self) -> usize {
        self.0.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.0.shape.iter().product()
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.0.grad_fn.is_none()
    }

    pub fn data(&self) -> RwLockReadGuard<'_, Vec<T>> {
        self.0.data.read().expect("tensor data lock poisoned")
    }

    /// Mutable access for in-place parameter updates.
    pub fn data_mut(&self) -> RwLockWriteGuard<'_, Vec<T>> {
        self.0.data.write().expect("tensor data lock poisoned")
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.data().clone()
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> Result<T> {
        let data = self.data();
        if data.len() != 1 {
            return Err(Error::Contract(format!(
                "item() on tensor of shape {:?}",
                self.shape()
            )));
        }
        Ok(data[0])
    }

    pub fn grad(&self) -> Option<Vec<T>> {
        self.0.grad.lock().expect("grad lock poisoned").clone()
    }

    pub fn has_grad(&self) -> bool {
        self.0.grad.lock().expect("grad lock poisoned").is_some()
    }

    /// Resets the gradient buffer to zeros (allocating it if absent).
    pub fn zero_grad(&self) {
        if self.0.requires_grad {
            *self.0.grad.lock().expect("grad lock poisoned") = Some(vec![T::zero(); self.numel()]);
        }
    }

    /// Drops the gradient buffer entirely.
    pub fn clear_grad(&self) {
        *self.0.grad.lock().expect("grad lock poisoned") = None;
    }

    fn accumulate_grad(&self, g: &[T]) {
        let mut slot = self.0.grad.lock().expect("grad lock poisoned");
        match slot.as_mut() {
            Some(buf) => buf.iter_mut().zip(g).for_each(|(b, &v)| *b += v),
            None => *slot = Some(g.to_vec()),
        }
    }

    /// Back-propagates from this scalar, accumulating into leaf gradients.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(Error::Contract(format!(
                "backward() requires a scalar, got shape {:?}",
                self.shape()
            )));
        }
        if !self.requires_grad() {
            return Ok(());
        }

        let order = self.topological_order();
        let mut pending: HashMap<u64, Vec<T>> = HashMap::new();
        pending.insert(self.id(), vec![T::one()]);

        for node in order.iter().rev() {
            let Some(grad) = pending.remove(&node.id()) else {
                continue;
            };
            let Some(grad_fn) = &node.0.grad_fn else {
                node.accumulate_grad(&grad);
                continue;
            };
            let out = node.data();
            let ctx = BackwardCtx {
                grad: &grad,
                out: &out,
                inputs: &grad_fn.inputs,
            };
            let input_grads = (grad_fn.backward)(&ctx);
            debug_assert_eq!(input_grads.len(), grad_fn.inputs.len(), "{}", grad_fn.op);
            for (input, g) in grad_fn.inputs.iter().zip(input_grads) {
                let Some(g) = g else { continue };
                if !input.requires_grad() {
                    continue;
                }
                debug_assert_eq!(g.len(), input.numel(), "{}", grad_fn.op);
                match pending.get_mut(&input.id()) {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, &v)| *a += v),
                    None => {
                        pending.insert(input.id(), g);
                    }
                }
            }
        }
        Ok(())
    }

    /// Nodes reachable through grad-tracking edges, inputs before outputs.
    fn topological_order(&self) -> Vec<Tensor<T>> {
        let mut order = Vec::new();
        let mut visited = std::collections::HashSet::new();
        let mut stack = vec![(self.clone(), false)];
        while let Some((node, expanded)) = stack.pop() {
            if expanded {
                order.push(node);
                continue;
            }
            if !visited.insert(node.id()) {
                continue;
            }
            stack.push((node.clone(), true));
            if let Some(grad_fn) = &node.0.grad_fn {
                for input in &grad_fn.inputs {
                    if input.requires_grad() && !visited.contains(&input.id()) {
                        stack.push((input.clone(), false));
                    }
                }
            }
        }
        order
    }
}

pub(crate) fn same_shape(op: &'static str, a: &[usize], b: &[usize]) -> Result<()> {
    if a != b {
        return Err(Error::shape(op, a, b));
    }
    Ok(())
}
