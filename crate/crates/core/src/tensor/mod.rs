//! Reverse-mode automatic differentiation over dense NCHW tensors.
//!
//! Every operation returns a new [`Tensor`]. When gradient recording is
//! enabled and any input requires a gradient, the result keeps references
//! to its inputs plus a [`BackwardFn`] that maps the output gradient to
//! input gradients. [`Tensor::backward`] walks that graph in reverse
//! topological order and accumulates into the `grad` buffer of every leaf
//! that requires a gradient.
//!
//! The element type is generic so gradient checks can run the exact same
//! code in `f64` while training runs in `f32`.

mod conv;
mod ops;
mod optim;
mod schedule;

pub use ops::{add, add_scalar, concat_channels, conv2d, mean, mul, relu, scale, slice_channels, sub, sum};
pub use optim::{Adam, AdamConfig};
pub use schedule::{EpochDecision, PlateauConfig, PlateauSchedule};

use std::cell::Cell;
use std::collections::{HashMap, HashSet};
use std::fmt::Debug;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock, RwLockReadGuard};

use num_traits::{Float, FromPrimitive};

use crate::error::{Error, Result};

/// Element type of a tensor.
pub trait Scalar: Float + FromPrimitive + Default + Debug + Send + Sync + 'static {
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

thread_local! {
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
    static CHECKED: Cell<bool> = const { Cell::new(false) };
}

struct FlagGuard {
    key: &'static std::thread::LocalKey<Cell<bool>>,
    prev: bool,
}

impl Drop for FlagGuard {
    fn drop(&mut self) {
        self.key.with(|c| c.set(self.prev));
    }
}

fn with_flag<R>(key: &'static std::thread::LocalKey<Cell<bool>>, value: bool, f: impl FnOnce() -> R) -> R {
    let prev = key.with(|c| c.replace(value));
    let _guard = FlagGuard { key, prev };
    f()
}

/// Runs `f` without recording any operations on the tape.
pub fn no_grad<R>(f: impl FnOnce() -> R) -> R {
    with_flag(&GRAD_ENABLED, false, f)
}

/// Runs `f` with finiteness checks at every op boundary.
pub fn checked<R>(f: impl FnOnce() -> R) -> R {
    with_flag(&CHECKED, true, f)
}

pub fn grad_enabled() -> bool {
    GRAD_ENABLED.with(|c| c.get())
}

fn checked_mode() -> bool {
    CHECKED.with(|c| c.get())
}

/// Maps the gradient of an op's output to gradients of its inputs.
///
/// Implementations return one entry per input, in input order; `None` marks
/// an input that receives no gradient.
pub trait BackwardFn<T: Scalar>: Send + Sync {
    fn name(&self) -> &'static str;

    fn backward(&self, inputs: &[Tensor<T>], output: &[T], grad_out: &[T]) -> Result<Vec<Option<Vec<T>>>>;
}

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

struct Node<T: Scalar> {
    inputs: Vec<Tensor<T>>,
    backward: Box<dyn BackwardFn<T>>,
}

struct Inner<T: Scalar> {
    id: u64,
    shape: Vec<usize>,
    data: RwLock<Vec<T>>,
    grad: Mutex<Option<Vec<T>>>,
    requires_grad: bool,
    node: Option<Node<T>>,
}

/// A dense row-major tensor, cheaply clonable (clones share storage).
pub struct Tensor<T: Scalar = f32> {
    inner: Arc<Inner<T>>,
}

impl<T: Scalar> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor {
            inner: Arc::clone(&self.inner),
        }
    }
}

impl<T: Scalar> Debug for Tensor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.inner.shape)
            .field("requires_grad", &self.inner.requires_grad)
            .field("op", &self.inner.node.as_ref().map(|n| n.backward.name()))
            .finish()
    }
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl<T: Scalar> Tensor<T> {
    fn build(shape: Vec<usize>, data: Vec<T>, requires_grad: bool, node: Option<Node<T>>) -> Self {
        Tensor {
            inner: Arc::new(Inner {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                data: RwLock::new(data),
                grad: Mutex::new(None),
                requires_grad,
                node,
            }),
        }
    }

    /// A constant (non-differentiable) tensor.
    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        if numel(shape) != data.len() {
            return Err(Error::invalid(format!(
                "tensor of shape {shape:?} needs {} values, got {}",
                numel(shape),
                data.len()
            )));
        }
        Ok(Self::build(shape.to_vec(), data, false, None))
    }

    /// A leaf whose gradient is accumulated by [`Tensor::backward`].
    pub fn parameter(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let t = Self::from_vec(shape, data)?;
        Ok(Self::build(t.inner.shape.clone(), t.to_vec(), true, None))
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::build(shape.to_vec(), vec![T::zero(); numel(shape)], false, None)
    }

    pub fn scalar(v: T) -> Self {
        Self::build(vec![1], vec![v], false, None)
    }

    /// Result of an op. Records `backward` only if recording is enabled and
    /// some input requires a gradient.
    pub fn from_op(
        shape: Vec<usize>,
        data: Vec<T>,
        inputs: Vec<Tensor<T>>,
        backward: Box<dyn BackwardFn<T>>,
    ) -> Result<Self> {
        debug_assert_eq!(numel(&shape), data.len());
        if checked_mode() && data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(backward.name()));
        }
        let requires_grad = grad_enabled() && inputs.iter().any(Tensor::requires_grad);
        let node = requires_grad.then(|| Node { inputs, backward });
        Ok(Self::build(shape, data, requires_grad, node))
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn numel(&self) -> usize {
        numel(&self.inner.shape)
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.inner.node.is_none()
    }

    pub fn data(&self) -> RwLockReadGuard<'_, Vec<T>> {
        self.inner.data.read().expect("tensor lock poisoned")
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.data().clone()
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> Result<T> {
        let d = self.data();
        if d.len() != 1 {
            return Err(Error::invalid(format!("item() on tensor of shape {:?}", self.shape())));
        }
        Ok(d[0])
    }

    /// Overwrites the values in place (used by optimizers and loaders).
    pub fn set_data(&self, values: &[T]) -> Result<()> {
        let mut d = self.inner.data.write().expect("tensor lock poisoned");
        if d.len() != values.len() {
            return Err(Error::invalid("set_data length mismatch"));
        }
        d.copy_from_slice(values);
        Ok(())
    }

    pub(crate) fn update_data(&self, f: impl FnOnce(&mut [T])) {
        let mut d = self.inner.data.write().expect("tensor lock poisoned");
        f(&mut d);
    }

    pub fn grad(&self) -> Option<Vec<T>> {
        self.inner.grad.lock().expect("grad lock poisoned").clone()
    }

    pub fn zero_grad(&self) {
        *self.inner.grad.lock().expect("grad lock poisoned") = None;
    }

    /// Same values, detached from the tape.
    pub fn detach(&self) -> Tensor<T> {
        Self::build(self.inner.shape.clone(), self.to_vec(), false, None)
    }

    fn accumulate_grad(&self, g: &[T]) {
        let mut slot = self.inner.grad.lock().expect("grad lock poisoned");
        match slot.as_mut() {
            Some(acc) => acc.iter_mut().zip(g).for_each(|(a, &b)| *a = *a + b),
            None => *slot = Some(g.to_vec()),
        }
    }

    /// Backpropagates from this scalar. Leaf gradients accumulate, so calling
    /// twice without [`Tensor::zero_grad`] doubles them.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(Error::invalid(format!(
                "backward() needs a scalar loss, got shape {:?}",
                self.shape()
            )));
        }
        if !self.requires_grad() {
            return Ok(());
        }
        let order = self.topological_order();
        let mut grads: HashMap<u64, Vec<T>> = HashMap::new();
        grads.insert(self.inner.id, vec![T::one()]);
        for t in order.iter().rev() {
            let Some(g) = grads.remove(&t.inner.id) else {
                continue;
            };
            match &t.inner.node {
                None => t.accumulate_grad(&g),
                Some(node) => {
                    let out = t.data();
                    let input_grads = node.backward.backward(&node.inputs, &out, &g)?;
                    drop(out);
                    for (input, ig) in node.inputs.iter().zip(input_grads) {
                        let Some(ig) = ig else { continue };
                        if !input.requires_grad() {
                            continue;
                        }
                        if checked_mode() && ig.iter().any(|v| !v.is_finite()) {
                            return Err(Error::NonFinite(node.backward.name()));
                        }
                        match grads.get_mut(&input.inner.id) {
                            Some(acc) => acc.iter_mut().zip(&ig).for_each(|(a, &b)| *a = *a + b),
                            None => {
                                grads.insert(input.inner.id, ig);
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Nodes reachable from `self` that require gradients, inputs before
    /// the ops that consume them.
    fn topological_order(&self) -> Vec<Tensor<T>> {
        let mut order = Vec::new();
        let mut visited = HashSet::new();
        let mut stack: Vec<(Tensor<T>, bool)> = vec![(self.clone(), false)];
        while let Some((t, expanded)) = stack.pop() {
            if expanded {
                order.push(t);
                continue;
            }
            if !visited.insert(t.inner.id) {
                continue;
            }
            stack.push((t.clone(), true));
            if let Some(node) = &t.inner.node {
                for input in &node.inputs {
                    if input.requires_grad() && !visited.contains(&input.inner.id) {
                        stack.push((input.clone(), false));
                    }
                }
            }
        }
        order
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_map_gradient_is_input() {
        let x = Tensor::<f64>::from_vec(&[4], vec![1.0, -2.0, 3.0, 0.5]).unwrap();
        let w = Tensor::<f64>::parameter(&[4], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let loss = sum(&mul(&w, &x).unwrap()).unwrap();
        loss.backward().unwrap();
        assert_eq!(w.grad().unwrap(), x.to_vec());
    }

    #[test]
    fn backward_accumulates() {
        let x = Tensor::<f64>::from_vec(&[3], vec![1.0, 2.0, 3.0]).unwrap();
        let w = Tensor::<f64>::parameter(&[3], vec![0.5, -0.5, 2.0]).unwrap();
        let loss = sum(&mul(&w, &x).unwrap()).unwrap();
        loss.backward().unwrap();
        let once = w.grad().unwrap();
        loss.backward().unwrap();
        let twice = w.grad().unwrap();
        for (a, b) in once.iter().zip(&twice) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn non_scalar_backward_is_rejected() {
        let w = Tensor::<f32>::parameter(&[2], vec![1.0, 2.0]).unwrap();
        let y = relu(&w).unwrap();
        assert!(y.backward().is_err());
    }

    #[test]
    fn no_grad_skips_recording() {
        let w = Tensor::<f32>::parameter(&[2], vec![1.0, 2.0]).unwrap();
        let y = no_grad(|| relu(&w).unwrap());
        assert!(!y.requires_grad());
        assert!(grad_enabled());
    }

    #[test]
    fn checked_mode_rejects_non_finite() {
        let a = Tensor::<f32>::from_vec(&[1], vec![f32::MAX]).unwrap();
        let r = checked(|| add(&a, &a));
        assert!(matches!(r, Err(Error::NonFinite(_))));
        assert!(add(&a, &a).is_ok());
    }

    #[test]
    fn shared_subexpression_gradients_add() {
        // loss = sum(w * w) -> grad 2w
        let w = Tensor::<f64>::parameter(&[2], vec![3.0, -1.5]).unwrap();
        let loss = sum(&mul(&w, &w).unwrap()).unwrap();
        loss.backward().unwrap();
        assert_eq!(w.grad().unwrap(), vec![6.0, -3.0]);
    }
}
