//! From-scratch reverse-mode networks: layers with hand-written backward
//! passes, a sequential container, Adam, finite-difference gradient checking,
//! and a binary checkpoint format.
//!
//! Contract shared by every layer: `backward` must follow a `forward` (each
//! forward arms exactly one backward; a second backward without a fresh
//! forward is a usage error), parameter gradients accumulate across backward
//! calls until [`Network::zero_grads`], and the returned tensor is the loss
//! gradient with respect to the layer input.

mod adam;
mod checkpoint;
mod classifier;
mod generator;
mod gradcheck;
mod layers;

pub use adam::AdamState;
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use classifier::{ClassifierKind, ClassifierNet};
pub use generator::{GeneratorConfig, GeneratorNet};
pub use gradcheck::{
    grad_check, grad_check_input, CrossEntropyLoss, GradCheckReport, LossFn, QuadraticLoss,
};
pub use layers::{Conv2d, Dense, InstanceNorm, Padding, Relu, ResidualBlock, Softmax, Tanh, UpsampleConv};

use crate::error::{Error, Result};
use crate::numerics::{Scalar, Tensor};

/// A learnable tensor and the gradient accumulated for it.
#[derive(Clone, Debug)]
pub struct Param<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
}

impl<T: Scalar> Param<T> {
    pub fn new(name: impl Into<String>, value: Tensor<T>) -> Self {
        let grad = value.zeros_like();
        Param {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }
}

/// One differentiable stage of a network.
pub trait Layer<T: Scalar>: Send {
    fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>>;

    /// Propagates the loss gradient through the activation cached by the
    /// last [`Layer::forward`], adding to parameter gradients.
    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>>;

    fn params(&self) -> Vec<&Param<T>> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        Vec::new()
    }
}

pub(crate) fn missing_forward_cache<C>(layer: &str) -> Result<C> {
    Err(Error::Usage(format!(
        "{layer}: backward called without a preceding forward"
    )))
}

/// Layers applied in sequence; backward walks them in reverse.
pub struct Network<T: Scalar> {
    name: String,
    layers: Vec<Box<dyn Layer<T>>>,
}

impl<T: Scalar> Network<T> {
    pub fn new(name: impl Into<String>, layers: Vec<Box<dyn Layer<T>>>) -> Self {
        Network {
            name: name.into(),
            layers,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut cur = x.clone();
        for layer in &mut self.layers {
            cur = layer.forward(&cur)?;
        }
        Ok(cur)
    }

    /// Returns the gradient with respect to the network input.
    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let mut cur = grad_out.clone();
        for layer in self.layers.iter_mut().rev() {
            cur = layer.backward(&cur)?;
        }
        Ok(cur)
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }

    /// Divides accumulated gradients by `n`, turning per-sample sums into a
    /// batch mean before an optimizer step.
    pub fn scale_grads(&mut self, factor: T) {
        for p in self.params_mut() {
            p.grad.map_inplace(|v| v * factor);
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let entries: Vec<(&str, &Tensor<T>)> = self
            .params()
            .into_iter()
            .map(|p| (p.name.as_str(), &p.value))
            .collect();
        save_checkpoint(path, &entries)
    }

    /// Loads parameter values by name. Every parameter of this network must
    /// appear in the file with a matching shape, and vice versa.
    pub fn load(&mut self, path: &std::path::Path) -> Result<()> {
        let entries = load_checkpoint(path)?;
        let mut params = self.params_mut();
        if entries.len() != params.len() {
            return Err(Error::Checkpoint(format!(
                "{} holds {} tensors, network has {} parameters",
                path.display(),
                entries.len(),
                params.len()
            )));
        }
        let mut by_name: std::collections::BTreeMap<&str, &Tensor<f64>> =
            entries.iter().map(|(n, t)| (n.as_str(), t)).collect();
        for p in params.iter_mut() {
            let Some(stored) = by_name.remove(p.name.as_str()) else {
                return Err(Error::Checkpoint(format!(
                    "parameter `{}` missing from {}",
                    p.name,
                    path.display()
                )));
            };
            if stored.shape() != p.value.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter `{}` has shape {:?} in file, expected {:?}",
                    p.name,
                    stored.shape(),
                    p.value.shape()
                )));
            }
            p.value =
                Tensor::from_vec(stored.shape(), stored.data().iter().map(|&v| T::cast(v)).collect())
                    .expect("shape verified above");
            p.zero_grad();
        }
        Ok(())
    }
}
