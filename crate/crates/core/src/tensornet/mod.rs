//! Dense feed-forward networks.
//!
//! One representation serves the baseline MLP, the autoencoder and the
//! knowledge-compiled network. Layers carry two boolean masks next to their
//! weights: `frozen_mask` (weights that training must not touch) and
//! `knowledge_mask` (links created from a domain rule).

mod gradcheck;
mod matrix;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use gradcheck::{numerical_gradient_check, GradCheckReport};
pub use matrix::Matrix;
pub use train::{
    accuracy, train, train_with_validation, Loss, Optimizer, Samples, ScoreKind, TrainConfig,
    TrainReport,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid network: {0}")]
    Invalid(String),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("training data is empty")]
    EmptyDataset,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Softmax,
    Linear,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    /// Applies the activation to pre-activations `z`, writing into `out`.
    pub fn apply(self, z: &[f64], out: &mut [f64]) {
        match self {
            Activation::Relu => z.iter().zip(out.iter_mut()).for_each(|(z, o)| *o = z.max(0.0)),
            Activation::Sigmoid => z.iter().zip(out.iter_mut()).for_each(|(z, o)| *o = sigmoid(*z)),
            Activation::Linear => out.copy_from_slice(z),
            Activation::Softmax => {
                let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for (z, o) in z.iter().zip(out.iter_mut()) {
                    *o = (z - max).exp();
                    sum += *o;
                }
                out.iter_mut().for_each(|o| *o /= sum);
            }
        }
    }

    /// Back-propagates `grad` (dL/da) through the activation, given its output
    /// `a`, returning dL/dz in place.
    pub(crate) fn backprop(self, a: &[f64], grad: &mut [f64]) {
        match self {
            Activation::Relu => a
                .iter()
                .zip(grad.iter_mut())
                .for_each(|(a, g)| if *a <= 0.0 { *g = 0.0 }),
            Activation::Sigmoid => a.iter().zip(grad.iter_mut()).for_each(|(a, g)| *g *= a * (1.0 - a)),
            Activation::Linear => {}
            Activation::Softmax => {
                let dot: f64 = a.iter().zip(grad.iter()).map(|(a, g)| a * g).sum();
                a.iter().zip(grad.iter_mut()).for_each(|(a, g)| *g = a * (*g - dot));
            }
        }
    }
}

/// One dense layer: `activation(weights · input + biases)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `[out_units × in_units]`
    pub weights: Matrix<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
    /// `true` = weight is not updated by training.
    pub frozen_mask: Option<Matrix<bool>>,
    /// `true` = link was created from a domain-knowledge rule.
    pub knowledge_mask: Matrix<bool>,
}

impl Layer {
    pub fn new(weights: Matrix<f64>, biases: Vec<f64>, activation: Activation) -> Self {
        let knowledge_mask = Matrix::filled(weights.rows(), weights.cols(), false);
        Layer {
            weights,
            biases,
            activation,
            frozen_mask: None,
            knowledge_mask,
        }
    }

    pub fn in_units(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_units(&self) -> usize {
        self.weights.rows()
    }

    pub fn is_frozen(&self, row: usize, col: usize) -> bool {
        self.frozen_mask
            .as_ref()
            .is_some_and(|m| *m.get(row, col))
    }

    fn check(&self, index: usize) -> Result<(), NetError> {
        let (r, c) = (self.weights.rows(), self.weights.cols());
        if r == 0 || c == 0 {
            return Err(NetError::Invalid(format!("layer {index} has a zero dimension")));
        }
        if self.biases.len() != r {
            return Err(NetError::Invalid(format!(
                "layer {index}: {} biases for {r} units",
                self.biases.len()
            )));
        }
        if self.knowledge_mask.shape() != (r, c) {
            return Err(NetError::Invalid(format!("layer {index}: knowledge mask shape")));
        }
        if let Some(m) = &self.frozen_mask {
            if m.shape() != (r, c) {
                return Err(NetError::Invalid(format!("layer {index}: frozen mask shape")));
            }
        }
        if self.activation == Activation::Softmax && r < 2 {
            return Err(NetError::Invalid(format!(
                "layer {index}: softmax needs at least 2 units"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NetworkRepr {
    layers: Vec<Layer>,
    unit_labels: Option<Vec<Vec<String>>>,
    input_names: Vec<String>,
    output_names: Vec<String>,
}

/// A layered feed-forward network with named inputs and outputs.
///
/// `unit_labels`, when present, names every unit of every layer (rule symbols
/// or `headN` for free hidden units); plain MLPs carry none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkRepr", into = "NetworkRepr")]
pub struct Network {
    layers: Vec<Layer>,
    unit_labels: Option<Vec<Vec<String>>>,
    input_names: Vec<String>,
    output_names: Vec<String>,
}

impl TryFrom<NetworkRepr> for Network {
    type Error = NetError;

    fn try_from(r: NetworkRepr) -> Result<Self, NetError> {
        Network::new(r.layers, r.input_names, r.output_names, r.unit_labels)
    }
}

impl From<Network> for NetworkRepr {
    fn from(n: Network) -> Self {
        NetworkRepr {
            layers: n.layers,
            unit_labels: n.unit_labels,
            input_names: n.input_names,
            output_names: n.output_names,
        }
    }
}

impl Network {
    pub fn new(
        layers: Vec<Layer>,
        input_names: Vec<String>,
        output_names: Vec<String>,
        unit_labels: Option<Vec<Vec<String>>>,
    ) -> Result<Self, NetError> {
        if layers.is_empty() {
            return Err(NetError::Invalid("network has no layers".into()));
        }
        for (i, layer) in layers.iter().enumerate() {
            layer.check(i)?;
            if i > 0 && layers[i - 1].out_units() != layer.in_units() {
                return Err(NetError::Invalid(format!(
                    "layer {i} expects {} inputs but layer {} has {} units",
                    layer.in_units(),
                    i - 1,
                    layers[i - 1].out_units()
                )));
            }
        }
        if input_names.len() != layers[0].in_units() {
            return Err(NetError::Invalid(format!(
                "{} input names for {} inputs",
                input_names.len(),
                layers[0].in_units()
            )));
        }
        let last = layers.last().expect("non-empty");
        if output_names.len() != last.out_units() {
            return Err(NetError::Invalid(format!(
                "{} output names for {} outputs",
                output_names.len(),
                last.out_units()
            )));
        }
        if let Some(labels) = &unit_labels {
            if labels.len() != layers.len()
                || labels.iter().zip(&layers).any(|(l, layer)| l.len() != layer.out_units())
            {
                return Err(NetError::Invalid("unit labels do not match layer widths".into()));
            }
        }
        Ok(Network {
            layers,
            unit_labels,
            input_names,
            output_names,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Mutable access to layer parameters. Callers must keep shapes intact.
    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn unit_labels(&self) -> Option<&[Vec<String>]> {
        self.unit_labels.as_deref()
    }

    pub fn input_names(&self) -> &[String] {
        &self.input_names
    }

    pub fn output_names(&self) -> &[String] {
        &self.output_names
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_units()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").out_units()
    }

    /// Renames inputs and outputs, keeping everything else.
    pub fn with_io_names(
        self,
        input_names: Vec<String>,
        output_names: Vec<String>,
    ) -> Result<Self, NetError> {
        Network::new(self.layers, input_names, output_names, self.unit_labels)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Activations of every layer for one input vector.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<Vec<f64>>, NetError> {
        if input.len() != self.input_dim() {
            return Err(NetError::Dimension(format!(
                "expected {} inputs, got {}",
                self.input_dim(),
                input.len()
            )));
        }
        Ok(self.forward_unchecked(input))
    }

    pub(crate) fn forward_unchecked(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let x = acts.last().map_or(input, |a| a.as_slice());
            let z = layer.pre_activation(x);
            let mut a = vec![0.0; z.len()];
            layer.activation.apply(&z, &mut a);
            acts.push(a);
        }
        acts
    }

    /// Output-layer activations for one input vector.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>, NetError> {
        Ok(self.forward(input)?.pop().expect("non-empty"))
    }
}

impl Layer {
    pub(crate) fn pre_activation(&self, x: &[f64]) -> Vec<f64> {
        (0..self.out_units())
            .map(|r| {
                self.weights
                    .row(r)
                    .iter()
                    .zip(x)
                    .fold(self.biases[r], |acc, (w, x)| acc + w * x)
            })
            .collect()
    }
}

/// Builds a dense network with uniform `±sqrt(6 / (fan_in + fan_out))`
/// initial weights and zero biases.
pub fn build_dense(
    input_dim: usize,
    layers: &[(usize, Activation)],
    seed: u64,
) -> Result<Network, NetError> {
    if input_dim == 0 || layers.is_empty() || layers.iter().any(|(w, _)| *w == 0) {
        return Err(NetError::Invalid("all dimensions must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fan_in = input_dim;
    let mut built = Vec::with_capacity(layers.len());
    for &(width, activation) in layers {
        let limit = (6.0 / (fan_in + width) as f64).sqrt();
        let weights = Matrix::from_fn(width, fan_in, |_, _| rng.random_range(-limit..=limit));
        built.push(Layer::new(weights, vec![0.0; width], activation));
        fan_in = width;
    }
    let input_names = (0..input_dim).map(|i| format!("x{i}")).collect();
    let output_names = (0..fan_in).map(|i| format!("y{i}")).collect();
    Network::new(built, input_names, output_names, None)
}

/// A classifier MLP: ReLU hidden layers and a softmax output.
pub fn build_mlp(
    input_dim: usize,
    hidden: &[usize],
    output_dim: usize,
    seed: u64,
) -> Result<Network, NetError> {
    if output_dim < 2 {
        return Err(NetError::Invalid(
            "softmax output requires at least 2 classes".into(),
        ));
    }
    let mut spec: Vec<(usize, Activation)> =
        hidden.iter().map(|&w| (w, Activation::Relu)).collect();
    spec.push((output_dim, Activation::Softmax));
    build_dense(input_dim, &spec, seed)
}
