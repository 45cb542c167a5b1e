//! Fully connected ReLU network with a single sigmoid output, exact
//! gradients, Adam, and a versioned binary weight file.
//!
//! Weights are stored `out x in`, so a layer computes `z = W a + b`.
//! Every layer but the last applies ReLU (derivative 0 at exactly 0); the
//! last produces the logit.

mod adam;
mod persist;

use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub use adam::{OptimizerState, DEFAULT_LEARNING_RATE};
pub use persist::{load, save, FORMAT_VERSION, MAGIC};

/// Widths of the layers after the input.
pub const LAYER_WIDTHS: [usize; 6] = [512, 256, 128, 64, 32, 1];

static NEXT_REVISION: AtomicU64 = AtomicU64::new(1);

fn next_revision() -> u64 {
    NEXT_REVISION.fetch_add(1, Ordering::Relaxed)
}

/// Which output a gradient is taken of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Output {
    /// `sigmoid(logit)`.
    #[default]
    Probability,
    Logit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            weights: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(self.bias.iter())
    }

    fn same_shape(&self, other: &Dense) -> bool {
        self.weights.dim() == other.weights.dim() && self.bias.len() == other.bias.len()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of `sigmoid(logit)` against `target`, in the
/// overflow-free form `softplus(z) - y z`.
pub fn bce_with_logit(logit: f64, target: f64) -> f64 {
    logit.max(0.0) + (-logit.abs()).exp().ln_1p() - target * logit
}

/// Weights and biases of the network.
///
/// Each instance carries a revision number that changes whenever its
/// values may have changed; activation traces remember it so gradients are
/// never taken against a different parameter state.
#[derive(Debug, Clone)]
pub struct ModelParameters {
    layer_dims: Vec<usize>,
    layers: Vec<Dense>,
    seed: u64,
    revision: u64,
}

impl PartialEq for ModelParameters {
    fn eq(&self, other: &Self) -> bool {
        self.layer_dims == other.layer_dims
            && self.seed == other.seed
            && self.layers == other.layers
    }
}

/// Activations recorded by [`ModelParameters::forward`].
#[derive(Debug, Clone)]
pub struct Trace {
    revision: u64,
    /// Input to each layer.
    inputs: Vec<Array1<f64>>,
    /// Pre-activation of each layer.
    pre_activations: Vec<Array1<f64>>,
}

#[derive(Debug, Clone)]
pub struct Forward {
    pub probability: f64,
    pub logit: f64,
    pub trace: Trace,
}

/// Parameter-shaped gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParameters) -> Self {
        Gradients {
            layers: params
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs(), l.outputs()))
                .collect(),
        }
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(Dense::values)
    }

    pub fn scale(&mut self, factor: f64) {
        for layer in &mut self.layers {
            layer.weights *= factor;
            layer.bias *= factor;
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) -> Result<()> {
        check_layer_shapes(&self.layers, &other.layers)?;
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights += &b.weights;
            a.bias += &b.bias;
        }
        Ok(())
    }
}

pub(crate) fn check_layer_shapes(expected: &[Dense], actual: &[Dense]) -> Result<()> {
    let describe = |layers: &[Dense]| {
        layers
            .iter()
            .map(|l| format!("{}x{}", l.outputs(), l.inputs()))
            .collect::<Vec<_>>()
            .join(",")
    };
    if expected.len() != actual.len() || expected.iter().zip(actual).any(|(a, b)| !a.same_shape(b))
    {
        return Err(Error::shape(describe(expected), describe(actual)));
    }
    Ok(())
}

fn relu_in_place(z: &mut Array2<f64>) {
    z.mapv_inplace(|v| v.max(0.0));
}

fn relu_mask_in_place(delta: &mut Array2<f64>, pre: &Array2<f64>) {
    ndarray::Zip::from(delta).and(pre).for_each(|d, &z| {
        if z <= 0.0 {
            *d = 0.0;
        }
    });
}

impl ModelParameters {
    /// `[input_dim, 512, 256, 128, 64, 32, 1]`, He-uniform weights, zero
    /// biases.
    pub fn init(seed: u64, input_dim: usize) -> Result<Self> {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(&LAYER_WIDTHS);
        Self::with_layer_dims(seed, &dims)
    }

    /// Arbitrary layer widths ending in a single output.
    pub fn with_layer_dims(seed: u64, dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) || dims[dims.len() - 1] != 1 {
            return Err(Error::Config(format!(
                "layer dims must be positive, at least two long and end in 1: {dims:?}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = dims
            .windows(2)
            .map(|pair| {
                let (inputs, outputs) = (pair[0], pair[1]);
                let bound = (6.0 / inputs as f64).sqrt();
                Dense {
                    weights: Array2::from_shape_simple_fn((outputs, inputs), || {
                        rng.random_range(-bound..bound)
                    }),
                    bias: Array1::zeros(outputs),
                }
            })
            .collect();
        Ok(ModelParameters {
            layer_dims: dims.to_vec(),
            layers,
            seed,
            revision: next_revision(),
        })
    }

    /// Assembles parameters from explicit layers.
    pub fn from_layers(seed: u64, layers: Vec<Dense>) -> Result<Self> {
        let Some(first) = layers.first() else {
            return Err(Error::Config("network needs at least one layer".into()));
        };
        let mut dims = vec![first.inputs()];
        for layer in &layers {
            if layer.inputs() != dims[dims.len() - 1] || layer.bias.len() != layer.outputs() {
                return Err(Error::shape(
                    format!("layer with {} inputs", dims[dims.len() - 1]),
                    format!(
                        "{}x{} with bias {}",
                        layer.outputs(),
                        layer.inputs(),
                        layer.bias.len()
                    ),
                ));
            }
            dims.push(layer.outputs());
        }
        if dims[dims.len() - 1] != 1 {
            return Err(Error::shape("single output", dims[dims.len() - 1]));
        }
        if layers
            .iter()
            .flat_map(Dense::values)
            .any(|v| !v.is_finite())
        {
            return Err(Error::Config("parameters must be finite".into()));
        }
        Ok(ModelParameters {
            layer_dims: dims,
            layers,
            seed,
            revision: next_revision(),
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    /// Mutable access to the layers. Shapes must be preserved; any trace
    /// taken before this call becomes stale.
    pub fn layers_mut(&mut self) -> &mut [Dense] {
        self.revision = next_revision();
        &mut self.layers
    }

    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.input_dim() {
            return Err(Error::shape(
                format!("input of length {}", self.input_dim()),
                len,
            ));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Forward> {
        self.check_input(x.len())?;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut a = Array1::from(x.to_vec());
        for (l, layer) in self.layers.iter().enumerate() {
            let z = layer.weights.dot(&a) + &layer.bias;
            let next = if l == last {
                z.clone()
            } else {
                z.mapv(|v| v.max(0.0))
            };
            inputs.push(a);
            pre_activations.push(z);
            a = next;
        }
        let logit = a[0];
        Ok(Forward {
            probability: sigmoid(logit),
            logit,
            trace: Trace {
                revision: self.revision,
                inputs,
                pre_activations,
            },
        })
    }

    pub fn probability(&self, x: &[f64]) -> Result<f64> {
        Ok(self.forward(x)?.probability)
    }

    /// Gradient of `upstream * logit` with respect to every parameter.
    pub fn backward_params(&self, trace: &Trace, upstream: f64) -> Result<Gradients> {
        if trace.revision != self.revision || trace.inputs.len() != self.layers.len() {
            return Err(Error::StaleTrace(
                "trace was recorded against different parameters".into(),
            ));
        }
        let mut grads = Gradients::zeros_like(self);
        let mut delta = Array1::from(vec![upstream]);
        for l in (0..self.layers.len()).rev() {
            let input = &trace.inputs[l];
            let g = &mut grads.layers[l];
            g.weights = outer(&delta, input);
            g.bias.assign(&delta);
            if l > 0 {
                let mut below = self.layers[l].weights.t().dot(&delta);
                for (d, &z) in below.iter_mut().zip(&trace.pre_activations[l - 1]) {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                }
                delta = below;
            }
        }
        Ok(grads)
    }

    /// Gradient of the probability output with respect to the input.
    pub fn input_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.input_gradient_of(x, Output::Probability)
    }

    pub fn input_gradient_of(&self, x: &[f64], output: Output) -> Result<Vec<f64>> {
        let fwd = self.forward(x)?;
        let upstream = match output {
            Output::Probability => fwd.probability * (1.0 - fwd.probability),
            Output::Logit => 1.0,
        };
        let mut delta = Array1::from(vec![upstream]);
        for l in (0..self.layers.len()).rev() {
            let mut below = self.layers[l].weights.t().dot(&delta);
            if l > 0 {
                for (d, &z) in below.iter_mut().zip(&fwd.trace.pre_activations[l - 1]) {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            delta = below;
        }
        Ok(delta.to_vec())
    }

    /// Logits for every row of `xs`.
    pub fn logits(&self, xs: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        self.check_input(xs.ncols())?;
        let last = self.layers.len() - 1;
        let mut a = xs.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.weights.t()) + &layer.bias;
            if l != last {
                relu_in_place(&mut z);
            }
            a = z;
        }
        Ok(a.column(0).to_owned())
    }

    /// Mean binary cross-entropy over the rows of `xs` and its parameter
    /// gradient. Returns the per-row logits and losses alongside.
    pub fn bce_batch(
        &self,
        xs: ArrayView2<'_, f64>,
        targets: &[f64],
    ) -> Result<(Array1<f64>, Vec<f64>, Gradients)> {
        self.check_input(xs.ncols())?;
        if xs.nrows() != targets.len() || targets.is_empty() {
            return Err(Error::shape(
                format!("{} targets", xs.nrows()),
                targets.len(),
            ));
        }
        let last = self.layers.len() - 1;
        let mut inputs: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        let mut pre: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        let mut a = xs.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = a.dot(&layer.weights.t()) + &layer.bias;
            let mut next = z.clone();
            if l != last {
                relu_in_place(&mut next);
            }
            inputs.push(a);
            pre.push(z);
            a = next;
        }
        let logits = a.column(0).to_owned();
        let rows = targets.len() as f64;
        let losses: Vec<f64> = logits
            .iter()
            .zip(targets)
            .map(|(&z, &y)| bce_with_logit(z, y))
            .collect();
        let mut delta = Array2::from_shape_fn((targets.len(), 1), |(i, _)| {
            (sigmoid(logits[i]) - targets[i]) / rows
        });
        let mut grads = Gradients::zeros_like(self);
        for l in (0..self.layers.len()).rev() {
            grads.layers[l].weights = delta.t().dot(&inputs[l]);
            grads.layers[l].bias = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut below = delta.dot(&self.layers[l].weights);
                relu_mask_in_place(&mut below, &pre[l - 1]);
                delta = below;
            }
        }
        Ok((logits, losses, grads))
    }

    /// Mean of the input gradient of `output` over the points `alpha * x`.
    ///
    /// The first layer is linear in `alpha`, so `W1 x` is formed once and the
    /// first-layer backward pass collapses to `W1^T` times the mean
    /// first-layer delta.
    pub fn mean_gradient_along_ray(
        &self,
        x: &[f64],
        alphas: &[f64],
        output: Output,
    ) -> Result<Vec<f64>> {
        self.check_input(x.len())?;
        if alphas.is_empty() {
            return Err(Error::domain("ray needs at least one point"));
        }
        let first = &self.layers[0];
        let projected = first.weights.dot(&ArrayView1::from(x));
        let m = alphas.len();
        let z1 = Array2::from_shape_fn((m, first.outputs()), |(i, j)| {
            alphas[i] * projected[j] + first.bias[j]
        });

        let last = self.layers.len() - 1;
        let mut pre = vec![z1];
        let mut inputs: Vec<Array2<f64>> = Vec::new();
        for layer in &self.layers[1..] {
            let mut a = pre[pre.len() - 1].clone();
            relu_in_place(&mut a);
            let z = a.dot(&layer.weights.t()) + &layer.bias;
            inputs.push(a);
            pre.push(z);
        }
        let logits = pre[last].column(0).to_owned();
        let mut delta = Array2::from_shape_fn((m, 1), |(i, _)| match output {
            Output::Probability => {
                let p = sigmoid(logits[i]);
                p * (1.0 - p)
            }
            Output::Logit => 1.0,
        });
        for l in (1..self.layers.len()).rev() {
            let mut below = delta.dot(&self.layers[l].weights);
            relu_mask_in_place(&mut below, &pre[l - 1]);
            delta = below;
        }
        let mean_delta = delta.sum_axis(Axis(0)) / m as f64;
        Ok(first.weights.t().dot(&mean_delta).to_vec())
    }
}

fn outer(column: &Array1<f64>, row: &Array1<f64>) -> Array2<f64> {
    Array2::from_shape_fn((column.len(), row.len()), |(i, j)| column[i] * row[j])
}
