//! Affine layers with pointwise activations, evaluated on row batches.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{contract, ensure_len, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    /// `min(max(0, z), 6)`
    Relu6,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Relu6 => z.clamp(0.0, 6.0),
            Activation::Sigmoid => sigmoid(z),
            Activation::Identity => z,
        }
    }

    /// Derivative at pre-activation `z`, given the output `a = apply(z)`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => f64::from(u8::from(z > 0.0)),
            Activation::Relu6 => f64::from(u8::from(z > 0.0 && z < 6.0)),
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Identity => 1.0,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Relu6 => "relu6",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "none",
        }
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

/// `activation(W x + b)` with `W` stored `out × in`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Affine {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Affine {
    /// Weights and biases uniform in `±1/√fan_in`.
    pub fn new(inputs: usize, outputs: usize, activation: Activation, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let weight = Array2::from_shape_simple_fn((outputs, inputs), || rng.random_range(-bound..bound));
        let bias = Array1::from_shape_simple_fn(outputs, || rng.random_range(-bound..bound));
        Affine {
            weight,
            bias,
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.nrows()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerStack {
    pub layers: Vec<Affine>,
}

/// Intermediate values kept by [`LayerStack::forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct StackCache {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

impl LayerStack {
    /// `dims = [in, h1, …, out]` with one activation per layer.
    pub fn new(dims: &[usize], activations: &[Activation], rng: &mut ChaCha8Rng) -> Result<Self> {
        if dims.len() < 2 || dims.len() != activations.len() + 1 {
            return Err(contract("need one activation per layer and at least one layer"));
        }
        if dims.contains(&0) {
            return Err(contract("layer widths must be positive"));
        }
        Ok(LayerStack {
            layers: dims
                .windows(2)
                .zip(activations)
                .map(|(d, &act)| Affine::new(d[0], d[1], act, rng))
                .collect(),
        })
    }

    /// A single linear layer that passes its input through.
    pub fn identity(dim: usize) -> Self {
        LayerStack {
            layers: vec![Affine {
                weight: Array2::eye(dim),
                bias: Array1::zeros(dim),
                activation: Activation::Identity,
            }],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    /// Forward pass over a batch with one sample per row.
    pub fn forward(&self, input: ArrayView2<'_, f64>) -> Result<StackCache> {
        ensure_len(self.input_dim(), input.ncols())?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut x = input.to_owned();
        for layer in &self.layers {
            let mut z = x.dot(&layer.weight.t());
            z += &layer.bias;
            let a = z.mapv(|v| layer.activation.apply(v));
            inputs.push(x);
            pre.push(z);
            x = a;
        }
        Ok(StackCache { inputs, pre, output: x })
    }

    /// Forward pass for one sample, without keeping a cache.
    pub fn forward_one(&self, input: &[f64]) -> Result<Vec<f64>> {
        ensure_len(self.input_dim(), input.len())?;
        let mut x = input.to_vec();
        for layer in &self.layers {
            x = layer
                .weight
                .rows()
                .into_iter()
                .zip(&layer.bias)
                .map(|(row, b)| {
                    let z = row.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>() + b;
                    layer.activation.apply(z)
                })
                .collect();
        }
        Ok(x)
    }

    /// Gradients of a scalar loss given `∂loss/∂output` for every row of the
    /// batch in `cache`. Returns parameter gradients (shaped like `self`) and
    /// `∂loss/∂input`.
    pub fn backward(
        &self,
        cache: &StackCache,
        output_gradient: ArrayView2<'_, f64>,
    ) -> Result<(LayerStack, Array2<f64>)> {
        if output_gradient.dim() != cache.output.dim() {
            return Err(contract(format!(
                "output gradient shape {:?} does not match output {:?}",
                output_gradient.dim(),
                cache.output.dim()
            )));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut upstream = output_gradient.to_owned();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let z = &cache.pre[i];
            let a = if i + 1 < self.layers.len() {
                &cache.inputs[i + 1]
            } else {
                &cache.output
            };
            let mut dz = upstream;
            ndarray::Zip::from(&mut dz)
                .and(z)
                .and(a)
                .for_each(|g, &zv, &av| *g *= layer.activation.derivative(zv, av));
            let weight = dz.t().dot(&cache.inputs[i]);
            let bias = dz.sum_axis(Axis(0));
            upstream = dz.dot(&layer.weight);
            grads.push(Affine {
                weight,
                bias,
                activation: layer.activation,
            });
        }
        grads.reverse();
        Ok((LayerStack { layers: grads }, upstream))
    }
}
