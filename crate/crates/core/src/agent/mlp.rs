//! Dense feed-forward network with hand-written backpropagation.
//!
//! Batches are column-major: an input batch is an `in_dim × batch` matrix.

use alloc::vec::Vec;

use rand::Rng;

use crate::linalg::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, z: &mut Mat) {
        match self {
            Activation::Relu => z.apply(|v| *v = v.max(0.0)),
            Activation::Tanh => z.apply(|v| *v = libm::tanh(*v)),
            Activation::Identity => {}
        }
    }

    /// Multiplies `grad` in place by the activation derivative, given the activation output.
    fn backprop(self, out: &Mat, grad: &mut Mat) {
        match self {
            Activation::Relu => grad.zip_apply(out, |g, o| {
                if o <= 0.0 {
                    *g = 0.0
                }
            }),
            Activation::Tanh => grad.zip_apply(out, |g, o| *g *= 1.0 - o * o),
            Activation::Identity => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `out × in`.
    pub weight: Mat,
    /// `out × 1`.
    pub bias: Mat,
}

impl Dense {
    fn forward(&self, x: &Mat) -> Mat {
        let mut z = &self.weight * x;
        for mut col in z.column_iter_mut() {
            col += &self.bias.column(0);
        }
        z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
    hidden: Activation,
    output: Activation,
}

/// Activations retained by [`Mlp::forward_cached`] for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// `activations[0]` is the input, `activations[k]` the output of layer `k - 1`.
    activations: Vec<Mat>,
}

impl MlpCache {
    pub fn output(&self) -> &Mat {
        self.activations.last().expect("cache holds at least the input")
    }
}

/// Parameter gradients in layer order: `(dW, db)` per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<(Mat, Mat)>,
}

impl MlpGrads {
    pub fn tensors(&self) -> Vec<&Mat> {
        self.layers.iter().flat_map(|(w, b)| [w, b]).collect()
    }
}

impl Mlp {
    /// Hidden layers use uniform `±1/sqrt(fan_in)`, the output layer uniform `±final_scale`.
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        final_scale: f64,
        rng: &mut R,
    ) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least input and output sizes");
        let depth = sizes.len() - 1;
        let layers = (0..depth)
            .map(|k| {
                let (fan_in, fan_out) = (sizes[k], sizes[k + 1]);
                let bound = if k + 1 == depth {
                    final_scale
                } else {
                    1.0 / libm::sqrt(fan_in as f64)
                };
                let mut draw = |_: usize, _: usize| {
                    if bound > 0.0 {
                        rng.random_range(-bound..bound)
                    } else {
                        0.0
                    }
                };
                let weight = Mat::from_fn(fan_out, fan_in, &mut draw);
                let bias = Mat::from_fn(fan_out, 1, &mut draw);
                Dense { weight, bias }
            })
            .collect();
        Self {
            layers,
            hidden,
            output,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weight.nrows()
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn zero_output_layer(&mut self) {
        let last = self.layers.len() - 1;
        self.layers[last].weight.fill(0.0);
        self.layers[last].bias.fill(0.0);
    }

    fn activation_for(&self, k: usize) -> Activation {
        if k + 1 == self.layers.len() {
            self.output
        } else {
            self.hidden
        }
    }

    pub fn forward(&self, x: &Mat) -> Mat {
        let mut h = x.clone();
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = layer.forward(&h);
            self.activation_for(k).apply(&mut z);
            h = z;
        }
        h
    }

    pub fn forward_cached(&self, x: &Mat) -> MlpCache {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.clone());
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = layer.forward(&activations[k]);
            self.activation_for(k).apply(&mut z);
            activations.push(z);
        }
        MlpCache { activations }
    }

    /// Backpropagates `d_out` (gradient w.r.t. the network output) and returns
    /// the parameter gradients together with the gradient w.r.t. the input.
    pub fn backward(&self, cache: &MlpCache, d_out: &Mat) -> (MlpGrads, Mat) {
        let depth = self.layers.len();
        let mut grads = Vec::with_capacity(depth);
        let mut delta = d_out.clone();
        for k in (0..depth).rev() {
            self.activation_for(k).backprop(&cache.activations[k + 1], &mut delta);
            let input = &cache.activations[k];
            let dw = &delta * input.transpose();
            let db = Mat::from_iterator(delta.nrows(), 1, delta.row_iter().map(|r| r.sum()));
            let next = self.layers[k].weight.transpose() * &delta;
            grads.push((dw, db));
            delta = next;
        }
        grads.reverse();
        (MlpGrads { layers: grads }, delta)
    }

    /// Input gradient only; skips the parameter gradients.
    pub fn input_gradient(&self, cache: &MlpCache, d_out: &Mat) -> Mat {
        let mut delta = d_out.clone();
        for k in (0..self.layers.len()).rev() {
            self.activation_for(k).backprop(&cache.activations[k + 1], &mut delta);
            delta = self.layers[k].weight.transpose() * &delta;
        }
        delta
    }

    /// Parameters in the order `W0, b0, W1, b1, ...`.
    pub fn tensors(&self) -> Vec<&Mat> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Mat> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// `self = (1 - tau) self + tau other`, tensor by tensor.
    pub fn blend_from(&mut self, other: &Mlp, tau: f64) {
        for (t, o) in self.tensors_mut().into_iter().zip(other.tensors()) {
            t.zip_apply(o, |x, y| *x = (1.0 - tau) * *x + tau * y);
        }
    }
}
