use rand::Rng;

use super::init::{orthogonal, Gain};
use super::layers::{relu_backward_inplace, relu_inplace, Linear};
use super::{Module, Param, Scalar};

/// Fully connected stack with ReLU between layers and a linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    layers: Vec<Linear<T>>,
}

/// Inputs seen by each layer during a forward pass.
#[derive(Debug, Clone)]
pub struct MlpTrace<T> {
    inputs: Vec<Vec<T>>,
    batch: usize,
}

impl<T: Scalar> Mlp<T> {
    /// `dims` lists layer widths from input to output.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Self {
        assert!(dims.len() >= 2, "an MLP needs input and output widths");
        let layers = dims
            .windows(2)
            .map(|w| {
                let weight = orthogonal(w[1], w[0], Gain::Linear, rng);
                Linear::new(weight, vec![T::zero(); w[1]], w[0], w[1])
            })
            .collect();
        Self { layers }
    }

    pub fn from_layers(layers: Vec<Linear<T>>) -> Self {
        Self { layers }
    }

    pub fn layers(&self) -> &[Linear<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Linear<T>] {
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().expect("non-empty").out_dim()
    }

    pub fn forward(&self, x: &[T], batch: usize) -> Vec<T> {
        let mut h = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(&h, batch);
            if i + 1 < self.layers.len() {
                relu_inplace(&mut h);
            }
        }
        h
    }

    pub fn forward_trace(&self, x: &[T], batch: usize) -> (Vec<T>, MlpTrace<T>) {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let out = layer.forward(&h, batch);
            inputs.push(h);
            h = out;
            if i + 1 < self.layers.len() {
                relu_inplace(&mut h);
            }
        }
        (h, MlpTrace { inputs, batch })
    }

    /// Accumulates parameter gradients; returns the input gradient if asked.
    pub fn backward(&mut self, trace: &MlpTrace<T>, d_out: &[T], need_dx: bool) -> Option<Vec<T>> {
        let mut dy = d_out.to_vec();
        let last = self.layers.len() - 1;
        for i in (0..=last).rev() {
            let need = need_dx || i > 0;
            let dx = self.layers[i].backward(&trace.inputs[i], &dy, trace.batch, need);
            if i == 0 {
                return dx;
            }
            dy = dx.expect("requested");
            relu_backward_inplace(&trace.inputs[i], &mut dy);
        }
        None
    }

    /// Input gradient without touching parameters or their gradients.
    pub fn backward_input(&self, trace: &MlpTrace<T>, d_out: &[T]) -> Vec<T> {
        let mut dy = d_out.to_vec();
        for i in (0..self.layers.len()).rev() {
            dy = self.layers[i].backward_input(&dy, trace.batch);
            if i > 0 {
                relu_backward_inplace(&trace.inputs[i], &mut dy);
            }
        }
        dy
    }
}

impl<T: Scalar> Module<T> for Mlp<T> {
    fn params(&self) -> Vec<&Param<T>> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }
    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }
}
