use rand::Rng;

use super::NetConfig;
use crate::env::{batch_floats, VisualState};
use crate::error::{Error, Result};
use crate::nn::init::{orthogonal, Gain};
use crate::nn::layers::{relu_backward_inplace, relu_inplace, LayerNormCache};
use crate::nn::{Conv2d, ConvShape, LayerNorm, Linear, Module, Param, Scalar};

/// Conv stack → flatten → linear → layer norm → tanh.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder<T> {
    convs: Vec<Conv2d<T>>,
    fc: Linear<T>,
    norm: LayerNorm<T>,
    input_shape: (usize, usize, usize),
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct EncoderTrace<T> {
    /// Input of each conv layer, then the flattened conv output.
    activations: Vec<Vec<T>>,
    norm: LayerNormCache<T>,
    out: Vec<T>,
    batch: usize,
}

impl<T> EncoderTrace<T> {
    pub fn output(&self) -> &[T] {
        &self.out
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

impl<T: Scalar> Encoder<T> {
    pub fn new<R: Rng + ?Sized>(config: &NetConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let sizes = config.conv_sizes()?;
        let mut convs = Vec::with_capacity(sizes.len());
        let (mut ch, mut h, mut w) = (config.frame_stack, config.frame_height, config.frame_width);
        for (&stride, &(oh, ow)) in config.strides.iter().zip(&sizes) {
            let shape = ConvShape {
                in_channels: ch,
                in_height: h,
                in_width: w,
                out_channels: config.conv_channels,
                kernel: config.kernel,
                stride,
            };
            let weight = orthogonal(shape.out_channels, shape.patch(), Gain::Relu, rng);
            convs.push(Conv2d::new(weight, vec![T::zero(); shape.out_channels], shape));
            (ch, h, w) = (config.conv_channels, oh, ow);
        }
        let flat = config.flat_len()?;
        let fc = Linear::new(
            orthogonal(config.feature_dim, flat, Gain::Linear, rng),
            vec![T::zero(); config.feature_dim],
            flat,
            config.feature_dim,
        );
        Ok(Self {
            convs,
            fc,
            norm: LayerNorm::new(config.feature_dim),
            input_shape: (config.frame_stack, config.frame_height, config.frame_width),
        })
    }

    pub fn input_len(&self) -> usize {
        let (d, h, w) = self.input_shape;
        d * h * w
    }

    pub fn feature_dim(&self) -> usize {
        self.fc.out_dim()
    }

    fn check_input(&self, x: &[T], batch: usize) -> Result<()> {
        if x.len() != batch * self.input_len() {
            return Err(Error::Model(format!(
                "encoder expects {batch}x{} inputs, got {} values",
                self.input_len(),
                x.len()
            )));
        }
        Ok(())
    }

    /// Packs states into an input batch after checking their shape.
    pub fn pack(&self, states: &[&VisualState]) -> Result<Vec<T>> {
        if let Some(bad) = states.iter().find(|s| s.shape() != self.input_shape) {
            return Err(Error::Model(format!(
                "state shape {:?} does not match encoder input {:?}",
                bad.shape(),
                self.input_shape
            )));
        }
        Ok(batch_floats(states))
    }

    pub fn encode(&self, states: &[&VisualState]) -> Result<Vec<T>> {
        let x = self.pack(states)?;
        self.forward(&x, states.len())
    }

    pub fn forward(&self, x: &[T], batch: usize) -> Result<Vec<T>> {
        Ok(self.forward_trace(x, batch)?.out)
    }

    pub fn forward_trace(&self, x: &[T], batch: usize) -> Result<EncoderTrace<T>> {
        self.check_input(x, batch)?;
        let mut activations = Vec::with_capacity(self.convs.len() + 1);
        let mut h = x.to_vec();
        for conv in &self.convs {
            let mut y = conv.forward(&h, batch);
            relu_inplace(&mut y);
            activations.push(h);
            h = y;
        }
        let pre = self.fc.forward(&h, batch);
        activations.push(h);
        let (mut out, norm) = self.norm.forward(&pre, batch);
        out.iter_mut().for_each(|v| *v = v.tanh());
        Ok(EncoderTrace {
            activations,
            norm,
            out,
            batch,
        })
    }

    /// Accumulates parameter gradients for `d_out` (same layout as the
    /// output). Input pixels get no gradient.
    pub fn backward(&mut self, trace: &EncoderTrace<T>, d_out: &[T]) {
        assert_eq!(d_out.len(), trace.out.len(), "encoder: grad size");
        let batch = trace.batch;
        let mut d: Vec<T> = d_out
            .iter()
            .zip(&trace.out)
            .map(|(&g, &y)| g * (T::one() - y * y))
            .collect();
        d = self.norm.backward(&trace.norm, &d);
        let flat = trace.activations.last().expect("flat activation");
        d = self.fc.backward(flat, &d, batch, true).expect("requested");
        for i in (0..self.convs.len()).rev() {
            relu_backward_inplace(&trace.activations[i + 1], &mut d);
            match self.convs[i].backward(&trace.activations[i], &d, batch, i > 0) {
                Some(dx) => d = dx,
                None => break,
            }
        }
    }
}

impl<T: Scalar> Module<T> for Encoder<T> {
    fn params(&self) -> Vec<&Param<T>> {
        let mut out: Vec<&Param<T>> = self.convs.iter().flat_map(|c| c.params()).collect();
        out.extend(self.fc.params());
        out.extend(self.norm.params());
        out
    }
    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut out: Vec<&mut Param<T>> = self.convs.iter_mut().flat_map(|c| c.params_mut()).collect();
        out.extend(self.fc.params_mut());
        out.extend(self.norm.params_mut());
        out
    }
}
