//! Dense, convolutional and normalization layers with hand-written backward
//! passes. Every layer works on flat row-major batches; `backward` adds into
//! the parameter gradients and optionally returns the input gradient.

use rayon::prelude::*;

use super::{Module, Param, Scalar};

/// `y = x W^T + b` with `W` stored out×in.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    in_dim: usize,
    out_dim: usize,
}

impl<T: Scalar> Linear<T> {
    pub fn new(weight: Vec<T>, bias: Vec<T>, in_dim: usize, out_dim: usize) -> Self {
        assert_eq!(weight.len(), in_dim * out_dim);
        assert_eq!(bias.len(), out_dim);
        Self {
            weight: Param::new(weight),
            bias: Param::new(bias),
            in_dim,
            out_dim,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn forward(&self, x: &[T], batch: usize) -> Vec<T> {
        assert_eq!(x.len(), batch * self.in_dim, "linear: input size");
        let mut y = Vec::with_capacity(batch * self.out_dim);
        for _ in 0..batch {
            y.extend_from_slice(&self.bias.value);
        }
        T::gemm(
            false,
            true,
            batch,
            self.out_dim,
            self.in_dim,
            T::one(),
            x,
            &self.weight.value,
            T::one(),
            &mut y,
        );
        y
    }

    pub fn backward(&mut self, x: &[T], dy: &[T], batch: usize, need_dx: bool) -> Option<Vec<T>> {
        assert_eq!(dy.len(), batch * self.out_dim, "linear: grad size");
        T::gemm(
            true,
            false,
            self.out_dim,
            self.in_dim,
            batch,
            T::one(),
            dy,
            x,
            T::one(),
            &mut self.weight.grad,
        );
        for row in dy.chunks(self.out_dim) {
            for (g, d) in self.bias.grad.iter_mut().zip(row) {
                *g += *d;
            }
        }
        need_dx.then(|| self.backward_input(dy, batch))
    }

    /// Input gradient only; parameters and their gradients are untouched.
    pub fn backward_input(&self, dy: &[T], batch: usize) -> Vec<T> {
        let mut dx = vec![T::zero(); batch * self.in_dim];
        T::gemm(
            false,
            false,
            batch,
            self.in_dim,
            self.out_dim,
            T::one(),
            dy,
            &self.weight.value,
            T::zero(),
            &mut dx,
        );
        dx
    }
}

impl<T: Scalar> Module<T> for Linear<T> {
    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.weight, &self.bias]
    }
    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Geometry of a valid (unpadded) square-kernel convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvShape {
    pub in_channels: usize,
    pub in_height: usize,
    pub in_width: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl ConvShape {
    pub fn out_height(&self) -> usize {
        (self.in_height - self.kernel) / self.stride + 1
    }
    pub fn out_width(&self) -> usize {
        (self.in_width - self.kernel) / self.stride + 1
    }
    pub fn in_size(&self) -> usize {
        self.in_channels * self.in_height * self.in_width
    }
    pub fn out_size(&self) -> usize {
        self.out_channels * self.positions()
    }
    pub fn positions(&self) -> usize {
        self.out_height() * self.out_width()
    }
    pub fn patch(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }
}

/// Samples per parallel work item in the weight-gradient reduction. Fixed so
/// the summation order does not depend on the thread count.
const GRAD_CHUNK: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    shape: ConvShape,
}

impl<T: Scalar> Conv2d<T> {
    pub fn new(weight: Vec<T>, bias: Vec<T>, shape: ConvShape) -> Self {
        assert!(shape.in_height >= shape.kernel && shape.in_width >= shape.kernel);
        assert_eq!(weight.len(), shape.out_channels * shape.patch());
        assert_eq!(bias.len(), shape.out_channels);
        Self {
            weight: Param::new(weight),
            bias: Param::new(bias),
            shape,
        }
    }

    pub fn shape(&self) -> &ConvShape {
        &self.shape
    }

    fn im2col(&self, x: &[T], cols: &mut [T]) {
        let s = &self.shape;
        let (oh, ow, k) = (s.out_height(), s.out_width(), s.kernel);
        let positions = oh * ow;
        for c in 0..s.in_channels {
            let plane = &x[c * s.in_height * s.in_width..(c + 1) * s.in_height * s.in_width];
            for ky in 0..k {
                for kx in 0..k {
                    let row = (c * k + ky) * k + kx;
                    let dst = &mut cols[row * positions..(row + 1) * positions];
                    for oy in 0..oh {
                        let src = &plane[(oy * s.stride + ky) * s.in_width..];
                        let out = &mut dst[oy * ow..(oy + 1) * ow];
                        for (ox, o) in out.iter_mut().enumerate() {
                            *o = src[ox * s.stride + kx];
                        }
                    }
                }
            }
        }
    }

    fn col2im_add(&self, cols: &[T], dx: &mut [T]) {
        let s = &self.shape;
        let (oh, ow, k) = (s.out_height(), s.out_width(), s.kernel);
        let positions = oh * ow;
        for c in 0..s.in_channels {
            let plane = &mut dx[c * s.in_height * s.in_width..(c + 1) * s.in_height * s.in_width];
            for ky in 0..k {
                for kx in 0..k {
                    let row = (c * k + ky) * k + kx;
                    let src = &cols[row * positions..(row + 1) * positions];
                    for oy in 0..oh {
                        let base = (oy * s.stride + ky) * s.in_width + kx;
                        for ox in 0..ow {
                            plane[base + ox * s.stride] += src[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }

    pub fn forward(&self, x: &[T], batch: usize) -> Vec<T> {
        let s = self.shape;
        assert_eq!(x.len(), batch * s.in_size(), "conv: input size");
        let mut y = vec![T::zero(); batch * s.out_size()];
        let positions = s.positions();
        y.par_chunks_mut(s.out_size())
            .zip(x.par_chunks(s.in_size()))
            .for_each_init(
                || vec![T::zero(); s.patch() * positions],
                |cols, (ys, xs)| {
                    self.im2col(xs, cols);
                    for (c, row) in ys.chunks_mut(positions).enumerate() {
                        row.iter_mut().for_each(|v| *v = self.bias.value[c]);
                    }
                    T::gemm(
                        false,
                        false,
                        s.out_channels,
                        positions,
                        s.patch(),
                        T::one(),
                        &self.weight.value,
                        cols,
                        T::one(),
                        ys,
                    );
                },
            );
        y
    }

    pub fn backward(&mut self, x: &[T], dy: &[T], batch: usize, need_dx: bool) -> Option<Vec<T>> {
        let s = self.shape;
        assert_eq!(x.len(), batch * s.in_size(), "conv: input size");
        assert_eq!(dy.len(), batch * s.out_size(), "conv: grad size");
        let positions = s.positions();
        let this = &*self;
        let mut dx = if need_dx {
            vec![T::zero(); batch * s.in_size()]
        } else {
            Vec::new()
        };

        let partials: Vec<(Vec<T>, Vec<T>)> = {
            let work = x
                .par_chunks(s.in_size() * GRAD_CHUNK)
                .zip(dy.par_chunks(s.out_size() * GRAD_CHUNK));
            let dx_chunks: Vec<Option<&mut [T]>> = if need_dx {
                dx.chunks_mut(s.in_size() * GRAD_CHUNK).map(Some).collect()
            } else {
                (0..batch.div_ceil(GRAD_CHUNK)).map(|_| None).collect()
            };
            work.zip(dx_chunks.into_par_iter())
                .map(|((xs, dys), dxs)| {
                    let mut cols = vec![T::zero(); s.patch() * positions];
                    let mut dcols = if dxs.is_some() {
                        vec![T::zero(); s.patch() * positions]
                    } else {
                        Vec::new()
                    };
                    let mut dw = vec![T::zero(); this.weight.len()];
                    let mut db = vec![T::zero(); s.out_channels];
                    let mut dxs = dxs;
                    for (i, (xi, dyi)) in xs
                        .chunks(s.in_size())
                        .zip(dys.chunks(s.out_size()))
                        .enumerate()
                    {
                        this.im2col(xi, &mut cols);
                        T::gemm(
                            false,
                            true,
                            s.out_channels,
                            s.patch(),
                            positions,
                            T::one(),
                            dyi,
                            &cols,
                            T::one(),
                            &mut dw,
                        );
                        for (c, row) in dyi.chunks(positions).enumerate() {
                            db[c] += row.iter().copied().sum::<T>();
                        }
                        if let Some(dxs) = dxs.as_deref_mut() {
                            T::gemm(
                                true,
                                false,
                                s.patch(),
                                positions,
                                s.out_channels,
                                T::one(),
                                &this.weight.value,
                                dyi,
                                T::zero(),
                                &mut dcols,
                            );
                            this.col2im_add(&dcols, &mut dxs[i * s.in_size()..(i + 1) * s.in_size()]);
                        }
                    }
                    (dw, db)
                })
                .collect()
        };

        for (dw, db) in partials {
            for (g, d) in self.weight.grad.iter_mut().zip(&dw) {
                *g += *d;
            }
            for (g, d) in self.bias.grad.iter_mut().zip(&db) {
                *g += *d;
            }
        }
        need_dx.then_some(dx)
    }
}

impl<T: Scalar> Module<T> for Conv2d<T> {
    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.weight, &self.bias]
    }
    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.weight, &mut self.bias]
    }
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Per-row normalization with learned scale and shift.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm<T> {
    pub gamma: Param<T>,
    pub beta: Param<T>,
    dim: usize,
}

/// What the backward pass needs from a layer-norm forward.
#[derive(Debug, Clone)]
pub struct LayerNormCache<T> {
    normalized: Vec<T>,
    inv_std: Vec<T>,
}

impl<T: Scalar> LayerNorm<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            gamma: Param::new(vec![T::one(); dim]),
            beta: Param::zeros(dim),
            dim,
        }
    }

    pub fn forward(&self, x: &[T], batch: usize) -> (Vec<T>, LayerNormCache<T>) {
        assert_eq!(x.len(), batch * self.dim, "layer norm: input size");
        let d = T::from_f64(self.dim as f64);
        let eps = T::from_f64(LAYER_NORM_EPS);
        let mut y = vec![T::zero(); x.len()];
        let mut normalized = vec![T::zero(); x.len()];
        let mut inv_std = Vec::with_capacity(batch);
        for ((xr, yr), nr) in x
            .chunks(self.dim)
            .zip(y.chunks_mut(self.dim))
            .zip(normalized.chunks_mut(self.dim))
        {
            let mean = xr.iter().copied().sum::<T>() / d;
            let var = xr.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / d;
            let istd = T::one() / (var + eps).sqrt();
            for j in 0..self.dim {
                nr[j] = (xr[j] - mean) * istd;
                yr[j] = nr[j] * self.gamma.value[j] + self.beta.value[j];
            }
            inv_std.push(istd);
        }
        (y, LayerNormCache { normalized, inv_std })
    }

    pub fn backward(&mut self, cache: &LayerNormCache<T>, dy: &[T]) -> Vec<T> {
        let d = T::from_f64(self.dim as f64);
        let mut dx = vec![T::zero(); dy.len()];
        for ((dyr, nr), (dxr, &istd)) in dy
            .chunks(self.dim)
            .zip(cache.normalized.chunks(self.dim))
            .zip(dx.chunks_mut(self.dim).zip(&cache.inv_std))
        {
            let mut mean_dn = T::zero();
            let mut mean_dn_n = T::zero();
            for j in 0..self.dim {
                self.gamma.grad[j] += dyr[j] * nr[j];
                self.beta.grad[j] += dyr[j];
                let dn = dyr[j] * self.gamma.value[j];
                mean_dn += dn;
                mean_dn_n += dn * nr[j];
            }
            mean_dn /= d;
            mean_dn_n /= d;
            for j in 0..self.dim {
                let dn = dyr[j] * self.gamma.value[j];
                dxr[j] = istd * (dn - mean_dn - nr[j] * mean_dn_n);
            }
        }
        dx
    }
}

impl<T: Scalar> Module<T> for LayerNorm<T> {
    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.gamma, &self.beta]
    }
    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.gamma, &mut self.beta]
    }
}

pub fn relu_inplace<T: Scalar>(x: &mut [T]) {
    for v in x {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Masks `grad` by where the ReLU output was positive.
pub fn relu_backward_inplace<T: Scalar>(output: &[T], grad: &mut [T]) {
    for (g, y) in grad.iter_mut().zip(output) {
        if *y <= T::zero() {
            *g = T::zero();
        }
    }
}

pub fn tanh_inplace<T: Scalar>(x: &mut [T]) {
    for v in x {
        *v = v.tanh();
    }
}

pub fn tanh_backward_inplace<T: Scalar>(output: &[T], grad: &mut [T]) {
    for (g, y) in grad.iter_mut().zip(output) {
        *g *= T::one() - *y * *y;
    }
}
