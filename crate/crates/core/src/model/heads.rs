use rand::Rng;

use crate::nn::{Mlp, MlpTrace, Module, Param, Scalar};

pub const PROB_EPS: f64 = 1e-6;

/// MLP ending in a clamped sigmoid: the probability a representation came
/// from the expert.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscHead<T> {
    pub mlp: Mlp<T>,
}

#[derive(Debug, Clone)]
pub struct DiscTrace<T> {
    mlp: MlpTrace<T>,
    probs: Vec<T>,
    clamped: Vec<bool>,
}

impl<T> DiscTrace<T> {
    pub fn probs(&self) -> &[T] {
        &self.probs
    }
}

/// `sigmoid(x)` clamped to `[PROB_EPS, 1 - PROB_EPS]`, with a flag for
/// whether the clamp was active.
pub fn clamped_sigmoid<T: Scalar>(x: T) -> (T, bool) {
    let p = x.sigmoid();
    let lo = T::from_f64(PROB_EPS);
    let hi = T::from_f64(1.0 - PROB_EPS);
    if p < lo {
        (lo, true)
    } else if p > hi {
        (hi, true)
    } else {
        (p, false)
    }
}

impl<T: Scalar> DiscHead<T> {
    pub fn new<R: Rng + ?Sized>(feature_dim: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            mlp: Mlp::new(&[feature_dim, hidden, 1], rng),
        }
    }

    pub fn probs(&self, r: &[T], batch: usize) -> Vec<T> {
        self.mlp
            .forward(r, batch)
            .into_iter()
            .map(|x| clamped_sigmoid(x).0)
            .collect()
    }

    pub fn forward_trace(&self, r: &[T], batch: usize) -> DiscTrace<T> {
        let (logits, mlp) = self.mlp.forward_trace(r, batch);
        let (probs, clamped) = logits.into_iter().map(clamped_sigmoid).unzip();
        DiscTrace { mlp, probs, clamped }
    }

    /// Backward from `d_probs`; returns the gradient w.r.t. `r`. The clamp
    /// has zero slope where active.
    pub fn backward(&mut self, trace: &DiscTrace<T>, d_probs: &[T]) -> Vec<T> {
        let d_logits: Vec<T> = d_probs
            .iter()
            .zip(&trace.probs)
            .zip(&trace.clamped)
            .map(|((&g, &p), &c)| if c { T::zero() } else { g * p * (T::one() - p) })
            .collect();
        self.mlp.backward(&trace.mlp, &d_logits, true).expect("requested")
    }
}

impl<T: Scalar> Module<T> for DiscHead<T> {
    fn params(&self) -> Vec<&Param<T>> {
        self.mlp.params()
    }
    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.mlp.params_mut()
    }
}

/// MLP followed by L2 normalization onto the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjHead<T> {
    pub mlp: Mlp<T>,
}

#[derive(Debug, Clone)]
pub struct ProjTrace<T> {
    mlp: MlpTrace<T>,
    out: Vec<T>,
    norms: Vec<T>,
}

impl<T> ProjTrace<T> {
    pub fn output(&self) -> &[T] {
        &self.out
    }
}

const NORM_FLOOR: f64 = 1e-12;

impl<T: Scalar> ProjHead<T> {
    pub fn new<R: Rng + ?Sized>(feature_dim: usize, hidden: usize, out_dim: usize, rng: &mut R) -> Self {
        Self {
            mlp: Mlp::new(&[feature_dim, hidden, out_dim], rng),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.mlp.out_dim()
    }

    pub fn forward(&self, r: &[T], batch: usize) -> Vec<T> {
        self.forward_trace(r, batch).out
    }

    pub fn forward_trace(&self, r: &[T], batch: usize) -> ProjTrace<T> {
        let (mut out, mlp) = self.mlp.forward_trace(r, batch);
        let dim = self.out_dim();
        let mut norms = Vec::with_capacity(batch);
        for row in out.chunks_mut(dim) {
            let n = row
                .iter()
                .map(|&v| v * v)
                .sum::<T>()
                .sqrt()
                .max(T::from_f64(NORM_FLOOR));
            row.iter_mut().for_each(|v| *v /= n);
            norms.push(n);
        }
        ProjTrace { mlp, out, norms }
    }

    /// Backward from gradients on the unit vectors; returns `d r`.
    pub fn backward(&mut self, trace: &ProjTrace<T>, d_out: &[T]) -> Vec<T> {
        let dim = self.out_dim();
        let mut d_raw = vec![T::zero(); d_out.len()];
        for (((dr, dy), y), &n) in d_raw
            .chunks_mut(dim)
            .zip(d_out.chunks(dim))
            .zip(trace.out.chunks(dim))
            .zip(&trace.norms)
        {
            let dot: T = dy.iter().zip(y).map(|(&a, &b)| a * b).sum();
            for j in 0..dim {
                dr[j] = (dy[j] - y[j] * dot) / n;
            }
        }
        self.mlp.backward(&trace.mlp, &d_raw, true).expect("requested")
    }
}

impl<T: Scalar> Module<T> for ProjHead<T> {
    fn params(&self) -> Vec<&Param<T>> {
        self.mlp.params()
    }
    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.mlp.params_mut()
    }
}

/// Deterministic policy: MLP with a tanh output in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Actor<T> {
    pub mlp: Mlp<T>,
}

#[derive(Debug, Clone)]
pub struct ActorTrace<T> {
    mlp: MlpTrace<T>,
    out: Vec<T>,
}

impl<T> ActorTrace<T> {
    pub fn output(&self) -> &[T] {
        &self.out
    }
}

impl<T: Scalar> Actor<T> {
    pub fn new<R: Rng + ?Sized>(feature_dim: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            mlp: Mlp::new(&[feature_dim, hidden, hidden, 1], rng),
        }
    }

    pub fn forward(&self, r: &[T], batch: usize) -> Vec<T> {
        let mut a = self.mlp.forward(r, batch);
        a.iter_mut().for_each(|v| *v = v.tanh());
        a
    }

    pub fn forward_trace(&self, r: &[T], batch: usize) -> ActorTrace<T> {
        let (mut out, mlp) = self.mlp.forward_trace(r, batch);
        out.iter_mut().for_each(|v| *v = v.tanh());
        ActorTrace { mlp, out }
    }

    fn pre_activation_grad(trace: &ActorTrace<T>, d_out: &[T]) -> Vec<T> {
        d_out
            .iter()
            .zip(&trace.out)
            .map(|(&g, &y)| g * (T::one() - y * y))
            .collect()
    }

    /// Accumulates parameter gradients; returns `d r` if asked.
    pub fn backward(&mut self, trace: &ActorTrace<T>, d_out: &[T], need_dr: bool) -> Option<Vec<T>> {
        let d = Self::pre_activation_grad(trace, d_out);
        self.mlp.backward(&trace.mlp, &d, need_dr)
    }

    /// Gradient w.r.t. `r` only.
    pub fn backward_input(&self, trace: &ActorTrace<T>, d_out: &[T]) -> Vec<T> {
        let d = Self::pre_activation_grad(trace, d_out);
        self.mlp.backward_input(&trace.mlp, &d)
    }
}

impl<T: Scalar> Module<T> for Actor<T> {
    fn params(&self) -> Vec<&Param<T>> {
        self.mlp.params()
    }
    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.mlp.params_mut()
    }
}

/// Q-network on the concatenation `[r, a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Critic<T> {
    pub mlp: Mlp<T>,
}

#[derive(Debug, Clone)]
pub struct CriticTrace<T> {
    mlp: MlpTrace<T>,
    out: Vec<T>,
}

impl<T> CriticTrace<T> {
    pub fn output(&self) -> &[T] {
        &self.out
    }
}

impl<T: Scalar> Critic<T> {
    pub fn new<R: Rng + ?Sized>(feature_dim: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            mlp: Mlp::new(&[feature_dim + 1, hidden, hidden, 1], rng),
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.mlp.in_dim() - 1
    }

    fn concat(&self, r: &[T], a: &[T]) -> Vec<T> {
        let f = self.feature_dim();
        assert_eq!(r.len(), a.len() * f, "critic: batch size");
        let mut x = Vec::with_capacity(r.len() + a.len());
        for (row, &ai) in r.chunks(f).zip(a) {
            x.extend_from_slice(row);
            x.push(ai);
        }
        x
    }

    pub fn forward(&self, r: &[T], a: &[T]) -> Vec<T> {
        self.mlp.forward(&self.concat(r, a), a.len())
    }

    pub fn forward_trace(&self, r: &[T], a: &[T]) -> CriticTrace<T> {
        let (out, mlp) = self.mlp.forward_trace(&self.concat(r, a), a.len());
        CriticTrace { mlp, out }
    }

    fn split(&self, dx: Vec<T>) -> (Vec<T>, Vec<T>) {
        let f = self.feature_dim();
        let mut dr = Vec::with_capacity(dx.len() / (f + 1) * f);
        let mut da = Vec::with_capacity(dx.len() / (f + 1));
        for row in dx.chunks(f + 1) {
            dr.extend_from_slice(&row[..f]);
            da.push(row[f]);
        }
        (dr, da)
    }

    /// Accumulates parameter gradients; returns `(d r, d a)`.
    pub fn backward(&mut self, trace: &CriticTrace<T>, d_q: &[T]) -> (Vec<T>, Vec<T>) {
        let dx = self.mlp.backward(&trace.mlp, d_q, true).expect("requested");
        self.split(dx)
    }

    /// Input gradients without touching parameters.
    pub fn backward_input(&self, trace: &CriticTrace<T>, d_q: &[T]) -> (Vec<T>, Vec<T>) {
        self.split(self.mlp.backward_input(&trace.mlp, d_q))
    }
}

impl<T: Scalar> Module<T> for Critic<T> {
    fn params(&self) -> Vec<&Param<T>> {
        self.mlp.params()
    }
    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.mlp.params_mut()
    }
}
