//! The shared encoder, its heads, the actor and the twin critics.

mod checkpoint;
mod config;
mod encoder;
mod heads;

use rand::Rng;
use rand_distr::StandardNormal;

pub use checkpoint::Checkpoint;
pub use config::NetConfig;
pub use encoder::{Encoder, EncoderTrace};
pub use heads::{
    clamped_sigmoid, Actor, ActorTrace, Critic, CriticTrace, DiscHead, DiscTrace, ProjHead, ProjTrace,
    PROB_EPS,
};

use crate::env::{Action, VisualState};
use crate::error::{Error, Result};
use crate::nn::{Module, Scalar};

/// Every network of one agent. `disc_encoder` is only present for the
/// unshared-encoder variant; otherwise the discriminator reads `encoder`.
#[derive(Debug, Clone, PartialEq)]
pub struct Nets<T> {
    pub config: NetConfig,
    pub encoder: Encoder<T>,
    pub disc_encoder: Option<Encoder<T>>,
    pub disc: DiscHead<T>,
    pub proj_unsup: ProjHead<T>,
    pub proj_sup: ProjHead<T>,
    pub actor: Actor<T>,
    pub critic1: Critic<T>,
    pub critic2: Critic<T>,
    pub target1: Critic<T>,
    pub target2: Critic<T>,
}

impl<T: Scalar> Nets<T> {
    /// Initializes every network from `rng`; targets start as copies of the
    /// online critics.
    pub fn new<R: Rng + ?Sized>(config: NetConfig, separate_disc_encoder: bool, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let f = config.feature_dim;
        let encoder = Encoder::new(&config, rng)?;
        let disc_encoder = if separate_disc_encoder {
            Some(Encoder::new(&config, rng)?)
        } else {
            None
        };
        let disc = DiscHead::new(f, config.disc_hidden, rng);
        let proj_unsup = ProjHead::new(f, config.proj_hidden, config.proj_dim, rng);
        let proj_sup = ProjHead::new(f, config.proj_hidden, config.proj_dim, rng);
        let actor = Actor::new(f, config.hidden, rng);
        let critic1 = Critic::new(f, config.hidden, rng);
        let critic2 = Critic::new(f, config.hidden, rng);
        Ok(Self {
            target1: critic1.clone(),
            target2: critic2.clone(),
            config,
            encoder,
            disc_encoder,
            disc,
            proj_unsup,
            proj_sup,
            actor,
            critic1,
            critic2,
        })
    }

    pub fn encoder_count(&self) -> usize {
        1 + self.disc_encoder.is_some() as usize
    }

    /// The encoder feeding the discriminator and projection heads.
    pub fn disc_encoder(&self) -> &Encoder<T> {
        self.disc_encoder.as_ref().unwrap_or(&self.encoder)
    }

    pub fn disc_encoder_mut(&mut self) -> &mut Encoder<T> {
        self.disc_encoder.as_mut().unwrap_or(&mut self.encoder)
    }

    /// Expert probability of each state under the current discriminator.
    pub fn discriminate(&self, states: &[&VisualState]) -> Result<Vec<T>> {
        let r = self.disc_encoder().encode(states)?;
        Ok(self.disc.probs(&r, states.len()))
    }

    /// Policy mean `π(f(v))` for a batch of states.
    pub fn policy(&self, states: &[&VisualState]) -> Result<Vec<T>> {
        let r = self.encoder.encode(states)?;
        Ok(self.actor.forward(&r, states.len()))
    }

    pub fn greedy_action(&self, state: &VisualState) -> Result<Action> {
        let a = self.policy(&[state])?[0];
        Ok(Action::new(a.to_f64()))
    }

    /// Policy action plus `noise` clipped to `[-c, c]`, then clipped to the
    /// action range.
    pub fn act_with_noise(&self, state: &VisualState, noise: f64, c: f64) -> Result<Action> {
        let a = self.policy(&[state])?[0].to_f64();
        Ok(Action::new(a + noise.clamp(-c, c)))
    }

    /// Greedy when `explore` is false, otherwise perturbed by clipped
    /// Gaussian noise of scale `sigma` drawn from `rng`.
    pub fn act<R: Rng + ?Sized>(
        &self,
        state: &VisualState,
        sigma: f64,
        c: f64,
        explore: bool,
        rng: &mut R,
    ) -> Result<Action> {
        if !explore {
            return self.greedy_action(state);
        }
        let z: f64 = rng.sample(StandardNormal);
        self.act_with_noise(state, sigma * z, c)
    }

    pub fn q_values(&self, r: &[T], a: &[T]) -> (Vec<T>, Vec<T>) {
        (self.critic1.forward(r, a), self.critic2.forward(r, a))
    }

    pub fn target_q_values(&self, r: &[T], a: &[T]) -> (Vec<T>, Vec<T>) {
        (self.target1.forward(r, a), self.target2.forward(r, a))
    }

    pub fn zero_grad(&mut self) {
        for m in self.modules_mut() {
            m.zero_grad();
        }
    }

    fn modules(&self) -> Vec<&dyn Module<T>> {
        let mut out: Vec<&dyn Module<T>> = vec![&self.encoder];
        if let Some(e) = &self.disc_encoder {
            out.push(e);
        }
        out.extend([
            &self.disc as &dyn Module<T>,
            &self.proj_unsup,
            &self.proj_sup,
            &self.actor,
            &self.critic1,
            &self.critic2,
            &self.target1,
            &self.target2,
        ]);
        out
    }

    fn modules_mut(&mut self) -> Vec<&mut dyn Module<T>> {
        let mut out: Vec<&mut dyn Module<T>> = vec![&mut self.encoder];
        if let Some(e) = &mut self.disc_encoder {
            out.push(e);
        }
        out.extend([
            &mut self.disc as &mut dyn Module<T>,
            &mut self.proj_unsup,
            &mut self.proj_sup,
            &mut self.actor,
            &mut self.critic1,
            &mut self.critic2,
            &mut self.target1,
            &mut self.target2,
        ]);
        out
    }

    pub fn num_params(&self) -> usize {
        self.modules().iter().map(|m| m.num_params()).sum()
    }

    /// Every parameter value in a fixed order.
    pub fn flat_values(&self) -> Vec<T> {
        self.modules().iter().flat_map(|m| m.flat_values()).collect()
    }

    /// Every accumulated gradient, in the order of [`Nets::flat_values`].
    pub fn flat_grads(&self) -> Vec<T> {
        self.modules()
            .iter()
            .flat_map(|m| m.params().into_iter().flat_map(|p| p.grad.iter().copied()))
            .collect()
    }

    pub fn load_flat_values(&mut self, values: &[T]) -> Result<()> {
        if values.len() != self.num_params() {
            return Err(Error::Model(format!(
                "expected {} parameter values, got {}",
                self.num_params(),
                values.len()
            )));
        }
        let mut rest = values;
        for m in self.modules_mut() {
            for p in m.params_mut() {
                let (head, tail) = rest.split_at(p.len());
                p.value.copy_from_slice(head);
                rest = tail;
            }
        }
        Ok(())
    }

    /// Named parameter fingerprints, for checking which networks an update
    /// touched.
    pub fn fingerprints(&self) -> Vec<(&'static str, u64)> {
        let mut out = vec![("encoder", self.encoder.fingerprint())];
        if let Some(e) = &self.disc_encoder {
            out.push(("disc_encoder", e.fingerprint()));
        }
        out.extend([
            ("disc", self.disc.fingerprint()),
            ("proj_unsup", self.proj_unsup.fingerprint()),
            ("proj_sup", self.proj_sup.fingerprint()),
            ("actor", self.actor.fingerprint()),
            ("critic1", self.critic1.fingerprint()),
            ("critic2", self.critic2.fingerprint()),
            ("target1", self.target1.fingerprint()),
            ("target2", self.target2.fingerprint()),
        ]);
        out
    }
}

/// `target ← rho·target + (1 − rho)·online`, elementwise. `rho = 1` leaves
/// the target untouched and `rho = 0` copies `online` exactly.
pub fn ema_update<T: Scalar, M: Module<T>>(target: &mut M, online: &M, rho: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Model(format!("EMA rate {rho} outside [0, 1]")));
    }
    let src = online.params();
    let dst = target.params_mut();
    if src.len() != dst.len() || src.iter().zip(&dst).any(|(s, d)| s.len() != d.len()) {
        return Err(Error::Model("EMA target and online shapes differ".into()));
    }
    if rho == 1.0 {
        return Ok(());
    }
    let (keep, mix) = (T::from_f64(rho), T::from_f64(1.0 - rho));
    for (d, s) in dst.into_iter().zip(src) {
        if rho == 0.0 {
            d.value.copy_from_slice(&s.value);
        } else {
            for (t, &o) in d.value.iter_mut().zip(&s.value) {
                *t = keep * *t + mix * o;
            }
        }
    }
    Ok(())
}
