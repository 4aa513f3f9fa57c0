//! One optimization step per network, with the gradient routing of the
//! method: the discriminator objective trains the discriminator-side
//! encoder and heads, the TD loss trains the encoder and critics, and the
//! actor loss trains the actor alone.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::{make_views, AugMode, Transition, ViewBatch};
use crate::env::VisualState;
use crate::error::{Error, Result};
use crate::losses::{
    actor_loss, c_sup_con_loss, dis_loss, disc_reward, sup_con_loss, td_loss, td_target, unsup_con_loss,
    Components, ContrastConfig,
};
use crate::model::{ema_update, Nets};
use crate::nn::{Adam, Module, Param, Scalar};

pub const DEFAULT_LR: f64 = 1e-4;

/// Which supervised contrastive term enters the discriminator objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupTerm {
    Calibrated,
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscConfig {
    pub contrast: ContrastConfig,
    pub sup_term: SupTerm,
    pub aug: AugMode,
}

impl DiscConfig {
    fn uses_unsup(&self) -> bool {
        self.contrast.lambda1 != 0.0
    }

    fn uses_sup(&self) -> bool {
        self.contrast.lambda2 != 0.0
    }
}

/// Exploration and target-smoothing noise: scale and clip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub sigma: f64,
    pub clip: f64,
}

impl NoiseConfig {
    /// Clipped Gaussian draws, one per batch element.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                (self.sigma * z).clamp(-self.clip, self.clip)
            })
            .collect()
    }
}

/// Adam state per parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizers<T> {
    pub disc: Adam<T>,
    pub critic: Adam<T>,
    pub actor: Adam<T>,
}

impl<T: Scalar> Optimizers<T> {
    pub fn new(lr: f64) -> Self {
        Self {
            disc: Adam::new(lr),
            critic: Adam::new(lr),
            actor: Adam::new(lr),
        }
    }
}

/// Discriminator-side encoder, discriminator head and whichever projection
/// heads the objective uses.
fn disc_group<'a, T: Scalar>(nets: &'a mut Nets<T>, cfg: &DiscConfig) -> Vec<&'a mut Param<T>> {
    let encoder = match &mut nets.disc_encoder {
        Some(e) => e,
        None => &mut nets.encoder,
    };
    let mut group = encoder.params_mut();
    group.extend(nets.disc.params_mut());
    if cfg.uses_unsup() {
        group.extend(nets.proj_unsup.params_mut());
    }
    if cfg.uses_sup() {
        group.extend(nets.proj_sup.params_mut());
    }
    group
}

fn critic_group<T: Scalar>(nets: &mut Nets<T>) -> Vec<&mut Param<T>> {
    let mut group = nets.encoder.params_mut();
    group.extend(nets.critic1.params_mut());
    group.extend(nets.critic2.params_mut());
    group
}

fn gather<T: Scalar>(r: &[T], dim: usize, rows: &[usize]) -> Vec<T> {
    rows.iter().flat_map(|&i| r[i * dim..(i + 1) * dim].iter().copied()).collect()
}

fn scatter_add<T: Scalar>(dr: &mut [T], dim: usize, rows: &[usize], grad: &[T], scale: T) {
    for (k, &i) in rows.iter().enumerate() {
        for j in 0..dim {
            dr[i * dim + j] += scale * grad[k * dim + j];
        }
    }
}

fn scaled<T: Scalar>(grad: &[T], weight: f64) -> Vec<T> {
    let w = T::from_f64(weight);
    grad.iter().map(|&g| w * g).collect()
}

/// Discriminator objective `L_dis + λ1·L_unsup + λ2·L_sup-term` on one
/// view batch. Clears and then fills the gradients of the discriminator
/// group; returns the components (NaN for terms with zero weight).
///
/// `L_dis` reads the first view of every agent source and every expert view.
pub fn cail_loss<T: Scalar>(nets: &mut Nets<T>, views: &ViewBatch, cfg: &DiscConfig) -> Result<Components> {
    cfg.contrast.validate()?;
    let n = views.sources();
    if n < 2 {
        return Err(Error::BatchTooSmall(format!("need at least 2 sources, got {n}")));
    }
    let contrastive = cfg.uses_unsup() || cfg.uses_sup();
    // Row layout of the encoded batch: agent views, then expert views. Without
    // contrastive terms only the first view of each agent source is needed.
    let states: Vec<&VisualState> = if contrastive {
        views.agent_views.iter().chain(&views.expert_views).collect()
    } else {
        views.primary_agent_views().chain(&views.expert_views).collect()
    };
    let agent_rows = if contrastive { 2 * n } else { n };
    let primary: Vec<usize> = (0..n).map(|i| if contrastive { 2 * i } else { i }).collect();
    let experts: Vec<usize> = (agent_rows..agent_rows + n).collect();

    for p in disc_group(nets, cfg) {
        p.zero_grad();
    }
    let dim = nets.config.feature_dim;
    let x = nets.disc_encoder().pack(&states)?;
    let trace = nets.disc_encoder().forward_trace(&x, states.len())?;
    let r = trace.output();
    let mut dr = vec![T::zero(); r.len()];

    let disc_rows: Vec<usize> = experts.iter().chain(&primary).copied().collect();
    let dtrace = nets.disc.forward_trace(&gather(r, dim, &disc_rows), 2 * n);
    let (pe, pa) = dtrace.probs().split_at(n);
    let (dis, d_pe, d_pa) = dis_loss(pe, pa);
    let d_probs: Vec<T> = d_pe.into_iter().chain(d_pa).collect();
    let d_disc = nets.disc.backward(&dtrace, &d_probs);
    scatter_add(&mut dr, dim, &disc_rows, &d_disc, T::one());

    let mut components = Components {
        dis: dis.to_f64(),
        unsup: f64::NAN,
        csup: f64::NAN,
    };
    let tau = cfg.contrast.tau;
    if cfg.uses_unsup() {
        let rows: Vec<usize> = (0..2 * n).collect();
        let ptrace = nets.proj_unsup.forward_trace(&gather(r, dim, &rows), 2 * n);
        let proj_dim = nets.proj_unsup.out_dim();
        let loss = unsup_con_loss(ptrace.output(), n, proj_dim, tau)?;
        let weighted = scaled(&loss.grad, cfg.contrast.lambda1);
        let d = nets.proj_unsup.backward(&ptrace, &weighted);
        scatter_add(&mut dr, dim, &rows, &d, T::one());
        components.unsup = loss.value.to_f64();
    }
    if cfg.uses_sup() {
        let ptrace = nets.proj_sup.forward_trace(r, 3 * n);
        let proj_dim = nets.proj_sup.out_dim();
        let loss = match cfg.sup_term {
            SupTerm::Calibrated => c_sup_con_loss(ptrace.output(), n, proj_dim, cfg.contrast.alpha, tau)?.mixed,
            SupTerm::Plain => sup_con_loss(ptrace.output(), n, proj_dim, tau)?,
        };
        let weighted = scaled(&loss.grad, cfg.contrast.lambda2);
        let d = nets.proj_sup.backward(&ptrace, &weighted);
        let rows: Vec<usize> = (0..3 * n).collect();
        scatter_add(&mut dr, dim, &rows, &d, T::one());
        components.csup = loss.value.to_f64();
    }
    nets.disc_encoder_mut().backward(&trace, &dr);
    Ok(components)
}

/// Builds augmented views and takes one optimizer step on the
/// discriminator group.
pub fn update_discriminator<T: Scalar, R: Rng + ?Sized>(
    nets: &mut Nets<T>,
    opt: &mut Optimizers<T>,
    agent_states: &[&VisualState],
    expert_states: &[&VisualState],
    cfg: &DiscConfig,
    rng: &mut R,
) -> Result<Components> {
    let views = make_views(agent_states, expert_states, cfg.aug, rng)?;
    let components = cail_loss(nets, &views, cfg)?;
    opt.disc.step(disc_group(nets, cfg));
    Ok(components)
}

/// Rewards from the current discriminator for each state.
pub fn relabel<T: Scalar>(nets: &Nets<T>, states: &[&VisualState]) -> Result<Vec<f64>> {
    Ok(nets
        .discriminate(states)?
        .into_iter()
        .map(|p| disc_reward(p.to_f64()))
        .collect())
}

/// TD targets `y` for a batch, given the target-policy noise per element.
pub fn td_targets<T: Scalar>(
    nets: &Nets<T>,
    batch: &[&Transition],
    gamma: f64,
    target_noise: &[f64],
) -> Result<Vec<T>> {
    assert_eq!(target_noise.len(), batch.len(), "one noise draw per transition");
    let states: Vec<&VisualState> = batch.iter().map(|t| &t.v).collect();
    let next: Vec<&VisualState> = batch.iter().map(|t| &t.v_next).collect();
    let rewards = relabel(nets, &states)?;
    let r_next = nets.encoder.encode(&next)?;
    let a_next: Vec<T> = nets
        .actor
        .forward(&r_next, batch.len())
        .into_iter()
        .zip(target_noise)
        .map(|(a, &e)| T::from_f64((a.to_f64() + e).clamp(-1.0, 1.0)))
        .collect();
    let (q1, q2) = nets.target_q_values(&r_next, &a_next);
    Ok((0..batch.len())
        .map(|i| T::from_f64(td_target(rewards[i], gamma, batch[i].done, q1[i].to_f64(), q2[i].to_f64())))
        .collect())
}

/// TD loss against fixed targets `y`. Clears and fills the gradients of
/// the encoder and both critics.
pub fn critic_loss<T: Scalar>(nets: &mut Nets<T>, batch: &[&Transition], y: &[T]) -> Result<T> {
    for p in critic_group(nets) {
        p.zero_grad();
    }
    let states: Vec<&VisualState> = batch.iter().map(|t| &t.v).collect();
    let x = nets.encoder.pack(&states)?;
    let trace = nets.encoder.forward_trace(&x, batch.len())?;
    let actions: Vec<T> = batch.iter().map(|t| T::from_f64(t.action.value())).collect();
    let t1 = nets.critic1.forward_trace(trace.output(), &actions);
    let t2 = nets.critic2.forward_trace(trace.output(), &actions);
    let (loss, d1, d2) = td_loss(t1.output(), t2.output(), y);
    let (mut dr, _) = nets.critic1.backward(&t1, &d1);
    let (dr2, _) = nets.critic2.backward(&t2, &d2);
    dr.iter_mut().zip(&dr2).for_each(|(a, &b)| *a += b);
    nets.encoder.backward(&trace, &dr);
    Ok(loss)
}

pub fn update_critic<T: Scalar>(
    nets: &mut Nets<T>,
    opt: &mut Optimizers<T>,
    batch: &[&Transition],
    gamma: f64,
    target_noise: &[f64],
) -> Result<f64> {
    let y = td_targets(nets, batch, gamma, target_noise)?;
    let loss = critic_loss(nets, batch, &y)?;
    opt.critic.step(critic_group(nets));
    Ok(loss.to_f64())
}

/// `−mean min(Q1, Q2)(r, π(r) + ε)` with the representation treated as a
/// constant. Clears and fills only the actor's gradients.
pub fn actor_objective<T: Scalar>(nets: &mut Nets<T>, states: &[&VisualState], noise: &[f64]) -> Result<T> {
    assert_eq!(noise.len(), states.len(), "one noise draw per state");
    nets.actor.zero_grad();
    let r = nets.encoder.encode(states)?;
    let atrace = nets.actor.forward_trace(&r, states.len());
    let actions: Vec<T> = atrace
        .output()
        .iter()
        .zip(noise)
        .map(|(&a, &e)| a + T::from_f64(e))
        .collect();
    let t1 = nets.critic1.forward_trace(&r, &actions);
    let t2 = nets.critic2.forward_trace(&r, &actions);
    let (loss, d1, d2) = actor_loss(t1.output(), t2.output());
    let (_, da1) = nets.critic1.backward_input(&t1, &d1);
    let (_, da2) = nets.critic2.backward_input(&t2, &d2);
    let da: Vec<T> = da1.iter().zip(&da2).map(|(&a, &b)| a + b).collect();
    nets.actor.backward(&atrace, &da, false);
    Ok(loss)
}

pub fn update_actor<T: Scalar>(
    nets: &mut Nets<T>,
    opt: &mut Optimizers<T>,
    states: &[&VisualState],
    noise: &[f64],
) -> Result<f64> {
    let loss = actor_objective(nets, states, noise)?;
    opt.actor.step(nets.actor.params_mut());
    Ok(loss.to_f64())
}

pub fn update_targets<T: Scalar>(nets: &mut Nets<T>, rho: f64) -> Result<()> {
    ema_update(&mut nets.target1, &nets.critic1, rho)?;
    ema_update(&mut nets.target2, &nets.critic2, rho)
}
