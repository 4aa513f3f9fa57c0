//! The training loop, evaluation, the behavioral-cloning baseline and
//! expert demonstration generation.

pub mod config;
pub mod eval;
pub mod metrics;

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;

pub use config::{alpha_schedule, Algo, TrainConfig};
pub use eval::{evaluate, evaluate_expert, evaluate_random, EvalResult};
pub use metrics::{format_g6, MetricsRow, MetricsWriter, HEADER};

use crate::agent::{update_actor, update_critic, update_discriminator, update_targets, Optimizers};
use crate::data::{augment, DemoSet, ReplayBuffer, Trajectory, Transition};
use crate::env::{eval_reward, scripted_expert, Action, Env, EnvKind, EnvSpec, VisualState, FRAME_STACK};
use crate::error::{Error, Result};
use crate::model::{Checkpoint, Nets};
use crate::nn::{Adam, Module, Scalar};
use crate::rng::{stream_rng, Stream};

pub const METRICS_FILE: &str = "metrics.csv";
pub const CONFIG_FILE: &str = "config";

pub fn checkpoint_path(run_dir: &Path, step: u64) -> PathBuf {
    run_dir.join(format!("ckpt_{step}"))
}

/// The checkpoint with the highest step in `run_dir`.
pub fn latest_checkpoint(run_dir: &Path) -> Result<PathBuf> {
    let entries = std::fs::read_dir(run_dir)
        .map_err(|e| Error::Config(format!("cannot read run directory {}: {e}", run_dir.display())))?;
    entries
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            let step: u64 = name.strip_prefix("ckpt_")?.parse().ok()?;
            Some((step, e.path()))
        })
        .max_by_key(|(step, _)| *step)
        .map(|(_, p)| p)
        .ok_or_else(|| Error::Config(format!("no checkpoint in {}", run_dir.display())))
}

/// Rolls out the scripted expert. Returns the demonstrations (frames and
/// actions) and each episode's ground-truth return.
pub fn expert_demos(kind: EnvKind, episodes: usize, seed: u64) -> Result<(DemoSet, Vec<f64>)> {
    let spec = EnvSpec::new(kind);
    let mut rng = stream_rng(seed, Stream::EnvInit);
    let mut env = Env::new(spec, &mut rng)?;
    let mut demos = DemoSet::new(kind.name());
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let (obs, mut state) = env.reset(&mut rng);
        let mut frames = vec![Arc::new(obs.latest().clone())];
        let mut actions = Vec::new();
        let mut total = 0.0;
        loop {
            let action = scripted_expert(&state);
            actions.push(action.value() as f32);
            let out = env.step(action)?;
            total += eval_reward(&out.state);
            if out.terminated || out.truncated {
                break;
            }
            frames.push(Arc::new(out.obs.latest().clone()));
            state = out.state;
        }
        demos.trajectories.push(Trajectory {
            frames,
            actions: Some(actions),
        });
        returns.push(total);
    }
    Ok((demos, returns))
}

fn check_demos(cfg: &TrainConfig, demos: &DemoSet) -> Result<()> {
    if demos.env != cfg.env.name() {
        return Err(Error::Config(format!(
            "demos are for '{}' but the run is on '{}'",
            demos.env,
            cfg.env.name()
        )));
    }
    if demos.num_states() == 0 {
        return Err(Error::Config("demo set is empty".into()));
    }
    let frame = &demos.trajectories[0].frames[0];
    if (frame.height(), frame.width()) != (cfg.net.frame_height, cfg.net.frame_width) {
        return Err(Error::Config("demo frame size does not match the network input".into()));
    }
    Ok(())
}

fn prepare_run_dir(cfg: &TrainConfig, run_dir: &Path) -> Result<MetricsWriter> {
    std::fs::create_dir_all(run_dir)
        .map_err(|e| Error::Config(format!("cannot create run directory {}: {e}", run_dir.display())))?;
    let config_path = run_dir.join(CONFIG_FILE);
    std::fs::write(&config_path, cfg.echo()).map_err(|e| Error::io(&config_path, e))?;
    MetricsWriter::create(&run_dir.join(METRICS_FILE))
}

fn save_checkpoint<T: Scalar>(nets: &Nets<T>, cfg: &TrainConfig, run_dir: &Path, step: u64) -> Result<()> {
    Checkpoint {
        env: cfg.env.name().to_string(),
        step,
        nets: nets.clone(),
    }
    .save(&checkpoint_path(run_dir, step))
}

/// Running means of the logged losses between evaluations.
#[derive(Default)]
struct LossTally {
    sums: [f64; 5],
    count: u64,
}

impl LossTally {
    fn add(&mut self, values: [f64; 5]) {
        for (s, v) in self.sums.iter_mut().zip(values) {
            *s += v;
        }
        self.count += 1;
    }

    fn take(&mut self) -> [f64; 5] {
        let out = if self.count == 0 {
            [f64::NAN; 5]
        } else {
            self.sums.map(|s| s / self.count as f64)
        };
        *self = Self::default();
        out
    }
}

/// Adversarial imitation training (every algorithm except BC). Writes
/// `config`, `metrics.csv` and checkpoints into `run_dir`.
pub fn train(cfg: &TrainConfig, demos: &DemoSet, run_dir: &Path) -> Result<Vec<MetricsRow>> {
    cfg.validate()?;
    if cfg.algo == Algo::Bc {
        return bc_train(cfg, demos, run_dir);
    }
    check_demos(cfg, demos)?;
    let spec = EnvSpec::new(cfg.env);
    let mut writer = prepare_run_dir(cfg, run_dir)?;

    let seed = cfg.seed;
    let mut env_rng = stream_rng(seed, Stream::EnvInit);
    let mut explore_rng = stream_rng(seed, Stream::ActionNoise);
    let mut replay_rng = stream_rng(seed, Stream::ReplaySample);
    let mut expert_rng = stream_rng(seed, Stream::ExpertSample);
    let mut aug_rng = stream_rng(seed, Stream::Augment);
    let mut noise_rng = stream_rng(seed, Stream::UpdateNoise);

    let mut nets: Nets<f32> = Nets::new(
        cfg.net.clone(),
        cfg.algo.separate_disc_encoder(),
        &mut stream_rng(seed, Stream::NetInit),
    )?;
    let mut opt = Optimizers::new(cfg.lr);
    let mut env = Env::new(spec, &mut env_rng)?;
    let (mut obs, _) = env.reset(&mut env_rng);
    let mut buffer = ReplayBuffer::new(cfg.capacity, obs.shape())?;
    let noise = cfg.noise();
    let n = cfg.batch_size;

    let mut rows = Vec::new();
    let mut tally = LossTally::default();
    let mut clock = Instant::now();
    let mut last_eval_step = 0;
    let mut eval_round = 0;
    for step in 1..=cfg.total_steps {
        let action = if step <= cfg.warmup {
            Action::new(explore_rng.random_range(-1.0..=1.0))
        } else {
            nets.act(&obs, cfg.sigma, cfg.noise_clip, true, &mut explore_rng)?
        };
        let out = env.step(action)?;
        let ended = out.terminated || out.truncated;
        buffer.push(Transition {
            v: obs,
            action,
            reward: 0.0,
            v_next: out.obs.clone(),
            done: out.terminated,
        })?;
        obs = if ended { env.reset(&mut env_rng).0 } else { out.obs };

        if step > cfg.warmup {
            let batch = buffer.sample(n, &mut replay_rng)?;
            let agent: Vec<&VisualState> = batch.iter().map(|t| &t.v).collect();
            let expert = demos.sample_states(n, FRAME_STACK, &mut expert_rng);
            let expert_refs: Vec<&VisualState> = expert.iter().collect();
            let disc_cfg = cfg.disc_config(step);
            let c = update_discriminator(&mut nets, &mut opt, &agent, &expert_refs, &disc_cfg, &mut aug_rng)?;
            let target_noise = noise.sample(n, &mut noise_rng);
            let critic = update_critic(&mut nets, &mut opt, &batch, cfg.gamma, &target_noise)?;
            let policy_noise = noise.sample(n, &mut noise_rng);
            let actor = update_actor(&mut nets, &mut opt, &agent, &policy_noise)?;
            update_targets(&mut nets, cfg.ema)?;
            tally.add([c.dis, c.unsup, c.csup, critic, actor]);
        }

        if step.is_multiple_of(cfg.eval_every) || step == cfg.total_steps {
            let sps = if cfg.throughput {
                (step - last_eval_step) as f64 / clock.elapsed().as_secs_f64()
            } else {
                f64::NAN
            };
            let result = evaluate(&nets, &spec, cfg.eval_episodes, seed, eval_round)?;
            eval_round += 1;
            let [l_dis, l_unsup, l_csup, critic_loss, actor_loss] = tally.take();
            let row = MetricsRow {
                step,
                eval_mean_return: result.mean,
                eval_std_return: result.std,
                l_dis,
                l_unsup,
                l_csup,
                critic_loss,
                actor_loss,
                alpha: if cfg.algo == Algo::Cail { cfg.alpha_at(step) } else { f64::NAN },
                steps_per_second: sps,
            };
            log::info!(
                "{} step {step}: return {:.2} ± {:.2}",
                cfg.algo,
                result.mean,
                result.std
            );
            writer.write(&row)?;
            rows.push(row);
            if step.is_multiple_of(cfg.ckpt_every) || step == cfg.total_steps {
                save_checkpoint(&nets, cfg, run_dir, step)?;
            }
            last_eval_step = step;
            clock = Instant::now();
        }
    }
    Ok(rows)
}

/// Mean squared error between `π(f(v))` and the expert actions. Clears and
/// fills the encoder and actor gradients.
pub fn bc_loss<T: Scalar>(nets: &mut Nets<T>, states: &[&VisualState], targets: &[f64]) -> Result<T> {
    nets.encoder.zero_grad();
    nets.actor.zero_grad();
    let b = states.len();
    let x = nets.encoder.pack(states)?;
    let trace = nets.encoder.forward_trace(&x, b)?;
    let atrace = nets.actor.forward_trace(trace.output(), b);
    let scale = T::from_f64(1.0 / b as f64);
    let mut loss = T::zero();
    let mut d = Vec::with_capacity(b);
    for (&a, &t) in atrace.output().iter().zip(targets) {
        let diff = a - T::from_f64(t);
        loss += diff * diff * scale;
        d.push(T::from_f64(2.0) * diff * scale);
    }
    let dr = nets.actor.backward(&atrace, &d, true).expect("requested");
    nets.encoder.backward(&trace, &dr);
    Ok(loss)
}

/// Behavioral cloning: `bc_epochs` passes over shuffled demo minibatches.
/// Evaluates every `eval_every` gradient steps and after the last one.
pub fn bc_train(cfg: &TrainConfig, demos: &DemoSet, run_dir: &Path) -> Result<Vec<MetricsRow>> {
    cfg.validate()?;
    check_demos(cfg, demos)?;
    if !demos.has_actions() {
        return Err(Error::Config("behavioral cloning needs demos with actions".into()));
    }
    let spec = EnvSpec::new(cfg.env);
    let mut writer = prepare_run_dir(cfg, run_dir)?;
    let mut nets: Nets<f32> = Nets::new(cfg.net.clone(), false, &mut stream_rng(cfg.seed, Stream::NetInit))?;
    let mut opt: Adam<f32> = Adam::new(cfg.lr);
    let mut shuffle_rng = stream_rng(cfg.seed, Stream::DemoShuffle);
    let mut aug_rng = stream_rng(cfg.seed, Stream::Augment);
    let aug = cfg.aug_mode();

    let total = demos.num_states();
    let steps_per_epoch = total.div_ceil(cfg.batch_size) as u64;
    let last_step = cfg.bc_epochs * steps_per_epoch;
    let mut order: Vec<usize> = (0..total).collect();
    let mut rows = Vec::new();
    let mut tally = LossTally::default();
    let mut step = 0u64;
    let mut eval_round = 0;
    let mut clock = Instant::now();
    let mut last_eval_step = 0;
    let mut emit = |step: u64, nets: &Nets<f32>, tally: &mut LossTally, clock: &mut Instant| -> Result<()> {
        let sps = if cfg.throughput {
            (step - last_eval_step) as f64 / clock.elapsed().as_secs_f64()
        } else {
            f64::NAN
        };
        let result = evaluate(nets, &spec, cfg.eval_episodes, cfg.seed, eval_round)?;
        eval_round += 1;
        let [_, _, _, _, bc] = tally.take();
        let row = MetricsRow {
            step,
            eval_mean_return: result.mean,
            eval_std_return: result.std,
            l_dis: f64::NAN,
            l_unsup: f64::NAN,
            l_csup: f64::NAN,
            critic_loss: f64::NAN,
            actor_loss: bc,
            alpha: f64::NAN,
            steps_per_second: sps,
        };
        log::info!("bc step {step}: return {:.2} ± {:.2}", result.mean, result.std);
        writer.write(&row)?;
        rows.push(row);
        last_eval_step = step;
        *clock = Instant::now();
        Ok(())
    };
    for _ in 0..cfg.bc_epochs {
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(cfg.batch_size) {
            let states: Vec<VisualState> = chunk
                .iter()
                .map(|&i| augment(&demos.state(i, FRAME_STACK), aug, &mut aug_rng))
                .collect();
            let refs: Vec<&VisualState> = states.iter().collect();
            let targets: Vec<f64> = chunk.iter().map(|&i| demos.action(i).expect("checked") as f64).collect();
            let loss = bc_loss(&mut nets, &refs, &targets)?;
            let mut group = nets.encoder.params_mut();
            group.extend(nets.actor.params_mut());
            opt.step(group);
            step += 1;
            tally.add([0.0, 0.0, 0.0, 0.0, loss.to_f64()]);
            if step.is_multiple_of(cfg.eval_every) && step != last_step {
                emit(step, &nets, &mut tally, &mut clock)?;
            }
        }
    }
    emit(step, &nets, &mut tally, &mut clock)?;
    save_checkpoint(&nets, cfg, run_dir, step)?;
    Ok(rows)
}

#[cfg(test)]
mod tests;
