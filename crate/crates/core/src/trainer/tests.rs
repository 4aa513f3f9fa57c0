use super::*;
use crate::model::NetConfig;

fn small_net() -> NetConfig {
    NetConfig {
        conv_channels: 2,
        strides: vec![4, 4],
        feature_dim: 6,
        disc_hidden: 8,
        proj_hidden: 8,
        proj_dim: 4,
        hidden: 8,
        ..NetConfig::default()
    }
}

fn small_config(algo: Algo) -> TrainConfig {
    TrainConfig {
        algo,
        total_steps: 30,
        batch_size: 4,
        warmup: 10,
        eval_every: 10,
        eval_episodes: 1,
        ckpt_every: 20,
        capacity: 100,
        bc_epochs: 1,
        net: small_net(),
        ..TrainConfig::default()
    }
}

fn demos() -> DemoSet {
    expert_demos(EnvKind::Pendulum, 1, 3).unwrap().0
}

#[test]
fn expert_demos_have_full_episodes_with_actions() {
    let (set, returns) = expert_demos(EnvKind::Pendulum, 2, 0).unwrap();
    assert_eq!(set.trajectories.len(), 2);
    for t in &set.trajectories {
        assert_eq!(t.frames.len(), 200);
        assert_eq!(t.actions.as_ref().unwrap().len(), 200);
    }
    assert!(returns.iter().all(|&r| r >= 180.0), "{returns:?}");
    let (again, _) = expert_demos(EnvKind::Pendulum, 2, 0).unwrap();
    assert_eq!(set.to_bytes().unwrap(), again.to_bytes().unwrap());
}

#[test]
fn cail_run_writes_rows_config_and_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(Algo::Cail);
    let rows = train(&cfg, &demos(), dir.path()).unwrap();
    let steps: Vec<u64> = rows.iter().map(|r| r.step).collect();
    assert_eq!(steps, vec![10, 20, 30]);
    for r in &rows {
        assert_eq!(r.alpha, cfg.alpha_at(r.step));
        assert!(r.steps_per_second.is_nan());
    }
    // Step 10 is the last warmup step, so no update has run yet.
    assert!(rows[0].l_dis.is_nan());
    assert!(rows[1].l_dis.is_finite() && rows[1].l_csup.is_finite());

    let csv = std::fs::read_to_string(dir.path().join(METRICS_FILE)).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert_eq!(csv.lines().next().unwrap(), HEADER);
    let echo = std::fs::read_to_string(dir.path().join(CONFIG_FILE)).unwrap();
    let mut back = TrainConfig::default();
    back.apply_text(&echo).unwrap();
    assert_eq!(back.echo(), echo);
    assert!(checkpoint_path(dir.path(), 20).exists());
    assert!(checkpoint_path(dir.path(), 30).exists());
    assert!(!checkpoint_path(dir.path(), 10).exists());
    assert_eq!(latest_checkpoint(dir.path()).unwrap(), checkpoint_path(dir.path(), 30));
}

#[test]
fn warmup_longer_than_run_still_emits_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig {
        total_steps: 5,
        warmup: 50,
        ..small_config(Algo::GailSe)
    };
    let rows = train(&cfg, &demos(), dir.path()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].step, 5);
    assert!(rows[0].critic_loss.is_nan() && rows[0].alpha.is_nan());
}

#[test]
fn identical_runs_write_identical_metrics() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = small_config(Algo::Cail);
    let d = demos();
    train(&cfg, &d, a.path()).unwrap();
    train(&cfg, &d, b.path()).unwrap();
    let read = |p: &Path| std::fs::read(p.join(METRICS_FILE)).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn gail_checkpoint_holds_two_encoders() {
    for (algo, count) in [(Algo::Gail, 2), (Algo::GailSe, 1), (Algo::CailNoCal, 1)] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = TrainConfig {
            total_steps: 12,
            ..small_config(algo)
        };
        let rows = train(&cfg, &demos(), dir.path()).unwrap();
        assert!(rows[1].l_unsup.is_nan() == !algo.uses_contrast());
        let ckpt: Checkpoint<f32> = Checkpoint::load(&latest_checkpoint(dir.path()).unwrap()).unwrap();
        assert_eq!(ckpt.nets.encoder_count(), count, "{algo}");
    }
}

#[test]
fn demo_env_mismatch_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig {
        env: EnvKind::Cartpole,
        ..small_config(Algo::Cail)
    };
    assert!(matches!(train(&cfg, &demos(), dir.path()), Err(Error::Config(_))));
}

#[test]
fn bc_needs_actions() {
    let dir = tempfile::tempdir().unwrap();
    let mut d = demos();
    d.trajectories[0].actions = None;
    let cfg = small_config(Algo::Bc);
    assert!(matches!(bc_train(&cfg, &d, dir.path()), Err(Error::Config(_))));
}

#[test]
fn bc_run_evaluates_after_each_interval_and_at_the_end() {
    let dir = tempfile::tempdir().unwrap();
    // 200 states in batches of 4 is 50 steps per epoch.
    let cfg = TrainConfig {
        eval_every: 20,
        ..small_config(Algo::Bc)
    };
    let rows = train(&cfg, &demos(), dir.path()).unwrap();
    let steps: Vec<u64> = rows.iter().map(|r| r.step).collect();
    assert_eq!(steps, vec![20, 40, 50]);
    assert!(rows.iter().all(|r| r.actor_loss.is_finite() && r.l_dis.is_nan()));
    assert!(checkpoint_path(dir.path(), 50).exists());
}

#[test]
fn zero_epoch_bc_evaluates_the_untrained_policy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig {
        bc_epochs: 0,
        ..small_config(Algo::Bc)
    };
    let rows = train(&cfg, &demos(), dir.path()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].step, 0);
    assert!(rows[0].actor_loss.is_nan());
}

#[test]
fn bc_loss_vanishes_on_matching_actions() {
    let d = demos();
    let mut nets: Nets<f64> = Nets::new(small_net(), false, &mut stream_rng(1, Stream::NetInit)).unwrap();
    let states: Vec<VisualState> = (0..3).map(|i| d.state(i * 7, FRAME_STACK)).collect();
    let refs: Vec<&VisualState> = states.iter().collect();
    let out: Vec<f64> = nets.policy(&refs).unwrap().iter().map(|a| a.to_f64()).collect();
    let loss = bc_loss(&mut nets, &refs, &out).unwrap();
    assert_eq!(loss, 0.0);
    assert!(nets.actor.params().iter().all(|p| p.grad.iter().all(|&g| g == 0.0)));

    let shifted: Vec<f64> = out.iter().map(|a| a + 0.5).collect();
    let loss = bc_loss(&mut nets, &refs, &shifted).unwrap();
    assert!((loss - 0.25).abs() < 1e-12);
}
