//! The fast property suite behind `cail selftest`: loss oracles, closed
//! forms, gradient checks, gradient routing and the tabular discriminator
//! fixed point. Each measurement is public so integration tests can pin
//! their own tolerances on the same numbers.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::agent::{
    actor_objective, cail_loss, critic_loss, td_targets, update_actor, update_critic, update_discriminator,
    update_targets, DiscConfig, Optimizers, SupTerm,
};
use crate::data::{make_views, AugMode, Transition, ViewBatch};
use crate::env::{Action, Frame, VisualState};
use crate::error::Result;
use crate::losses::oracle::{label_batch, oracle_contrastive};
use crate::losses::{c_sup_con_loss, dis_loss, sup_con_loss, unsup_con_loss, ContrastConfig};
use crate::model::{NetConfig, Nets};
use crate::nn::gradcheck::{self, GradReport};
use crate::nn::{Module, Scalar};

pub const ORACLE_TOL: f64 = 1e-6;
pub const IDENTITY_TOL: f64 = 1e-9;
pub const GRAD_TOL: f64 = 1e-5;
pub const FIXED_POINT_TOL: f64 = 0.05;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normalized(z: &[f64], dim: usize) -> Vec<f64> {
    let mut out = z.to_vec();
    for row in out.chunks_mut(dim) {
        let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        row.iter_mut().for_each(|v| *v /= n);
    }
    out
}

fn gaussian_rows(r: &mut ChaCha8Rng, rows: usize, dim: usize) -> Vec<f64> {
    (0..rows * dim).map(|_| r.sample(StandardNormal)).collect()
}

/// Largest absolute gap between the batched contrastive losses and the
/// loop oracle over `batches` random batches (N cycles through 2, 4, 8 and
/// the embedding dim through 2, 16).
pub fn oracle_max_error(batches: usize, seed: u64) -> Result<f64> {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for trial in 0..batches {
        let n = [2, 4, 8][trial % 3];
        let dim = [2, 16][(trial / 3) % 2];
        let alpha: f64 = r.random();
        let tau = [0.1, 0.5, 1.0][trial % 3];
        let raw = gaussian_rows(&mut r, 3 * n, dim);
        let z = normalized(&raw, dim);
        let oracle = oracle_contrastive(&label_batch(&raw, n, dim), alpha, tau)?;
        let unsup = unsup_con_loss(&z[..2 * n * dim], n, dim, tau)?.value;
        let sup = sup_con_loss(&z, n, dim, tau)?.value;
        let csup = c_sup_con_loss(&z, n, dim, alpha, tau)?.mixed.value;
        for (a, b) in [(unsup, oracle.unsup), (sup, oracle.sup), (csup, oracle.c_sup)] {
            let gap = (a - b).abs();
            worst = if gap.is_nan() { f64::INFINITY } else { worst.max(gap) };
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedForms {
    /// `|L_unsup − ln(2N−1)|` on all-equal projections, worst case.
    pub unsup_err: f64,
    /// `|L_sup − ln(3N−1)|` on all-equal projections, worst case.
    pub sup_err: f64,
    /// The calibrated mixture at α = 0 and α = 1 equals its endpoint terms
    /// bit for bit.
    pub endpoints_exact: bool,
    /// Largest deviation of the mixture from the chord between its endpoints.
    pub affine_err: f64,
}

pub fn closed_forms(seed: u64) -> Result<ClosedForms> {
    let mut out = ClosedForms {
        unsup_err: 0.0,
        sup_err: 0.0,
        endpoints_exact: true,
        affine_err: 0.0,
    };
    let mut r = rng(seed);
    for n in [2usize, 4, 8] {
        for tau in [0.05, 0.1, 1.0] {
            let dim = 4;
            let row = normalized(&gaussian_rows(&mut r, 1, dim), dim);
            let z: Vec<f64> = (0..3 * n).flat_map(|_| row.iter().copied()).collect();
            let unsup = unsup_con_loss(&z[..2 * n * dim], n, dim, tau)?.value;
            let sup = sup_con_loss(&z, n, dim, tau)?.value;
            out.unsup_err = out.unsup_err.max((unsup - ((2 * n - 1) as f64).ln()).abs());
            out.sup_err = out.sup_err.max((sup - ((3 * n - 1) as f64).ln()).abs());

            let z = normalized(&gaussian_rows(&mut r, 3 * n, dim), dim);
            let at = |alpha| c_sup_con_loss(&z, n, dim, alpha, tau);
            let (zero, one) = (at(0.0)?, at(1.0)?);
            out.endpoints_exact &= zero.mixed.value == zero.paired && one.mixed.value == one.supervised;
            for alpha in [0.1, 0.3, 0.5, 0.77] {
                let chord = alpha * one.mixed.value + (1.0 - alpha) * zero.mixed.value;
                out.affine_err = out.affine_err.max((at(alpha)?.mixed.value - chord).abs());
            }
        }
    }
    Ok(out)
}

fn tiny_state(r: &mut ChaCha8Rng, config: &NetConfig) -> VisualState {
    let frames = (0..config.frame_stack)
        .map(|_| {
            let px = (0..config.frame_height * config.frame_width).map(|_| r.random::<u8>()).collect();
            Arc::new(Frame::from_pixels(config.frame_height, config.frame_width, px).expect("frame size"))
        })
        .collect();
    VisualState::from_frames(frames)
}

/// Random noise images sized for [`NetConfig::tiny`].
pub fn tiny_states(seed: u64, n: usize) -> Vec<VisualState> {
    let mut r = rng(seed);
    let config = NetConfig::tiny();
    (0..n).map(|_| tiny_state(&mut r, &config)).collect()
}

pub fn tiny_transitions(seed: u64, n: usize) -> Vec<Transition> {
    let mut r = rng(seed);
    let config = NetConfig::tiny();
    (0..n)
        .map(|i| Transition {
            v: tiny_state(&mut r, &config),
            action: Action::new(r.random_range(-1.0..1.0)),
            reward: 0.0,
            v_next: tiny_state(&mut r, &config),
            done: i % 3 == 2,
        })
        .collect()
}

/// Tiny f64 nets whose zero-initialized parameters (biases, LayerNorm
/// shifts) are jittered off zero, so no ReLU unit sits exactly on its kink
/// where central differences are meaningless. Targets copy the online
/// critics.
pub fn tiny_nets(separate: bool, seed: u64) -> Nets<f64> {
    let mut nets = Nets::new(NetConfig::tiny(), separate, &mut rng(seed)).expect("tiny config is valid");
    let mut r = rng(seed ^ 0x5eed);
    let mut values = nets.flat_values();
    for v in values.iter_mut().filter(|v| **v == 0.0) {
        *v = r.random_range(-0.2..0.2);
    }
    nets.load_flat_values(&values).expect("same layout");
    update_targets(&mut nets, 0.0).expect("same layout");
    nets
}

fn refs<T>(v: &[T]) -> Vec<&T> {
    v.iter().collect()
}

fn contrast(lambda1: f64, lambda2: f64, alpha: f64) -> ContrastConfig {
    ContrastConfig {
        tau: 0.5,
        lambda1,
        lambda2,
        alpha,
    }
}

fn disc_cfg(lambda1: f64, lambda2: f64, sup_term: SupTerm) -> DiscConfig {
    DiscConfig {
        contrast: contrast(lambda1, lambda2, 0.4),
        sup_term,
        aug: AugMode::None,
    }
}

type LossFn<'a> = dyn Fn(&[f64]) -> Result<(f64, Vec<f64>)> + 'a;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub objective: &'static str,
    /// Parameters (or embedding entries) whose gradient was compared.
    pub params: usize,
    pub report: GradReport,
}

fn check_nets(
    objective: &'static str,
    nets: &Nets<f64>,
    analytic: &[f64],
    mut f: impl FnMut(&mut Nets<f64>) -> f64,
) -> GradCheck {
    let mut probe = nets.clone();
    let report = gradcheck::check(&nets.flat_values(), analytic, |p| {
        probe.load_flat_values(p).expect("same layout");
        f(&mut probe)
    });
    let params = analytic.iter().filter(|g| **g != 0.0).count();
    GradCheck {
        objective,
        params,
        report,
    }
}

/// Analytic gradients of every training objective against central finite
/// differences, in f64 on tiny networks.
pub fn gradient_checks(seed: u64) -> Result<Vec<GradCheck>> {
    let mut out = Vec::new();
    let mut r = rng(seed);

    let (n, dim, tau, alpha) = (3, 4, 0.5, 0.35);
    let z = normalized(&gaussian_rows(&mut r, 3 * n, dim), dim);
    let losses: [(&'static str, &LossFn); 3] = [
        ("unsup_con_loss", &|z| {
            let l = unsup_con_loss(&z[..2 * n * dim], n, dim, tau)?;
            let mut grad = l.grad;
            grad.resize(z.len(), 0.0);
            Ok((l.value, grad))
        }),
        ("sup_con_loss", &|z| sup_con_loss(z, n, dim, tau).map(|l| (l.value, l.grad))),
        ("c_sup_con_loss", &|z| {
            c_sup_con_loss(z, n, dim, alpha, tau).map(|l| (l.mixed.value, l.mixed.grad))
        }),
    ];
    for (objective, f) in losses {
        let (_, grad) = f(&z)?;
        let report = gradcheck::check(&z, &grad, |p| f(p).map(|l| l.0).unwrap_or(f64::NAN));
        out.push(GradCheck {
            objective,
            params: z.len(),
            report,
        });
    }

    let probs: Vec<f64> = (0..6).map(|_| r.random_range(0.05..0.95)).collect();
    let (_, de, da) = dis_loss(&probs[..3], &probs[3..]);
    let analytic: Vec<f64> = de.into_iter().chain(da).collect();
    out.push(GradCheck {
        objective: "dis_loss",
        params: probs.len(),
        report: gradcheck::check(&probs, &analytic, |p| dis_loss(&p[..3], &p[3..]).0),
    });

    let (agent, expert) = (tiny_states(seed + 1, 2), tiny_states(seed + 2, 2));
    let views = make_views(&refs(&agent), &refs(&expert), AugMode::None, &mut rng(seed))?;
    for (objective, cfg) in [
        ("discriminator objective (calibrated)", disc_cfg(1.0, 1.0, SupTerm::Calibrated)),
        ("discriminator objective (plain)", disc_cfg(0.6, 1.4, SupTerm::Plain)),
        ("discriminator objective (gail)", disc_cfg(0.0, 0.0, SupTerm::Calibrated)),
    ] {
        let mut nets = tiny_nets(false, seed + 3);
        nets.zero_grad();
        cail_loss(&mut nets, &views, &cfg)?;
        let (l1, l2) = (cfg.contrast.lambda1, cfg.contrast.lambda2);
        let analytic = nets.flat_grads();
        out.push(check_nets(objective, &nets, &analytic, |n| {
            cail_loss(n, &views, &cfg).map(|c| c.total(l1, l2)).unwrap_or(f64::NAN)
        }));
    }

    let mut nets = tiny_nets(false, seed + 4);
    let batch = tiny_transitions(seed + 5, 3);
    let y = td_targets(&nets, &refs(&batch), 0.99, &[0.05, -0.1, 0.2])?;
    nets.zero_grad();
    critic_loss(&mut nets, &refs(&batch), &y)?;
    let analytic = nets.flat_grads();
    out.push(check_nets("td loss", &nets, &analytic, |n| {
        critic_loss(n, &refs(&batch), &y).unwrap_or(f64::NAN)
    }));

    // The actor objective also depends on the encoder and critics, but only
    // the actor receives its gradient, so the comparison covers the actor.
    let mut nets = tiny_nets(false, seed + 6);
    let s = tiny_states(seed + 7, 3);
    let noise = [0.1, -0.05, 0.0];
    nets.zero_grad();
    actor_objective(&mut nets, &refs(&s), &noise)?;
    let mut analytic = Vec::new();
    for p in nets.actor.params() {
        analytic.extend_from_slice(&p.grad);
    }
    let mut probe = nets.clone();
    let report = gradcheck::check(&nets.actor.flat_values(), &analytic, |p| {
        probe.actor.load_flat_values(p);
        actor_objective(&mut probe, &refs(&s), &noise).unwrap_or(f64::NAN)
    });
    out.push(GradCheck {
        objective: "actor objective",
        params: analytic.len(),
        report,
    });
    Ok(out)
}

fn touched(before: &Nets<f64>, after: &Nets<f64>) -> BTreeSet<&'static str> {
    before
        .fingerprints()
        .into_iter()
        .zip(after.fingerprints())
        .filter(|(a, b)| a.1 != b.1)
        .map(|(a, _)| a.0)
        .collect()
}

fn expect_touched(
    out: &mut Vec<String>,
    what: &str,
    before: &Nets<f64>,
    after: &Nets<f64>,
    expected: &[&'static str],
) {
    let got = touched(before, after);
    let want: BTreeSet<&'static str> = expected.iter().copied().collect();
    if got != want {
        out.push(format!("{what}: touched {got:?}, expected {want:?}"));
    }
}

/// Checks which parameter groups each update changes, by hashing every
/// network before and after. Returns one message per violation.
pub fn routing_violations(seed: u64) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let (agent, expert) = (tiny_states(seed, 4), tiny_states(seed + 1, 4));
    let batch = tiny_transitions(seed + 2, 4);
    let s: Vec<&VisualState> = batch.iter().map(|t| &t.v).collect();
    let noise = [0.1, -0.2, 0.0, 0.3];

    for (label, separate, cfg, disc_set) in [
        (
            "cail",
            false,
            disc_cfg(1.0, 1.0, SupTerm::Calibrated),
            &["encoder", "disc", "proj_unsup", "proj_sup"][..],
        ),
        ("gail-se", false, disc_cfg(0.0, 0.0, SupTerm::Calibrated), &["encoder", "disc"][..]),
        ("gail", true, disc_cfg(0.0, 0.0, SupTerm::Calibrated), &["disc_encoder", "disc"][..]),
    ] {
        let mut nets = tiny_nets(separate, seed + 3);
        let mut opt = Optimizers::new(1e-3);

        let before = nets.clone();
        update_discriminator(&mut nets, &mut opt, &refs(&agent), &refs(&expert), &cfg, &mut rng(seed))?;
        expect_touched(&mut out, &format!("{label} update_discriminator"), &before, &nets, disc_set);

        let before = nets.clone();
        update_critic(&mut nets, &mut opt, &refs(&batch), 0.99, &noise)?;
        expect_touched(
            &mut out,
            &format!("{label} update_critic"),
            &before,
            &nets,
            &["encoder", "critic1", "critic2"],
        );

        let before = nets.clone();
        update_actor(&mut nets, &mut opt, &s, &noise)?;
        expect_touched(&mut out, &format!("{label} update_actor"), &before, &nets, &["actor"]);
        let same_encoder = before.encoder.flat_values().iter().map(|v| v.to_bits()).eq(nets
            .encoder
            .flat_values()
            .iter()
            .map(|v| v.to_bits()));
        if !same_encoder {
            out.push(format!("{label} update_actor: encoder parameters changed"));
        }

        let before = nets.clone();
        update_targets(&mut nets, 0.99)?;
        expect_touched(&mut out, &format!("{label} update_targets"), &before, &nets, &["target1", "target2"]);
    }
    Ok(out)
}

/// The discriminator objective recomposed from independent pieces: the
/// discriminator head and `dis_loss` on the encoded views, plus the loop
/// oracle on the projections, weighted by `λ1` and `λ2`.
fn recomposed(nets: &Nets<f64>, views: &ViewBatch, cfg: &DiscConfig) -> Result<f64> {
    let n = views.sources();
    let all: Vec<&VisualState> = views.agent_views.iter().chain(&views.expert_views).collect();
    let r = nets.disc_encoder().encode(&all)?;
    let dim = nets.config.feature_dim;
    let p = nets.disc.probs(&r, 3 * n);
    let primary: Vec<f64> = (0..n).map(|i| p[2 * i]).collect();
    let (dis, _, _) = dis_loss(&p[2 * n..], &primary);

    let zu = nets.proj_unsup.forward(&r[..2 * n * dim], 2 * n);
    let unsup = oracle_contrastive(&label_batch(&zu, n, nets.proj_unsup.out_dim()), 0.0, cfg.contrast.tau)?.unsup;
    let zs = nets.proj_sup.forward(&r, 3 * n);
    let sup = oracle_contrastive(&label_batch(&zs, n, nets.proj_sup.out_dim()), cfg.contrast.alpha, cfg.contrast.tau)?;
    let sup_term = match cfg.sup_term {
        SupTerm::Calibrated => sup.c_sup,
        SupTerm::Plain => sup.sup,
    };
    Ok(dis + cfg.contrast.lambda1 * unsup + cfg.contrast.lambda2 * sup_term)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    /// `|total(λ1, λ2) − recomposed objective|`, worst over the settings.
    pub value_err: f64,
    /// Worst finite-difference check of the analytic gradient against the
    /// recomposed objective.
    pub grad_rel_err: f64,
}

/// `cail_loss` against the objective rebuilt from the oracle, for several
/// asymmetric weightings so that any mix-up in the λ wiring shows.
pub fn cail_loss_identity(seed: u64) -> Result<IdentityCheck> {
    let (agent, expert) = (tiny_states(seed, 3), tiny_states(seed + 1, 3));
    let views = make_views(&refs(&agent), &refs(&expert), AugMode::None, &mut rng(seed))?;
    let mut out = IdentityCheck {
        value_err: 0.0,
        grad_rel_err: 0.0,
    };
    for (l1, l2, sup_term) in [
        (0.7, 1.3, SupTerm::Calibrated),
        (2.0, 0.25, SupTerm::Calibrated),
        (0.5, 1.5, SupTerm::Plain),
    ] {
        let cfg = disc_cfg(l1, l2, sup_term);
        let mut nets = tiny_nets(false, seed + 2);
        nets.zero_grad();
        let c = cail_loss(&mut nets, &views, &cfg)?;
        let reference = recomposed(&nets, &views, &cfg)?;
        let gap = (c.total(l1, l2) - reference).abs();
        out.value_err = out.value_err.max(if gap.is_nan() { f64::INFINITY } else { gap });
        let analytic = nets.flat_grads();
        let check = check_nets("cail_loss", &nets, &analytic, |n| {
            recomposed(n, &views, &cfg).unwrap_or(f64::NAN)
        });
        out.grad_rel_err = out.grad_rel_err.max(check.report.max_rel_err);
    }
    Ok(out)
}

/// Trains a per-state sigmoid discriminator `D(s) = σ(w_s)` with `dis_loss`
/// on minibatches drawn from the two occupancy distributions until it
/// settles, then returns `D` averaged over the last half of training.
pub fn tabular_fixed_point(rho_expert: &[f64], rho_agent: &[f64], seed: u64) -> Vec<f64> {
    assert_eq!(rho_expert.len(), rho_agent.len(), "state counts");
    let states = rho_expert.len();
    let draw = |r: &mut ChaCha8Rng, rho: &[f64]| {
        let u: f64 = r.random();
        let mut acc = 0.0;
        for (s, &p) in rho.iter().enumerate() {
            acc += p;
            if u < acc {
                return s;
            }
        }
        states - 1
    };
    let (steps, batch, lr) = (4000, 256, 0.5);
    let mut r = rng(seed);
    let mut w = vec![0.0f64; states];
    let mut mean = vec![0.0f64; states];
    for step in 0..steps {
        let es: Vec<usize> = (0..batch).map(|_| draw(&mut r, rho_expert)).collect();
        let ag: Vec<usize> = (0..batch).map(|_| draw(&mut r, rho_agent)).collect();
        let d: Vec<f64> = w.iter().map(|&x| x.sigmoid()).collect();
        let pe: Vec<f64> = es.iter().map(|&s| d[s]).collect();
        let pa: Vec<f64> = ag.iter().map(|&s| d[s]).collect();
        let (_, de, da) = dis_loss(&pe, &pa);
        let mut grad = vec![0.0; states];
        for (&s, g) in es.iter().zip(de).chain(ag.iter().zip(da)) {
            grad[s] += g * d[s] * (1.0 - d[s]);
        }
        for (x, g) in w.iter_mut().zip(grad) {
            *x -= lr * g;
        }
        if step >= steps / 2 {
            for (m, &x) in mean.iter_mut().zip(&w) {
                *m += x.sigmoid() / (steps - steps / 2) as f64;
            }
        }
    }
    mean
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, result: Result<(bool, String)>) -> Outcome {
    match result {
        Ok((passed, detail)) => Outcome { name, passed, detail },
        Err(e) => Outcome {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// Runs every property. Fast enough for a pre-flight check.
pub fn run() -> Vec<Outcome> {
    vec![
        outcome(
            "contrastive oracle equivalence",
            oracle_max_error(50, 1).map(|e| (e <= ORACLE_TOL, format!("max abs error {e:.3e}"))),
        ),
        outcome(
            "closed-form identities",
            closed_forms(2).map(|c| {
                let ok = c.unsup_err <= IDENTITY_TOL
                    && c.sup_err <= IDENTITY_TOL
                    && c.endpoints_exact
                    && c.affine_err <= IDENTITY_TOL;
                (ok, format!("{c:?}"))
            }),
        ),
        outcome(
            "gradient checks",
            gradient_checks(3).map(|checks| {
                let worst = checks
                    .iter()
                    .max_by(|a, b| a.report.max_rel_err.total_cmp(&b.report.max_rel_err))
                    .expect("non-empty");
                let ok = checks.iter().all(|c| c.report.max_rel_err <= GRAD_TOL);
                (ok, format!("worst {} rel err {:.3e}", worst.objective, worst.report.max_rel_err))
            }),
        ),
        outcome(
            "gradient routing",
            routing_violations(4).map(|v| (v.is_empty(), if v.is_empty() { "ok".into() } else { v.join("; ") })),
        ),
        outcome(
            "cail_loss identity",
            cail_loss_identity(5).map(|c| {
                let ok = c.value_err <= IDENTITY_TOL && c.grad_rel_err <= GRAD_TOL;
                (ok, format!("{c:?}"))
            }),
        ),
        outcome("tabular discriminator fixed point", {
            let d = tabular_fixed_point(&[0.8, 0.2], &[0.2, 0.8], 6);
            let ok = (d[0] - 0.8).abs() <= FIXED_POINT_TOL && (d[1] - 0.2).abs() <= FIXED_POINT_TOL;
            Ok((ok, format!("D = [{:.4}, {:.4}]", d[0], d[1])))
        }),
    ]
}
