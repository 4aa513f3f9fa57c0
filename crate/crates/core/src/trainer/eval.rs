use rand::Rng;

use crate::env::{eval_reward, scripted_expert, Action, Env, EnvSpec, PhysState, VisualState};
use crate::error::Result;
use crate::model::Nets;
use crate::nn::Scalar;
use crate::rng::{sub_stream_rng, Stream};

/// Mean and population standard deviation of per-episode returns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    pub mean: f64,
    pub std: f64,
    pub episodes: usize,
}

impl EvalResult {
    pub fn from_returns(returns: &[f64]) -> Self {
        let n = returns.len() as f64;
        let mean = returns.iter().sum::<f64>() / n;
        let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
            episodes: returns.len(),
        }
    }
}

/// Ground-truth return of each episode under `policy`. Start states and
/// any policy randomness come from the evaluation stream `(seed, round)`,
/// so evaluating never advances a training stream.
pub fn rollout_returns<F>(spec: &EnvSpec, episodes: usize, seed: u64, round: u64, mut policy: F) -> Result<Vec<f64>>
where
    F: FnMut(&VisualState, &PhysState, &mut crate::rng::StreamRng) -> Result<Action>,
{
    let mut rng = sub_stream_rng(seed, Stream::Eval, round);
    let mut env = Env::new(*spec, &mut rng)?;
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let (mut obs, mut state) = env.reset(&mut rng);
        let mut total = 0.0;
        loop {
            let action = policy(&obs, &state, &mut rng)?;
            let out = env.step(action)?;
            total += eval_reward(&out.state);
            if out.terminated || out.truncated {
                break;
            }
            obs = out.obs;
            state = out.state;
        }
        returns.push(total);
    }
    Ok(returns)
}

/// Greedy evaluation of the learned policy.
pub fn evaluate<T: Scalar>(nets: &Nets<T>, spec: &EnvSpec, episodes: usize, seed: u64, round: u64) -> Result<EvalResult> {
    let returns = rollout_returns(spec, episodes, seed, round, |obs, _, _| nets.greedy_action(obs))?;
    Ok(EvalResult::from_returns(&returns))
}

/// Uniformly random actions in [-1, 1].
pub fn evaluate_random(spec: &EnvSpec, episodes: usize, seed: u64) -> Result<EvalResult> {
    let returns = rollout_returns(spec, episodes, seed, 0, |_, _, rng| Ok(Action::new(rng.random_range(-1.0..=1.0))))?;
    Ok(EvalResult::from_returns(&returns))
}

/// The scripted expert acting on the true physical state.
pub fn evaluate_expert(spec: &EnvSpec, episodes: usize, seed: u64) -> Result<EvalResult> {
    let returns = rollout_returns(spec, episodes, seed, 0, |_, state, _| Ok(scripted_expert(state)))?;
    Ok(EvalResult::from_returns(&returns))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvKind;

    #[test]
    fn population_std() {
        let r = EvalResult::from_returns(&[1.0, 3.0]);
        assert_eq!((r.mean, r.std), (2.0, 1.0));
        assert_eq!(EvalResult::from_returns(&[5.0]).std, 0.0);
    }

    #[test]
    fn expert_is_competent_and_random_is_not() {
        let spec = EnvSpec::new(EnvKind::Pendulum);
        let expert = evaluate_expert(&spec, 10, 0).unwrap();
        let random = evaluate_random(&spec, 10, 0).unwrap();
        assert!(expert.mean >= 180.0, "{expert:?}");
        assert!(random.mean < expert.mean, "{random:?}");
    }

    #[test]
    fn evaluation_is_reproducible() {
        let spec = EnvSpec::new(EnvKind::Cartpole);
        assert_eq!(evaluate_random(&spec, 3, 4).unwrap(), evaluate_random(&spec, 3, 4).unwrap());
    }
}
