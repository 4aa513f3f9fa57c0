//! Pixel-rendered control environments with scripted experts.
//!
//! Two built-in tasks: a pendulum swing-up (never terminates early) and a
//! cart-pole balance (terminates when the pole or cart leaves its limits).
//! The ground-truth reward is exposed for evaluation only.

pub mod cartpole;
pub mod obs;
pub mod pendulum;
pub mod render;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
pub use obs::{batch_floats, Frame, VisualState, FRAME_SIZE, FRAME_STACK};
pub use render::render;

use cartpole::CartState;

/// Half-width of the uniform start-state perturbation.
pub const START_NOISE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvKind {
    Pendulum,
    Cartpole,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Pendulum => "pendulum",
            EnvKind::Cartpole => "cartpole",
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pendulum" => Ok(EnvKind::Pendulum),
            "cartpole" => Ok(EnvKind::Cartpole),
            other => Err(Error::Config(format!(
                "unknown env `{other}` (expected pendulum or cartpole)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Physics {
    Pendulum {
        gravity: f64,
        mass: f64,
        length: f64,
        max_torque: f64,
        max_speed: f64,
    },
    Cartpole {
        gravity: f64,
        cart_mass: f64,
        pole_mass: f64,
        half_length: f64,
        force_mag: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvSpec {
    pub kind: EnvKind,
    pub dt: f64,
    pub action_repeat: usize,
    pub max_agent_steps: usize,
    pub physics: Physics,
}

impl EnvSpec {
    pub fn new(kind: EnvKind) -> Self {
        match kind {
            EnvKind::Pendulum => Self {
                kind,
                dt: pendulum::DT,
                action_repeat: 2,
                max_agent_steps: 200,
                physics: Physics::Pendulum {
                    gravity: pendulum::GRAVITY,
                    mass: pendulum::MASS,
                    length: pendulum::LENGTH,
                    max_torque: pendulum::MAX_TORQUE,
                    max_speed: pendulum::MAX_SPEED,
                },
            },
            EnvKind::Cartpole => Self {
                kind,
                dt: cartpole::DT,
                action_repeat: 2,
                max_agent_steps: 200,
                physics: Physics::Cartpole {
                    gravity: cartpole::GRAVITY,
                    cart_mass: cartpole::CART_MASS,
                    pole_mass: cartpole::POLE_MASS,
                    half_length: cartpole::HALF_LENGTH,
                    force_mag: cartpole::FORCE_MAG,
                },
            },
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        name.parse().map(Self::new)
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn validate(&self) -> Result<()> {
        if self.action_repeat == 0 {
            return Err(Error::Config("action_repeat must be >= 1".into()));
        }
        if self.max_agent_steps == 0 {
            return Err(Error::Config("max_agent_steps must be >= 1".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        Ok(())
    }
}

/// Physical state. Angles are measured from upright.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhysState {
    Pendulum { theta: f64, theta_dot: f64 },
    Cartpole { x: f64, x_dot: f64, theta: f64, theta_dot: f64 },
}

impl PhysState {
    pub fn is_finite(&self) -> bool {
        match *self {
            PhysState::Pendulum { theta, theta_dot } => theta.is_finite() && theta_dot.is_finite(),
            PhysState::Cartpole {
                x,
                x_dot,
                theta,
                theta_dot,
            } => x.is_finite() && x_dot.is_finite() && theta.is_finite() && theta_dot.is_finite(),
        }
    }

    pub fn is_terminal(&self) -> bool {
        match *self {
            PhysState::Pendulum { .. } => false,
            PhysState::Cartpole { .. } => cartpole::is_terminal(&self.cart()),
        }
    }

    fn cart(&self) -> CartState {
        match *self {
            PhysState::Cartpole {
                x,
                x_dot,
                theta,
                theta_dot,
            } => CartState {
                x,
                x_dot,
                theta,
                theta_dot,
            },
            PhysState::Pendulum { .. } => unreachable!("not a cart-pole state"),
        }
    }

    fn from_cart(s: CartState) -> Self {
        PhysState::Cartpole {
            x: s.x,
            x_dot: s.x_dot,
            theta: s.theta,
            theta_dot: s.theta_dot,
        }
    }
}

/// Normalized command in [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Action(f64);

impl Action {
    /// Clamps into [-1, 1]. NaN maps to 0.
    pub fn new(u: f64) -> Self {
        if u.is_nan() {
            Action(0.0)
        } else {
            Action(u.clamp(-1.0, 1.0))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

pub(crate) fn clip_unit(u: f64) -> f64 {
    u.clamp(-1.0, 1.0)
}

/// The start state for a given perturbation `eta`.
pub fn initial_state(kind: EnvKind, eta: f64) -> PhysState {
    match kind {
        EnvKind::Pendulum => PhysState::Pendulum {
            theta: pendulum::wrap_angle(std::f64::consts::PI + eta),
            theta_dot: 0.0,
        },
        EnvKind::Cartpole => PhysState::Cartpole {
            x: 0.0,
            x_dot: 0.0,
            theta: eta,
            theta_dot: 0.0,
        },
    }
}

/// Applies `action_repeat` inner Euler steps.
pub fn integrate(spec: &EnvSpec, state: &PhysState, action: Action) -> Result<PhysState> {
    let u = action.value();
    let mut s = *state;
    for _ in 0..spec.action_repeat {
        s = match s {
            PhysState::Pendulum { theta, theta_dot } => {
                let (theta, theta_dot) = pendulum::euler_step(theta, theta_dot, u, spec.dt);
                PhysState::Pendulum { theta, theta_dot }
            }
            PhysState::Cartpole { .. } => {
                PhysState::from_cart(cartpole::euler_step(s.cart(), u, spec.dt))
            }
        };
    }
    if !s.is_finite() {
        return Err(Error::IntegrationFault(format!("{s:?}")));
    }
    Ok(s)
}

pub fn scripted_expert(state: &PhysState) -> Action {
    match *state {
        PhysState::Pendulum { theta, theta_dot } => Action::new(pendulum::expert(theta, theta_dot)),
        PhysState::Cartpole { .. } => Action::new(cartpole::expert(&state.cart())),
    }
}

/// Ground-truth per-step reward, for metrics only.
pub fn eval_reward(state: &PhysState) -> f64 {
    match *state {
        PhysState::Pendulum { theta, .. } => pendulum::eval_reward(theta),
        PhysState::Cartpole { .. } => cartpole::eval_reward(&state.cart()),
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: PhysState,
    pub obs: VisualState,
    /// True terminal state (d = 1); never set by the time limit.
    pub terminated: bool,
    /// The step budget ran out on this step.
    pub truncated: bool,
}

/// One environment instance: physical state, frame stack and step counter.
#[derive(Debug, Clone)]
pub struct Env {
    spec: EnvSpec,
    state: PhysState,
    obs: VisualState,
    steps: usize,
    done: bool,
}

impl Env {
    /// Creates an environment and resets it with a perturbation drawn from `rng`.
    pub fn new<R: Rng + ?Sized>(spec: EnvSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let state = initial_state(spec.kind, 0.0);
        let mut env = Self {
            spec,
            obs: VisualState::replicated(render(&state), FRAME_STACK),
            state,
            steps: 0,
            done: false,
        };
        env.reset(rng);
        Ok(env)
    }

    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> (VisualState, PhysState) {
        let eta = rng.random_range(-START_NOISE..START_NOISE);
        self.reset_to(initial_state(self.spec.kind, eta))
    }

    pub fn reset_to(&mut self, state: PhysState) -> (VisualState, PhysState) {
        self.state = state;
        self.obs = VisualState::replicated(render(&state), FRAME_STACK);
        self.steps = 0;
        self.done = false;
        (self.obs.clone(), self.state)
    }

    pub fn step(&mut self, action: Action) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::Config("step called on a finished episode; reset first".into()));
        }
        let state = integrate(&self.spec, &self.state, action)?;
        self.state = state;
        self.obs = self.obs.pushed(render(&state));
        self.steps += 1;
        let terminated = state.is_terminal();
        let truncated = !terminated && self.steps >= self.spec.max_agent_steps;
        self.done = terminated || truncated;
        Ok(StepOutcome {
            state,
            obs: self.obs.clone(),
            terminated,
            truncated,
        })
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn state(&self) -> &PhysState {
        &self.state
    }

    pub fn obs(&self) -> &VisualState {
        &self.obs
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};
    use std::f64::consts::PI;

    #[test]
    fn noise_free_starts() {
        assert_eq!(
            initial_state(EnvKind::Pendulum, 0.0),
            PhysState::Pendulum {
                theta: PI,
                theta_dot: 0.0
            }
        );
        assert_eq!(
            initial_state(EnvKind::Cartpole, 0.0),
            PhysState::Cartpole {
                x: 0.0,
                x_dot: 0.0,
                theta: 0.0,
                theta_dot: 0.0
            }
        );
    }

    #[test]
    fn unknown_env_is_a_config_error() {
        assert!(matches!(EnvSpec::by_name("acrobot"), Err(Error::Config(_))));
    }

    #[test]
    fn hanging_pendulum_stays_put() {
        let spec = EnvSpec::new(EnvKind::Pendulum);
        let s = integrate(&spec, &initial_state(EnvKind::Pendulum, 0.0), Action::new(0.0)).unwrap();
        let PhysState::Pendulum { theta, theta_dot } = s else { unreachable!() };
        assert!((theta - PI).abs() < 1e-12);
        assert!(theta_dot.abs() < 1e-12);
    }

    #[test]
    fn pendulum_unit_torque_two_euler_steps() {
        // Hand evaluation: acc = 6 at theta = pi (sin 2pi = 0), dt = 0.05.
        // Step 1: theta = pi, theta_dot = 0.3. Step 2: theta = pi + 0.015, theta_dot = 0.6 - 15 sin(0)*dt.
        let spec = EnvSpec::new(EnvKind::Pendulum);
        let s = integrate(&spec, &initial_state(EnvKind::Pendulum, 0.0), Action::new(1.0)).unwrap();
        let PhysState::Pendulum { theta, theta_dot } = s else { unreachable!() };
        assert!((theta_dot - 0.6).abs() < 1e-12, "{theta_dot}");
        assert!((theta - pendulum::wrap_angle(PI + 0.015)).abs() < 1e-12, "{theta}");
    }

    #[test]
    fn speed_is_clamped() {
        let spec = EnvSpec::new(EnvKind::Pendulum);
        let mut s = PhysState::Pendulum {
            theta: 0.0,
            theta_dot: 7.99,
        };
        for _ in 0..20 {
            s = integrate(&spec, &s, Action::new(1.0)).unwrap();
            let PhysState::Pendulum { theta_dot, .. } = s else { unreachable!() };
            assert!(theta_dot.abs() <= 8.0);
        }
    }

    #[test]
    fn actions_are_clamped() {
        assert_eq!(Action::new(3.0).value(), 1.0);
        assert_eq!(Action::new(-1.5).value(), -1.0);
        assert_eq!(Action::new(f64::NAN).value(), 0.0);
    }

    #[test]
    fn cartpole_terminates_past_threshold() {
        let mut rng = stream_rng(0, Stream::EnvInit);
        let mut env = Env::new(EnvSpec::new(EnvKind::Cartpole), &mut rng).unwrap();
        env.reset_to(PhysState::Cartpole {
            x: 0.0,
            x_dot: 0.0,
            theta: 0.69,
            theta_dot: 2.0,
        });
        let out = env.step(Action::new(0.0)).unwrap();
        let PhysState::Cartpole { theta, .. } = out.state else { unreachable!() };
        assert!(theta > 0.7);
        assert!(out.terminated);
        assert!(!out.truncated);
        assert!(env.step(Action::new(0.0)).is_err());
    }

    #[test]
    fn time_limit_is_truncation_not_termination() {
        let mut rng = stream_rng(0, Stream::EnvInit);
        let mut env = Env::new(EnvSpec::new(EnvKind::Pendulum), &mut rng).unwrap();
        for i in 0..200 {
            let out = env.step(Action::new(0.0)).unwrap();
            assert!(!out.terminated);
            assert_eq!(out.truncated, i == 199);
        }
    }

    #[test]
    fn non_finite_state_is_a_fault() {
        let spec = EnvSpec::new(EnvKind::Cartpole);
        let bad = PhysState::Cartpole {
            x: f64::NAN,
            x_dot: 0.0,
            theta: 0.0,
            theta_dot: 0.0,
        };
        assert!(matches!(
            integrate(&spec, &bad, Action::new(0.0)),
            Err(Error::IntegrationFault(_))
        ));
    }

    #[test]
    fn same_seed_same_bytes() {
        for kind in [EnvKind::Pendulum, EnvKind::Cartpole] {
            let run = || {
                let mut rng = stream_rng(42, Stream::EnvInit);
                let mut env = Env::new(EnvSpec::new(kind), &mut rng).unwrap();
                let mut frames = vec![env.obs().clone()];
                for _ in 0..30 {
                    let a = scripted_expert(env.state());
                    frames.push(env.step(a).unwrap().obs);
                }
                frames
            };
            assert_eq!(run(), run());
        }
    }

    #[test]
    fn stack_tracks_last_renders() {
        let mut rng = stream_rng(3, Stream::EnvInit);
        let mut env = Env::new(EnvSpec::new(EnvKind::Pendulum), &mut rng).unwrap();
        let first = *env.state();
        assert!(env.obs().frames().iter().all(|f| **f == render(&first)));
        let mut history = vec![];
        for _ in 0..5 {
            let a = scripted_expert(env.state());
            history.push(env.step(a).unwrap().state);
        }
        let obs = env.obs();
        for (frame, state) in obs.frames().iter().zip(&history[2..]) {
            assert_eq!(**frame, render(state));
        }
    }

    #[test]
    fn pendulum_energy_drift_from_rest() {
        let spec = EnvSpec::new(EnvKind::Pendulum);
        let mut s = initial_state(EnvKind::Pendulum, 0.0);
        let e0 = pendulum::energy(PI, 0.0);
        for _ in 0..200 {
            s = integrate(&spec, &s, Action::new(0.0)).unwrap();
        }
        let PhysState::Pendulum { theta, theta_dot } = s else { unreachable!() };
        assert!((pendulum::energy(theta, theta_dot) - e0).abs() < 0.5);
    }

    #[test]
    fn eval_reward_reference_points() {
        let p = |theta| PhysState::Pendulum {
            theta,
            theta_dot: 0.0,
        };
        assert_eq!(eval_reward(&p(0.0)), 1.0);
        assert!(eval_reward(&p(PI)).abs() < 1e-15);
    }

    fn expert_mean_return(kind: EnvKind, episodes: u64) -> f64 {
        let mut total = 0.0;
        let mut rng = stream_rng(0, Stream::EnvInit);
        let mut env = Env::new(EnvSpec::new(kind), &mut rng).unwrap();
        for _ in 0..episodes {
            env.reset(&mut rng);
            while !env.is_done() {
                let a = scripted_expert(env.state());
                total += eval_reward(&env.step(a).unwrap().state);
            }
        }
        total / episodes as f64
    }

    #[test]
    fn experts_are_competent() {
        let pend = expert_mean_return(EnvKind::Pendulum, 10);
        let cart = expert_mean_return(EnvKind::Cartpole, 10);
        assert!(pend >= 180.0, "pendulum expert mean {pend}");
        assert!(cart >= 190.0, "cartpole expert mean {cart}");
    }
}
