//! Cart-pole balancing. Positive commands push the cart toward -x; with that
//! convention the all-positive-gain PD law below is stabilizing.

use super::clip_unit;

pub const GRAVITY: f64 = 9.8;
pub const CART_MASS: f64 = 1.0;
pub const POLE_MASS: f64 = 0.1;
pub const HALF_LENGTH: f64 = 0.5;
pub const FORCE_MAG: f64 = 10.0;
pub const DT: f64 = 0.02;
pub const THETA_LIMIT: f64 = 0.7;
pub const X_LIMIT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
}

pub fn euler_step(s: CartState, u: f64, dt: f64) -> CartState {
    let force = -FORCE_MAG * u;
    let total_mass = CART_MASS + POLE_MASS;
    let (sin, cos) = s.theta.sin_cos();
    let temp = (force + POLE_MASS * HALF_LENGTH * s.theta_dot * s.theta_dot * sin) / total_mass;
    let theta_acc = (GRAVITY * sin - cos * temp)
        / (HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos * cos / total_mass));
    let x_acc = temp - POLE_MASS * HALF_LENGTH * theta_acc * cos / total_mass;
    CartState {
        x: s.x + dt * s.x_dot,
        x_dot: s.x_dot + dt * x_acc,
        theta: s.theta + dt * s.theta_dot,
        theta_dot: s.theta_dot + dt * theta_acc,
    }
}

pub fn is_terminal(s: &CartState) -> bool {
    s.theta.abs() > THETA_LIMIT || s.x.abs() > X_LIMIT
}

pub fn expert(s: &CartState) -> f64 {
    clip_unit(-(20.0 * s.theta + 4.0 * s.theta_dot + s.x + 2.0 * s.x_dot) / 10.0)
}

pub fn eval_reward(s: &CartState) -> f64 {
    if s.theta.abs() < 0.2 && s.x.abs() < 1.0 {
        1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pd_reference_value() {
        let s = CartState {
            x: 0.0,
            x_dot: 0.0,
            theta: 0.1,
            theta_dot: 0.0,
        };
        assert!((expert(&s) - (-0.2)).abs() < 1e-12);
    }

    #[test]
    fn upright_rest_is_an_equilibrium() {
        let s = CartState {
            x: 0.0,
            x_dot: 0.0,
            theta: 0.0,
            theta_dot: 0.0,
        };
        assert_eq!(euler_step(s, 0.0, DT), s);
    }

    #[test]
    fn thresholds() {
        let mut s = CartState {
            x: 0.0,
            x_dot: 0.0,
            theta: 0.71,
            theta_dot: 0.0,
        };
        assert!(is_terminal(&s));
        s.theta = 0.69;
        assert!(!is_terminal(&s));
        s.x = -2.01;
        assert!(is_terminal(&s));
        s.x = 0.0;
        s.theta = 0.25;
        assert_eq!(eval_reward(&s), 0.0);
        s.theta = 0.1;
        assert_eq!(eval_reward(&s), 1.0);
    }
}
