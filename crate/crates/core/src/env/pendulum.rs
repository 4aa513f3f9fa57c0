//! Torque-limited pendulum swing-up. Angle 0 is upright.

use super::clip_unit;

pub const GRAVITY: f64 = 10.0;
pub const MASS: f64 = 1.0;
pub const LENGTH: f64 = 1.0;
pub const MAX_TORQUE: f64 = 2.0;
pub const MAX_SPEED: f64 = 8.0;
pub const DT: f64 = 0.05;

const BALANCE_ANGLE: f64 = 0.3;
const BALANCE_SPEED: f64 = 1.0;
const KP: f64 = 8.0;
const KD: f64 = 2.0;
const KE: f64 = 0.5;

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(theta: f64) -> f64 {
    use std::f64::consts::PI;
    let wrapped = theta - 2.0 * PI * ((theta - PI) / (2.0 * PI)).ceil();
    if wrapped <= -PI {
        wrapped + 2.0 * PI
    } else {
        wrapped
    }
}

pub fn angular_acceleration(theta: f64, u: f64) -> f64 {
    -(3.0 * GRAVITY / (2.0 * LENGTH)) * (theta + std::f64::consts::PI).sin()
        + 3.0 * MAX_TORQUE * u / (MASS * LENGTH * LENGTH)
}

/// One explicit Euler step; both updates read the pre-step state.
pub fn euler_step(theta: f64, theta_dot: f64, u: f64, dt: f64) -> (f64, f64) {
    let acc = angular_acceleration(theta, u);
    let next_theta = wrap_angle(theta + theta_dot * dt);
    let next_dot = (theta_dot + acc * dt).clamp(-MAX_SPEED, MAX_SPEED);
    (next_theta, next_dot)
}

/// Conserved quantity of the unforced dynamics, scaled so the upright
/// rest state has energy `GRAVITY`.
pub fn energy(theta: f64, theta_dot: f64) -> f64 {
    LENGTH / 3.0 * theta_dot * theta_dot + GRAVITY * theta.cos()
}

/// PD balance near the top, energy pumping elsewhere.
pub fn expert(theta: f64, theta_dot: f64) -> f64 {
    if theta.abs() < BALANCE_ANGLE && theta_dot.abs() < BALANCE_SPEED {
        return clip_unit(-(KP * theta + KD * theta_dot) / MAX_TORQUE);
    }
    let direction = if theta_dot >= 0.0 { 1.0 } else { -1.0 };
    clip_unit(KE * (GRAVITY - energy(theta, theta_dot)) * direction)
}

pub fn eval_reward(theta: f64) -> f64 {
    (1.0 + theta.cos()) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn wrap_is_half_open() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(PI + 0.1) - (-PI + 0.1)).abs() < 1e-12);
        assert_eq!(wrap_angle(0.25), 0.25);
    }

    #[test]
    fn expert_reference_points() {
        assert_eq!(expert(0.0, 0.0), 0.0);
        assert_eq!(expert(PI, 0.0), 1.0);
        assert_eq!(expert(PI, -0.5), -1.0);
    }

    #[test]
    fn energy_of_rest_states() {
        assert!((energy(0.0, 0.0) - GRAVITY).abs() < 1e-12);
        assert!((energy(PI, 0.0) + GRAVITY).abs() < 1e-12);
    }
}
