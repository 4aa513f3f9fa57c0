//! Integer rasterization of the two scenes. No anti-aliasing: every pixel is
//! either background or ink, and equal states always give equal bytes.

use super::obs::{Frame, FRAME_SIZE, INK};
use super::PhysState;

pub const PIVOT: (i64, i64) = (32, 32);
pub const PENDULUM_LENGTH_PX: f64 = 24.0;
pub const TIP_RADIUS_PX: i64 = 3;

pub const TRACK_ROW: i64 = 48;
pub const CART_WIDTH_PX: i64 = 12;
pub const CART_HEIGHT_PX: i64 = 6;
pub const CART_POLE_LENGTH_PX: f64 = 20.0;
const TRACK_HALF_SPAN_M: f64 = 2.4;
const TRACK_PX_MIN: f64 = 4.0;
const TRACK_PX_MAX: f64 = 60.0;

pub fn render(state: &PhysState) -> Frame {
    let mut frame = Frame::blank(FRAME_SIZE, FRAME_SIZE);
    match *state {
        PhysState::Pendulum { theta, .. } => {
            let tip = pendulum_tip(theta);
            thick_line(&mut frame, PIVOT, tip);
            disc(&mut frame, tip, TIP_RADIUS_PX);
        }
        PhysState::Cartpole { x, theta, .. } => {
            for col in 0..FRAME_SIZE as i64 {
                frame.plot(TRACK_ROW, col, INK);
            }
            let cx = cart_column(x);
            let top = TRACK_ROW - CART_HEIGHT_PX / 2;
            let left = cx - CART_WIDTH_PX / 2;
            for row in top..top + CART_HEIGHT_PX {
                for col in left..left + CART_WIDTH_PX {
                    frame.plot(row, col, INK);
                }
            }
            let tip = (
                cx + (CART_POLE_LENGTH_PX * theta.sin()).round() as i64,
                top - (CART_POLE_LENGTH_PX * theta.cos()).round() as i64,
            );
            thick_line(&mut frame, (cx, top), tip);
        }
    }
    frame
}

/// Pixel (column, row) of the pendulum tip; angle 0 points straight up.
pub fn pendulum_tip(theta: f64) -> (i64, i64) {
    (
        PIVOT.0 + (PENDULUM_LENGTH_PX * theta.sin()).round() as i64,
        PIVOT.1 - (PENDULUM_LENGTH_PX * theta.cos()).round() as i64,
    )
}

/// Column of the cart centre, mapping [-2.4, 2.4] m linearly onto [4, 60] px.
pub fn cart_column(x: f64) -> i64 {
    let x = x.clamp(-TRACK_HALF_SPAN_M, TRACK_HALF_SPAN_M);
    let t = (x + TRACK_HALF_SPAN_M) / (2.0 * TRACK_HALF_SPAN_M);
    (TRACK_PX_MIN + t * (TRACK_PX_MAX - TRACK_PX_MIN)).round() as i64
}

/// Bresenham points from `a` to `b` inclusive, as (column, row).
pub fn bresenham(a: (i64, i64), b: (i64, i64)) -> Vec<(i64, i64)> {
    let (mut x, mut y) = a;
    let dx = (b.0 - x).abs();
    let dy = -(b.1 - y).abs();
    let sx = if x < b.0 { 1 } else { -1 };
    let sy = if y < b.1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut points = Vec::with_capacity((dx - dy + 1) as usize);
    loop {
        points.push((x, y));
        if x == b.0 && y == b.1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
    points
}

/// A 3-px wide line: each Bresenham point is stamped with a 3×3 block.
fn thick_line(frame: &mut Frame, a: (i64, i64), b: (i64, i64)) {
    for (x, y) in bresenham(a, b) {
        for dy in -1..=1 {
            for dx in -1..=1 {
                frame.plot(y + dy, x + dx, INK);
            }
        }
    }
}

fn disc(frame: &mut Frame, centre: (i64, i64), radius: i64) {
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            if dx * dx + dy * dy <= radius * radius {
                frame.plot(centre.1 + dy, centre.0 + dx, INK);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::obs::BACKGROUND;

    fn pendulum(theta: f64) -> PhysState {
        PhysState::Pendulum {
            theta,
            theta_dot: 0.0,
        }
    }

    #[test]
    fn only_two_pixel_values() {
        for state in [
            pendulum(0.3),
            PhysState::Cartpole {
                x: 0.4,
                x_dot: 0.0,
                theta: -0.2,
                theta_dot: 0.0,
            },
        ] {
            let f = render(&state);
            assert!(f.pixels().iter().all(|&p| p == BACKGROUND || p == INK));
        }
    }

    #[test]
    fn upright_pendulum_is_a_vertical_bar() {
        let f = render(&pendulum(0.0));
        for row in 8..=32 {
            assert_eq!(f.get(row, 32), INK, "row {row}");
        }
        // Nothing far from the centre column above the pivot.
        for row in 0..32 {
            for col in (0..26).chain(39..64) {
                assert_eq!(f.get(row, col), BACKGROUND, "({row}, {col})");
            }
        }
        // Below the pivot stays clear.
        for row in 34..64 {
            assert!((0..64).all(|c| f.get(row, c) == BACKGROUND));
        }
    }

    #[test]
    fn horizontal_pendulum_tip_geometry() {
        assert_eq!(pendulum_tip(std::f64::consts::FRAC_PI_2), (56, 32));
        let f = render(&pendulum(std::f64::consts::FRAC_PI_2));
        // Tip disc: radius 3 around (col 56, row 32).
        assert_eq!(f.get(32, 59), INK);
        assert_eq!(f.get(29, 56), INK);
        assert_eq!(f.get(35, 56), INK);
        assert_eq!(f.get(32, 60), BACKGROUND);
    }

    #[test]
    fn renders_are_deterministic() {
        let s = pendulum(1.234);
        assert_eq!(render(&s).pixels(), render(&s).pixels());
    }

    #[test]
    fn cart_mapping_endpoints() {
        assert_eq!(cart_column(-2.4), 4);
        assert_eq!(cart_column(2.4), 60);
        assert_eq!(cart_column(0.0), 32);
        let f = render(&PhysState::Cartpole {
            x: 0.0,
            x_dot: 0.0,
            theta: 0.0,
            theta_dot: 0.0,
        });
        assert!((0..64).all(|c| f.get(TRACK_ROW as usize, c) == INK));
        // Cart body spans 12 columns around the centre.
        assert_eq!(f.get(46, 26), INK);
        assert_eq!(f.get(46, 37), INK);
        assert_eq!(f.get(46, 25), BACKGROUND);
        // Pole rises 20 px above the cart top (row 45).
        assert_eq!(f.get(25, 32), INK);
        assert_eq!(f.get(22, 32), BACKGROUND);
    }

    #[test]
    fn bresenham_endpoints_and_connectivity() {
        let pts = bresenham((0, 0), (7, 3));
        assert_eq!(pts.first(), Some(&(0, 0)));
        assert_eq!(pts.last(), Some(&(7, 3)));
        for w in pts.windows(2) {
            assert!((w[0].0 - w[1].0).abs() <= 1 && (w[0].1 - w[1].1).abs() <= 1);
        }
    }
}
