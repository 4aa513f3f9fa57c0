//! Image augmentations applied identically to every frame of one stack.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;

use crate::env::{Frame, VisualState};
use crate::error::{Error, Result};

pub const PAD: usize = 4;
pub const CUTOUT_SIDES: [usize; 3] = [8, 12, 16];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AugMode {
    None,
    /// Replicate-pad then random crop back to size.
    Shift,
    /// Zero-pad then random crop back to size.
    Crop,
    /// Zero one random square.
    Cutout,
    /// Shift followed by cutout.
    Composite,
}

impl AugMode {
    pub fn name(self) -> &'static str {
        match self {
            AugMode::None => "none",
            AugMode::Shift => "shift",
            AugMode::Crop => "crop",
            AugMode::Cutout => "cutout",
            AugMode::Composite => "composite",
        }
    }
}

impl fmt::Display for AugMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AugMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "none" => AugMode::None,
            "shift" => AugMode::Shift,
            "crop" => AugMode::Crop,
            "cutout" => AugMode::Cutout,
            "composite" | "aug" => AugMode::Composite,
            other => {
                return Err(Error::Config(format!(
                    "unknown augmentation `{other}` (none|shift|crop|cutout|composite)"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    Replicate,
    Zero,
}

pub fn augment<R: Rng + ?Sized>(state: &VisualState, mode: AugMode, rng: &mut R) -> VisualState {
    match mode {
        AugMode::None => state.clone(),
        AugMode::Shift => {
            let (dx, dy) = draw_offset(rng);
            translate(state, dx, dy, Padding::Replicate)
        }
        AugMode::Crop => {
            let (dx, dy) = draw_offset(rng);
            translate(state, dx, dy, Padding::Zero)
        }
        AugMode::Cutout => {
            let sq = draw_square(state, rng);
            cutout(state, sq)
        }
        AugMode::Composite => {
            let (dx, dy) = draw_offset(rng);
            let shifted = translate(state, dx, dy, Padding::Replicate);
            let sq = draw_square(&shifted, rng);
            cutout(&shifted, sq)
        }
    }
}

/// Offsets in [0, 2*PAD] for the column and the row of the crop window.
pub fn draw_offset<R: Rng + ?Sized>(rng: &mut R) -> (usize, usize) {
    (rng.random_range(0..=2 * PAD), rng.random_range(0..=2 * PAD))
}

/// (column, row, side) of a square lying fully inside the frame.
pub fn draw_square<R: Rng + ?Sized>(state: &VisualState, rng: &mut R) -> (usize, usize, usize) {
    let (_, h, w) = state.shape();
    let side = CUTOUT_SIDES[rng.random_range(0..CUTOUT_SIDES.len())].min(h).min(w);
    (rng.random_range(0..=w - side), rng.random_range(0..=h - side), side)
}

/// Pads each frame by `PAD` and crops a same-size window whose top-left
/// corner sits at (`dx`, `dy`) in padded coordinates. (PAD, PAD) is identity.
pub fn translate(state: &VisualState, dx: usize, dy: usize, padding: Padding) -> VisualState {
    let frames = state
        .frames()
        .iter()
        .map(|f| {
            let (h, w) = (f.height() as i64, f.width() as i64);
            let mut out = Frame::blank(f.height(), f.width());
            let dst = out.pixels_mut();
            for r in 0..h {
                let sr = r + dy as i64 - PAD as i64;
                for c in 0..w {
                    let sc = c + dx as i64 - PAD as i64;
                    dst[(r * w + c) as usize] = match padding {
                        Padding::Replicate => {
                            f.get(sr.clamp(0, h - 1) as usize, sc.clamp(0, w - 1) as usize)
                        }
                        Padding::Zero if sr >= 0 && sr < h && sc >= 0 && sc < w => {
                            f.get(sr as usize, sc as usize)
                        }
                        Padding::Zero => 0,
                    };
                }
            }
            Arc::new(out)
        })
        .collect();
    VisualState::from_frames(frames)
}

pub fn cutout(state: &VisualState, (col, row, side): (usize, usize, usize)) -> VisualState {
    let frames = state
        .frames()
        .iter()
        .map(|f| {
            let mut out = (**f).clone();
            let w = out.width();
            let px = out.pixels_mut();
            for r in row..row + side {
                px[r * w + col..r * w + col + side].fill(0);
            }
            Arc::new(out)
        })
        .collect();
    VisualState::from_frames(frames)
}
