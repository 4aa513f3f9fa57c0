use std::sync::Arc;

use crate::nn::Scalar;

/// Side length of rendered frames.
pub const FRAME_SIZE: usize = 64;
/// Number of stacked frames in a visual state.
pub const FRAME_STACK: usize = 3;

/// Background pixel value.
pub const BACKGROUND: u8 = 0;
/// Value of every drawn pixel.
pub const INK: u8 = 255;

/// A single grayscale image, row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Frame {
    height: usize,
    width: usize,
    pixels: Vec<u8>,
}

impl Frame {
    pub fn blank(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            pixels: vec![BACKGROUND; height * width],
        }
    }

    /// Wraps raw pixels; `pixels.len()` must equal `height * width`.
    pub fn from_pixels(height: usize, width: usize, pixels: Vec<u8>) -> Option<Self> {
        (pixels.len() == height * width).then_some(Self {
            height,
            width,
            pixels,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    /// Sets a pixel, silently ignoring coordinates outside the frame.
    pub fn plot(&mut self, row: i64, col: i64, value: u8) {
        if row >= 0 && col >= 0 && (row as usize) < self.height && (col as usize) < self.width {
            self.pixels[row as usize * self.width + col as usize] = value;
        }
    }
}

impl std::fmt::Debug for Frame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let lit = self.pixels.iter().filter(|&&p| p != BACKGROUND).count();
        write!(f, "Frame({}x{}, {} lit)", self.height, self.width, lit)
    }
}

/// The last few frames, oldest first. Frames are shared, so cloning a state
/// or storing overlapping states in a buffer does not copy pixels.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VisualState {
    frames: Vec<Arc<Frame>>,
}

impl VisualState {
    /// A stack holding `frame` replicated `depth` times, as at episode start.
    pub fn replicated(frame: Frame, depth: usize) -> Self {
        let frame = Arc::new(frame);
        Self {
            frames: vec![frame; depth],
        }
    }

    pub fn from_frames(frames: Vec<Arc<Frame>>) -> Self {
        assert!(!frames.is_empty(), "a visual state needs at least one frame");
        Self { frames }
    }

    /// The stack advanced by one frame: drop the oldest, append `frame`.
    pub fn pushed(&self, frame: Frame) -> Self {
        let mut frames = Vec::with_capacity(self.frames.len());
        frames.extend(self.frames.iter().skip(1).cloned());
        frames.push(Arc::new(frame));
        Self { frames }
    }

    pub fn frames(&self) -> &[Arc<Frame>] {
        &self.frames
    }

    pub fn latest(&self) -> &Frame {
        self.frames.last().expect("non-empty stack")
    }

    pub fn depth(&self) -> usize {
        self.frames.len()
    }

    /// (depth, height, width)
    pub fn shape(&self) -> (usize, usize, usize) {
        let f = &self.frames[0];
        (self.frames.len(), f.height, f.width)
    }

    pub fn len_floats(&self) -> usize {
        let (d, h, w) = self.shape();
        d * h * w
    }

    /// Writes the stack into `out` as floats in [0, 1], channel-major.
    pub fn write_floats<T: Scalar>(&self, out: &mut [T]) {
        let scale = T::from_f64(1.0 / 255.0);
        let mut i = 0;
        for frame in &self.frames {
            for &p in &frame.pixels {
                out[i] = T::from_f64(p as f64) * scale;
                i += 1;
            }
        }
        debug_assert_eq!(i, out.len());
    }
}

/// Packs states into one contiguous batch tensor.
pub fn batch_floats<T: Scalar>(states: &[&VisualState]) -> Vec<T> {
    let Some(first) = states.first() else {
        return Vec::new();
    };
    let per = first.len_floats();
    let mut out = vec![T::zero(); per * states.len()];
    for (chunk, s) in out.chunks_mut(per).zip(states) {
        assert_eq!(s.len_floats(), per, "mixed state shapes in one batch");
        s.write_floats(chunk);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame_with(value: u8) -> Frame {
        let mut f = Frame::blank(4, 4);
        f.pixels_mut()[0] = value;
        f
    }

    #[test]
    fn push_keeps_chronological_order() {
        let s = VisualState::replicated(frame_with(1), 3);
        assert!(s.frames().iter().all(|f| f.get(0, 0) == 1));
        let s = s.pushed(frame_with(2)).pushed(frame_with(3));
        let firsts: Vec<u8> = s.frames().iter().map(|f| f.get(0, 0)).collect();
        assert_eq!(firsts, vec![1, 2, 3]);
        let s = s.pushed(frame_with(4));
        let firsts: Vec<u8> = s.frames().iter().map(|f| f.get(0, 0)).collect();
        assert_eq!(firsts, vec![2, 3, 4]);
    }

    #[test]
    fn float_view_is_scaled() {
        let s = VisualState::replicated(frame_with(255), 2);
        let mut out = vec![0.0f64; s.len_floats()];
        s.write_floats(&mut out);
        assert_eq!(out[0], 1.0);
        assert_eq!(out[16], 1.0);
        assert_eq!(out[1], 0.0);
    }
}
