use crate::env::{FRAME_SIZE, FRAME_STACK};
use crate::error::{Error, Result};

/// Layer sizes of every network. The defaults are the full-size pixel
/// agent; [`NetConfig::tiny`] is small enough for finite-difference checks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetConfig {
    pub frame_stack: usize,
    pub frame_height: usize,
    pub frame_width: usize,
    pub conv_channels: usize,
    pub kernel: usize,
    pub strides: Vec<usize>,
    pub feature_dim: usize,
    pub disc_hidden: usize,
    pub proj_hidden: usize,
    pub proj_dim: usize,
    pub hidden: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            frame_stack: FRAME_STACK,
            frame_height: FRAME_SIZE,
            frame_width: FRAME_SIZE,
            conv_channels: 32,
            kernel: 3,
            strides: vec![2, 1, 1, 1],
            feature_dim: 50,
            disc_hidden: 128,
            proj_hidden: 128,
            proj_dim: 64,
            hidden: 256,
        }
    }
}

impl NetConfig {
    /// Two 7×7 frames, two conv layers of two channels, 4-d features.
    pub fn tiny() -> Self {
        Self {
            frame_stack: 2,
            frame_height: 7,
            frame_width: 7,
            conv_channels: 2,
            kernel: 3,
            strides: vec![2, 1],
            feature_dim: 4,
            disc_hidden: 3,
            proj_hidden: 3,
            proj_dim: 3,
            hidden: 3,
        }
    }

    pub fn input_len(&self) -> usize {
        self.frame_stack * self.frame_height * self.frame_width
    }

    /// Spatial size after each conv layer, or an error if a layer would
    /// shrink below one pixel.
    pub fn conv_sizes(&self) -> Result<Vec<(usize, usize)>> {
        let (mut h, mut w) = (self.frame_height, self.frame_width);
        let mut out = Vec::with_capacity(self.strides.len());
        for &s in &self.strides {
            if s == 0 || h < self.kernel || w < self.kernel {
                return Err(Error::Model(format!(
                    "conv stack does not fit a {}x{} input",
                    self.frame_height, self.frame_width
                )));
            }
            h = (h - self.kernel) / s + 1;
            w = (w - self.kernel) / s + 1;
            out.push((h, w));
        }
        Ok(out)
    }

    pub fn flat_len(&self) -> Result<usize> {
        let (h, w) = self
            .conv_sizes()?
            .last()
            .copied()
            .unwrap_or((self.frame_height, self.frame_width));
        let channels = if self.strides.is_empty() {
            self.frame_stack
        } else {
            self.conv_channels
        };
        Ok(channels * h * w)
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = [
            self.frame_stack,
            self.frame_height,
            self.frame_width,
            self.conv_channels,
            self.kernel,
            self.feature_dim,
            self.disc_hidden,
            self.proj_hidden,
            self.proj_dim,
            self.hidden,
        ];
        if sizes.contains(&0) || self.strides.is_empty() {
            return Err(Error::Model("network sizes must be positive".into()));
        }
        self.flat_len().map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry() {
        let c = NetConfig::default();
        assert_eq!(c.conv_sizes().unwrap(), vec![(31, 31), (29, 29), (27, 27), (25, 25)]);
        assert_eq!(c.flat_len().unwrap(), 32 * 25 * 25);
    }

    #[test]
    fn tiny_geometry() {
        let c = NetConfig::tiny();
        assert_eq!(c.conv_sizes().unwrap(), vec![(3, 3), (1, 1)]);
        assert_eq!(c.flat_len().unwrap(), 2);
    }

    #[test]
    fn oversized_kernel_is_rejected() {
        let c = NetConfig {
            frame_height: 4,
            frame_width: 4,
            ..NetConfig::tiny()
        };
        assert!(c.validate().is_err());
    }
}
