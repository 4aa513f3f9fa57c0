//! Checkpoint container (little-endian): magic `CAILCKP1`, u32 version,
//! u8 scalar width, env name (u8 length + bytes), u64 step, the network
//! layout as u32 fields, u8 separate-encoder flag, u64 value count, values.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{NetConfig, Nets};
use crate::error::{Error, Result};
use crate::nn::Scalar;

const MAGIC: &[u8; 8] = b"CAILCKP1";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub env: String,
    pub step: u64,
    pub nets: Nets<T>,
}

fn config_fields(c: &NetConfig) -> Vec<u32> {
    let mut out = vec![
        c.frame_stack,
        c.frame_height,
        c.frame_width,
        c.conv_channels,
        c.kernel,
        c.strides.len(),
    ];
    out.extend(&c.strides);
    out.extend([c.feature_dim, c.disc_hidden, c.proj_hidden, c.proj_dim, c.hidden]);
    out.into_iter().map(|v| v as u32).collect()
}

impl<T: Scalar> Checkpoint<T> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(T::BYTES as u8);
        out.push(self.env.len() as u8);
        out.extend_from_slice(self.env.as_bytes());
        out.extend_from_slice(&self.step.to_le_bytes());
        for v in config_fields(&self.nets.config) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.push(self.nets.disc_encoder.is_some() as u8);
        let values = self.nets.flat_values();
        out.extend_from_slice(&(values.len() as u64).to_le_bytes());
        for v in values {
            v.write_le(&mut out);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let corrupt = |why: &str| Error::corrupt(origin, why);
        let mut pos = 0;
        let mut take = |n: usize| -> Result<&[u8]> {
            let end = pos + n;
            if end > bytes.len() {
                return Err(Error::corrupt(origin, "truncated checkpoint"));
            }
            let out = &bytes[pos..end];
            pos = end;
            Ok(out)
        };
        if take(8)? != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().expect("4 bytes"));
        if u32_at(take(4)?) != VERSION {
            return Err(corrupt("unsupported version"));
        }
        if take(1)?[0] as usize != T::BYTES {
            return Err(corrupt("scalar width mismatch"));
        }
        let name_len = take(1)?[0] as usize;
        let env = std::str::from_utf8(take(name_len)?)
            .map_err(|_| corrupt("env name is not UTF-8"))?
            .to_string();
        let step = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes"));
        let mut field = || -> Result<usize> { Ok(u32_at(take(4)?) as usize) };
        let (frame_stack, frame_height, frame_width, conv_channels, kernel) =
            (field()?, field()?, field()?, field()?, field()?);
        let n_strides = field()?;
        if n_strides > 64 {
            return Err(corrupt("implausible layer count"));
        }
        let strides = (0..n_strides).map(|_| field()).collect::<Result<Vec<_>>>()?;
        let config = NetConfig {
            frame_stack,
            frame_height,
            frame_width,
            conv_channels,
            kernel,
            strides,
            feature_dim: field()?,
            disc_hidden: field()?,
            proj_hidden: field()?,
            proj_dim: field()?,
            hidden: field()?,
        };
        let separate = match take(1)?[0] {
            0 => false,
            1 => true,
            _ => return Err(corrupt("bad encoder flag")),
        };
        let count = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize;
        config
            .validate()
            .map_err(|e| Error::corrupt(origin, e.to_string()))?;
        let raw = take(count.checked_mul(T::BYTES).ok_or_else(|| corrupt("size overflow"))?)?;
        let values: Vec<T> = raw.chunks(T::BYTES).map(T::read_le).collect();
        if pos != bytes.len() {
            return Err(corrupt("trailing bytes"));
        }
        // Initial values are overwritten below; the seed is irrelevant.
        let mut nets = Nets::new(config, separate, &mut ChaCha8Rng::seed_from_u64(0))
            .map_err(|e| Error::corrupt(origin, e.to_string()))?;
        nets.load_flat_values(&values)
            .map_err(|e| Error::corrupt(origin, e.to_string()))?;
        Ok(Self { env, step, nets })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}
