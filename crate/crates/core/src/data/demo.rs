//! Expert demonstration sets and their binary file format.
//!
//! Layout (little-endian): magic `CAILDEM1`, u32 version (1), u8 env-name
//! length and bytes, u32 trajectory count, then per trajectory: u32 T,
//! u32 H, u32 W, u8 has_actions, T*H*W frame bytes and, if present, T f32
//! actions.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;

use crate::env::{Frame, VisualState};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"CAILDEM1";
pub const VERSION: u32 = 1;

/// One recorded episode: the newest frame of each observation, and the
/// action taken there when known.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub frames: Vec<Arc<Frame>>,
    pub actions: Option<Vec<f32>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// The stacked observation at step `t`; steps before 0 repeat frame 0.
    pub fn state_at(&self, t: usize, depth: usize) -> VisualState {
        let frames = (0..depth)
            .map(|k| {
                let idx = (t + k + 1).saturating_sub(depth);
                Arc::clone(&self.frames[idx])
            })
            .collect();
        VisualState::from_frames(frames)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoSet {
    pub env: String,
    pub trajectories: Vec<Trajectory>,
}

impl DemoSet {
    pub fn new(env: impl Into<String>) -> Self {
        Self {
            env: env.into(),
            trajectories: Vec::new(),
        }
    }

    pub fn num_states(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }

    pub fn has_actions(&self) -> bool {
        !self.trajectories.is_empty() && self.trajectories.iter().all(|t| t.actions.is_some())
    }

    /// (trajectory, step) of the flat state index `i`.
    pub fn locate(&self, mut i: usize) -> (usize, usize) {
        for (k, t) in self.trajectories.iter().enumerate() {
            if i < t.len() {
                return (k, i);
            }
            i -= t.len();
        }
        panic!("state index out of range");
    }

    pub fn state(&self, i: usize, depth: usize) -> VisualState {
        let (k, t) = self.locate(i);
        self.trajectories[k].state_at(t, depth)
    }

    pub fn action(&self, i: usize) -> Option<f32> {
        let (k, t) = self.locate(i);
        self.trajectories[k].actions.as_ref().map(|a| a[t])
    }

    /// `n` stacked states drawn uniformly with replacement.
    pub fn sample_states<R: Rng + ?Sized>(&self, n: usize, depth: usize, rng: &mut R) -> Vec<VisualState> {
        let total = self.num_states();
        (0..n).map(|_| self.state(rng.random_range(0..total), depth)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let mut dims = None;
        for (k, t) in self.trajectories.iter().enumerate() {
            if t.is_empty() {
                return Err(Error::Storage(format!("trajectory {k} is empty")));
            }
            if let Some(a) = &t.actions {
                if a.len() != t.len() {
                    return Err(Error::Storage(format!("trajectory {k}: action count mismatch")));
                }
            }
            for f in &t.frames {
                let d = (f.height(), f.width());
                if *dims.get_or_insert(d) != d {
                    return Err(Error::Storage(format!("trajectory {k}: mixed frame sizes")));
                }
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let name = self.env.as_bytes();
        let name_len = u8::try_from(name.len())
            .map_err(|_| Error::Storage("env name longer than 255 bytes".into()))?;
        let mut out = Vec::with_capacity(16 + self.num_states() * 64 * 64);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(name_len);
        out.extend_from_slice(name);
        out.extend_from_slice(&(self.trajectories.len() as u32).to_le_bytes());
        for t in &self.trajectories {
            let (h, w) = (t.frames[0].height(), t.frames[0].width());
            for v in [t.len() as u32, h as u32, w as u32] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.push(t.actions.is_some() as u8);
            for f in &t.frames {
                out.extend_from_slice(f.pixels());
            }
            if let Some(actions) = &t.actions {
                for a in actions {
                    out.extend_from_slice(&a.to_le_bytes());
                }
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let mut r = Reader {
            bytes,
            pos: 0,
            origin,
        };
        if r.take(8)? != MAGIC {
            return Err(Error::corrupt(origin, "bad magic"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::corrupt(origin, format!("unsupported version {version}")));
        }
        let name_len = r.u8()? as usize;
        let env = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::corrupt(origin, "env name is not UTF-8"))?
            .to_string();
        let count = r.u32()? as usize;
        let mut trajectories = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let (t, h, w) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
            if t == 0 || h == 0 || w == 0 {
                return Err(Error::corrupt(origin, "empty trajectory or frame"));
            }
            let has_actions = match r.u8()? {
                0 => false,
                1 => true,
                other => return Err(Error::corrupt(origin, format!("bad action flag {other}"))),
            };
            let pixel_bytes = t
                .checked_mul(h)
                .and_then(|x| x.checked_mul(w))
                .ok_or_else(|| Error::corrupt(origin, "frame size overflow"))?;
            let raw = r.take(pixel_bytes)?;
            let frames = raw
                .chunks(h * w)
                .map(|px| Arc::new(Frame::from_pixels(h, w, px.to_vec()).expect("exact chunk")))
                .collect();
            let actions = if has_actions {
                let raw = r.take(t * 4)?;
                Some(
                    raw.chunks(4)
                        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                        .collect(),
                )
            } else {
                None
            };
            trajectories.push(Trajectory { frames, actions });
        }
        if r.pos != bytes.len() {
            return Err(Error::corrupt(origin, "trailing bytes after last trajectory"));
        }
        let set = DemoSet { env, trajectories };
        set.validate()
            .map_err(|e| Error::corrupt(origin, e.to_string()))?;
        Ok(set)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

/// `demos/<env>/<seed>.demo`
pub fn default_demo_path(env: &str, seed: u64) -> PathBuf {
    PathBuf::from("demos").join(env).join(format!("{seed}.demo"))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    origin: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::corrupt(self.origin, "truncated payload"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_set(with_actions: bool) -> DemoSet {
        let frame = |v: u8| Arc::new(Frame::from_pixels(2, 3, vec![v; 6]).unwrap());
        DemoSet {
            env: "pendulum".into(),
            trajectories: vec![
                Trajectory {
                    frames: vec![frame(7)],
                    actions: with_actions.then(|| vec![0.25]),
                },
                Trajectory {
                    frames: vec![frame(1), frame(2), frame(3)],
                    actions: with_actions.then(|| vec![-1.0, 0.0, 1.0]),
                },
            ],
        }
    }

    #[test]
    fn round_trip_is_identity() {
        for with_actions in [true, false] {
            let set = tiny_set(with_actions);
            let bytes = set.to_bytes().unwrap();
            let back = DemoSet::from_bytes(&bytes, Path::new("mem")).unwrap();
            assert_eq!(back, set);
            assert_eq!(back.to_bytes().unwrap(), bytes);
        }
    }

    #[test]
    fn header_layout() {
        let bytes = tiny_set(true).to_bytes().unwrap();
        assert_eq!(&bytes[..8], b"CAILDEM1");
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(bytes[12], 8);
        assert_eq!(&bytes[13..21], b"pendulum");
        assert_eq!(&bytes[21..25], &2u32.to_le_bytes());
        // First trajectory: T=1, H=2, W=3, actions present, 6 pixels, one f32.
        assert_eq!(&bytes[25..29], &1u32.to_le_bytes());
        assert_eq!(&bytes[29..33], &2u32.to_le_bytes());
        assert_eq!(&bytes[33..37], &3u32.to_le_bytes());
        assert_eq!(bytes[37], 1);
        assert_eq!(&bytes[38..44], &[7u8; 6]);
        assert_eq!(&bytes[44..48], &0.25f32.to_le_bytes());
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let good = tiny_set(true).to_bytes().unwrap();
        let mut bad_magic = good.clone();
        bad_magic[..8].copy_from_slice(b"XXXXXXXX");
        let mut bad_version = good.clone();
        bad_version[8] = 2;
        let truncated = &good[..good.len() - 3];
        let mut trailing = good.clone();
        trailing.push(0);
        for bytes in [&bad_magic[..], &bad_version[..], truncated, &trailing[..]] {
            assert!(matches!(
                DemoSet::from_bytes(bytes, Path::new("mem")),
                Err(Error::CorruptFile { .. })
            ));
        }
    }

    #[test]
    fn stacked_states_replicate_the_first_frame() {
        let set = tiny_set(true);
        let t = &set.trajectories[1];
        let px = |s: &VisualState| s.frames().iter().map(|f| f.pixels()[0]).collect::<Vec<_>>();
        assert_eq!(px(&t.state_at(0, 3)), vec![1, 1, 1]);
        assert_eq!(px(&t.state_at(1, 3)), vec![1, 1, 2]);
        assert_eq!(px(&t.state_at(2, 3)), vec![1, 2, 3]);
        assert_eq!(set.num_states(), 4);
        assert_eq!(set.locate(1), (1, 0));
        assert_eq!(set.action(3), Some(1.0));
    }
}
