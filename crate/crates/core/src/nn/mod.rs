//! Minimal neural-network toolkit: flat row-major buffers, layers with
//! explicit backward passes, orthogonal init and Adam.

pub mod adam;
pub mod gradcheck;
pub mod init;
pub mod layers;
pub mod mlp;
pub mod param;
pub mod scalar;

pub use adam::Adam;
pub use layers::{Conv2d, ConvShape, LayerNorm, Linear};
pub use mlp::{Mlp, MlpTrace};
pub use param::{fingerprint, Module, Param};
pub use scalar::Scalar;
