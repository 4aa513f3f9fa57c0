pub mod agent;
pub mod cli;
pub mod data;
pub mod env;
pub mod error;
pub mod losses;
pub mod model;
pub mod nn;
pub mod rng;
pub mod selftest;
pub mod trainer;

pub use error::{Error, Result};
