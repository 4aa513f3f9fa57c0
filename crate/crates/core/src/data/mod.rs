//! Replay storage, demonstration files and the augmentation pipeline.

pub mod augment;
pub mod demo;
pub mod replay;
pub mod views;

pub use augment::{augment, AugMode};
pub use demo::{DemoSet, Trajectory};
pub use replay::{ReplayBuffer, Transition};
pub use views::{make_views, ViewBatch};
