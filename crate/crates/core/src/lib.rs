//! Ordinal-reward reinforcement learning.
//!
//! Table-based and deep Q-learning over ordinal reward tiers, scored with the
//! measure of statistical superiority, next to their numeric counterparts.
//! The crate ships its own CartPole, Acrobot and chain environments and an
//! experiment harness that writes per-episode CSV metrics.

pub mod deep;
pub mod envs;
mod error;
pub mod harness;
pub mod neural;
pub mod ordinal;
pub mod tabular;

pub use error::{Error, Result};
