//! Seedable simulator of software-defined underwater acoustic sensor
//! networks with a multi-agent PPO routing engine.
//!
//! The crate is organised bottom-up:
//!
//! - [`acoustics`]: ambient noise source levels and their power sum.
//! - [`ocean`]: the 3D world, link metrics, energy and failures.
//! - [`nn`]: dense layers, multi-head attention, Adam and checkpoints.
//! - [`mask`]: reachability indicators, attention scores, action masks and CA network views.
//! - [`marl`]: rewards, masked policies, GAE, PPO and the training loop.
//! - [`routing`]: the per-tick packet engine with interrupt handling.
//! - [`harness`]: experiment configs, seed sweeps, summaries and exports.

#![allow(clippy::needless_range_loop)]

pub mod acoustics;
pub mod error;
pub mod harness;
pub mod marl;
pub mod mask;
pub mod nn;
pub mod ocean;
pub mod routing;

pub use error::{Error, Result};
