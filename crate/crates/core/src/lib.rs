//! An agent that learns to detour around a barrier by noticing when its
//! model of the world keeps being surprised.
//!
//! The pieces, from the bottom up:
//!
//! * [`surprise`]: entropy, information dispersion, surprise divergence and
//!   the surprise test.
//! * [`network`]: the two-slice decision network over the agent's percepts
//!   and actions, with exact inference and MEU action selection.
//! * [`environment`]: the continuous 2D world with the barrier.
//! * [`agent`]: surprise detection, hidden variable insertion and hard
//!   weighted EM.
//! * [`discovery`]: transfer-entropy structure search over logged series.
//! * [`harness`]: reproducible commands that write trace bundles.

pub mod agent;
pub mod discovery;
pub mod environment;
pub mod error;
pub mod harness;
pub mod network;
pub mod rng;
pub mod surprise;

pub use error::{Error, Result};
