//! Multi-UAV time-critical data collection.
//!
//! The crate simulates a swarm of UAVs collecting sensory data from ground
//! sensors and learns a joint trajectory/scheduling policy that minimizes the
//! average age of information (AoI). Its parts:
//!
//! - [`world`]: entities, stochastic kinematics and AoI bookkeeping.
//! - [`channel`]: air-to-ground line-of-sight probability and path loss.
//! - [`meanfield`]: empirical swarm density, neighbor mean-field features and
//!   Fokker-Planck diagnostics.
//! - [`mmdp`]: the multi-agent environment built on the pieces above.
//! - [`neural`]: dense and LSTM layers with hand-written reverse-mode gradients
//!   and Adam.
//! - [`mfhppo`]: mean-field hybrid-action PPO.
//! - [`baselines`]: random, max-AoI and multi-agent DQN comparison policies.
//! - [`expcli`]: configuration, scenarios, experiment orchestration and outputs.

pub mod baselines;
pub mod channel;
pub mod error;
pub mod expcli;
pub mod meanfield;
pub mod mfhppo;
pub mod mmdp;
pub mod neural;
pub mod world;

pub use error::{Error, Result};
