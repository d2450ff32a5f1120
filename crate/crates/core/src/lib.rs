//! Slot-level simulator of popular content distribution (PCD) in a vehicular
//! ad hoc network.
//!
//! A fleet of on-board units (OBUs) leaves a roadside unit's coverage holding
//! partial, circularly contiguous copies of one file. In the V2V phase they
//! exchange packets over Rician-faded broadcast links. Two schedulers are
//! provided:
//!
//! * [`Scheme::Proposed`]: per-subnetwork hedonic coalition formation with
//!   switch dynamics, after which the coalition with the highest expected
//!   service rate broadcasts greedily chosen packets.
//! * [`Scheme::Baseline`]: random-order carrier sensing, each winner
//!   broadcasting a uniformly random owned packet.
//!
//! Every random decision is drawn from a named sub-stream of the scenario seed
//! (see [`rng`]), so a `(config, seed)` pair always reproduces the same trace.

pub mod channel;
pub mod cli;
pub mod coalition;
pub mod config;
pub mod content;
pub mod game;
pub mod metrics;
pub mod mobility;
pub mod protocol;
pub mod rng;

pub use config::{ConfigError, ScenarioConfig, Scheme};
pub use metrics::Trace;
pub use protocol::simulate;
