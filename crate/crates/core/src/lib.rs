//! Slot-based simulator for data dissemination in multi-hop cognitive radio
//! networks.
//!
//! The crate is organised bottom-up:
//!
//! * [`spectrum`] models slotted channels and primary-radio occupancy.
//! * [`strategy`] holds the channel selection policies (SURF, RD, SB, CA).
//! * [`topology`] generates random unit-disk networks of CR nodes.
//! * [`engine`] runs one TTL-bounded flood and records what happened.
//! * [`metrics`] turns traces into per-hop and per-node statistics.
//! * [`experiment`] drives seeded campaigns and writes CSV results.
//!
//! The numerical core is generic over [`Real`], implemented for `f32` and
//! `f64`. Campaigns run in `f64`; the aliases below name the common
//! instantiations.

pub mod engine;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod num;
pub mod spectrum;
pub mod strategy;
pub mod topology;

pub use error::{Result, SimError};
pub use num::Real;

/// Channel identifier, an index into `0..channels`.
pub type ChannelId = usize;
/// CR node identifier, an index into `0..n`.
pub type NodeId = usize;

pub type ChannelView64 = spectrum::ChannelView<f64>;
pub type ChannelView32 = spectrum::ChannelView<f32>;
pub type WeightedChannel64 = strategy::WeightedChannel<f64>;
pub type WeightedChannel32 = strategy::WeightedChannel<f32>;
pub type StrategyConfig64 = strategy::StrategyConfig<f64>;
pub type StrategyConfig32 = strategy::StrategyConfig<f32>;
pub type NodeView64 = topology::NodeView<f64>;
pub type NodeView32 = topology::NodeView<f32>;
