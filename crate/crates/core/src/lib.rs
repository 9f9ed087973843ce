//! Cost-aware multi-dimensional multiple access for a single-cell downlink.
//!
//! The pipeline has two stages. [`coalition`] groups UEs into coalitions
//! that share a subchannel using location information only, then
//! [`allocator`] assigns subchannels to coalitions and sets transmit powers
//! from instantaneous channels. [`topology`] generates drops and channels,
//! [`cost`] evaluates rates, utilization costs and utilities, and
//! [`harness`] runs seeded experiments.

pub mod allocator;
pub mod coalition;
pub mod cost;
pub mod error;
pub mod harness;
pub mod hungarian;
pub mod topology;

pub use allocator::{allocate, AllocOptions, Allocation, DualState, ScaConstants};
pub use coalition::{greedy_init, rotation_refine, verify_exchange_stability, CoalitionStructure, RotationSequence, Stability};
pub use cost::{AccessMode, Coalition, ConflictModel, LinkMetrics, SubchannelLink};
pub use error::{AllocError, CostError, HarnessError, MatchingError, ParamError, TopologyError};
pub use harness::{run_drop, sweep, DropResult, ExperimentConfig, Scheme};
pub use topology::{generate_drop, ChannelState, QosTargets, SystemParams, UeProfile};
