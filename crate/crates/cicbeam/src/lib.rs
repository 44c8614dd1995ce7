//! Multi-beam UAV uplink with cooperative interference cancellation.
//!
//! Available ground base stations (GBSs) decode the UAV's data streams and
//! forward them over one-hop backhaul so that occupied GBSs, which share the
//! resource block with terrestrial users, can subtract them. The crate finds
//! the maximum number of interference-free streams for a network, designs
//! zero-forcing and SCA-optimized beamformers under interference-temperature
//! constraints, and compares against CoMP and cognitive beamforming.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod association;
pub mod beamforming;
pub mod benchmarks;
pub mod channel;
pub mod convex;
pub mod error;
pub mod network;
pub mod numerics;
pub mod harness;
pub mod sca;

pub use association::{derive_sets, max_dof, theorem1_feasible, DerivedSets, StreamAssociation};
pub use beamforming::{zf_design, BeamformingSolution};
pub use channel::{sample_channels, ChannelParams, ChannelSet};
pub use error::{Error, Result};
pub use network::{paper_topology, Scenario, Topology};
pub use sca::{optimize_scenario, run_sca, ScaConfig, ScaTrace};
