//! Cycle-accurate 2D-mesh network-on-chip simulator with in-network
//! partial-sum accumulation, plus the dataflow trace generators and energy
//! accounting used to study it.
//!
//! The crate is organised bottom-up:
//!
//! * [`analytic`] closed-form round counts for a layer on a mesh.
//! * [`noc`] the wormhole network: routers, links, NIs, statistics.
//! * [`ina`] the accumulation unit that lives inside each router.
//! * [`dataflow`] weight- and output-stationary schedules for a layer.
//! * [`exec`] drives a schedule through a network.
//! * [`power`] event-energy tallies and improvement ratios.
//! * [`harness`] config loading, sweeps and report files.

pub mod analytic;
pub mod dataflow;
pub mod exec;
pub mod harness;
pub mod ina;
pub mod noc;
pub mod power;
pub mod workload;
