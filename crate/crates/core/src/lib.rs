//! Deterministic discrete-event simulator and message-passing execution
//! engine for running CONGEST algorithms on switch-like nodes.
//!
//! The crate is layered bottom-up:
//!
//! * [`topo`]: switch topologies (fat-tree, Jellyfish, edge-list files).
//! * [`simcore`]: event queue, link delay/loss model, failures, pacing.
//! * [`engine`]: reliable per-hop transport, α/β synchronizers, dynamic
//!   multicast, approximate switch arithmetic and message batching.
//! * [`algos`]: the distributed algorithm library.
//! * [`clocksync`] and [`mcast`]: the two reaction use cases.
//! * [`harness`]: scenario configuration, metrics and CSV output.

pub mod algos;
pub mod clocksync;
pub mod engine;
pub mod error;
pub mod harness;
pub mod mcast;
pub mod simcore;
pub mod topo;

pub use error::{Error, Result};
pub use simcore::Nanos;
pub use topo::{LinkId, NodeId, Port, Topology};
