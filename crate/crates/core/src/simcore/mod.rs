//! Deterministic discrete-event core: time, events, link model, failures.

pub mod meter;
mod network;
mod queue;
pub mod rng;
pub mod trace;

use serde::{Deserialize, Serialize};

pub use meter::OverheadMeter;
pub use network::{DeliveryOutcome, DropReason, FailureSpec, FailureTarget, NetConfig, Network, WireStats};
pub use queue::EventQueue;
pub use trace::{write_trace_csv, TraceRow};

use crate::topo::NodeId;

/// Simulated time in nanoseconds.
pub type Nanos = u64;

pub const MICROS: Nanos = 1_000;
pub const MILLIS: Nanos = 1_000_000;

/// Wire time of `bytes` at `bandwidth_bps`, rounded up to whole ns.
pub fn serialization_ns(bytes: u32, bandwidth_bps: f64) -> Nanos {
    (bytes as f64 * 8.0 * 1e9 / bandwidth_bps).ceil() as Nanos
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PacketKind {
    Sync,
    Complete,
    Algo,
    Probe,
    Ack,
    Data,
}

impl PacketKind {
    pub const ALL: [PacketKind; 6] =
        [PacketKind::Sync, PacketKind::Complete, PacketKind::Algo, PacketKind::Probe, PacketKind::Ack, PacketKind::Data];

    /// Control packets are subject to the bandwidth governor.
    pub fn is_control(self) -> bool {
        !matches!(self, PacketKind::Data)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PacketKind::Sync => "SYNC",
            PacketKind::Complete => "COMPLETE",
            PacketKind::Algo => "ALGO",
            PacketKind::Probe => "PROBE",
            PacketKind::Ack => "ACK",
            PacketKind::Data => "DATA",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// What the link model needs to know about a packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketMeta {
    pub src: NodeId,
    pub dst: NodeId,
    pub kind: PacketKind,
    pub size: u32,
}
