//! Message-passing execution engine: per-hop reliable transport, the α and β
//! synchronizers, an asynchronous driver, dynamic multicast and batching.

mod alpha;
pub mod arith;
mod asynch;
mod beta;
mod program;
mod transport;
mod tree;

use serde::{Deserialize, Serialize};

pub use alpha::run_alpha;
pub use arith::Arith;
pub use asynch::{run_async, AsyncProgram};
pub use beta::run_beta;
pub use program::{Ctx, Program};
pub use transport::{Class, Delivery, Frame, Runtime, RuntimeCounters};
pub use tree::{bfs_tree, build_sync_tree, center_step, recenter, reroot, SyncTree};

use crate::error::{Error, Result};
use crate::simcore::{NetConfig, Nanos};
use crate::topo::{LinkId, NodeId, Port, Topology};

/// UDP/IP/Ethernet framing bytes.
pub const FRAMING_BYTES: u32 = 42;
/// Reliable-transport header.
pub const TRANSPORT_BYTES: u32 = 8;
/// Synchronizer header (round parity and flags).
pub const SYNC_HDR_BYTES: u32 = 4;
pub const HEADER_BYTES: u32 = FRAMING_BYTES + TRANSPORT_BYTES + SYNC_HDR_BYTES;
pub const ACK_BYTES: u32 = 64;
/// Largest payload carried by one frame.
pub const MTU_PAYLOAD: u32 = 1500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Synchronizer {
    Alpha,
    #[default]
    Beta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub synchronizer: Synchronizer,
    pub arithmetic: Arith,
    /// Control budget per egress port in bits/s; `None` means unpaced.
    pub control_budget_bps: Option<f64>,
    /// Retransmission timeout; derived from the topology when `None`.
    pub t_rto_ns: Option<Nanos>,
    pub p_batch: usize,
    /// Smallest packet the engine emits (64 for algorithms, 100 for the
    /// use cases).
    pub packet_floor: u32,
    pub processing_delay_ns: Nanos,
    /// Send each port's messages of one round as a single packed payload
    /// (split into MTU frames) for programs that define a packed encoding.
    pub pack_rounds: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            synchronizer: Synchronizer::Beta,
            arithmetic: Arith::Exact,
            control_budget_bps: None,
            t_rto_ns: None,
            p_batch: 1,
            packet_floor: 64,
            processing_delay_ns: 400,
            pack_rounds: false,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p_batch == 0 {
            return Err(Error::config("p_batch must be at least 1"));
        }
        if let Some(b) = self.control_budget_bps {
            if !(b > 0.0) {
                return Err(Error::config("control budget must be positive"));
            }
        }
        if self.t_rto_ns == Some(0) {
            return Err(Error::config("t_rto_ns must be positive"));
        }
        Ok(())
    }

    pub fn net_config(&self) -> NetConfig {
        NetConfig { processing_delay: self.processing_delay_ns, control_budget_bps: self.control_budget_bps, min_frame: 64 }
    }

    /// Wire size of a packet carrying `payload` algorithm bytes.
    pub fn packet_size(&self, payload: u32) -> u32 {
        (HEADER_BYTES + payload).max(self.packet_floor).max(64)
    }

    /// Retransmission timeout. Unless fixed by `t_rto_ns`, a frame times out
    /// 1.2 one-hop round trips after departure, plus one paced ACK slot and
    /// two paced slots of the frame's own size: in lock-step rounds the
    /// reverse direction carries frames of similar size, and the ACK may
    /// queue behind them.
    pub fn rto(&self, topo: &Topology) -> Rto {
        if let Some(t) = self.t_rto_ns {
            return Rto { base: t, budget_bps: None };
        }
        let rtt = topo.max_link_rtt(self.packet_floor.max(64), self.processing_delay_ns).max(1);
        let ack = self.control_budget_bps.map_or(0, |b| crate::simcore::serialization_ns(ACK_BYTES, b));
        Rto { base: rtt * 6 / 5 + ack, budget_bps: self.control_budget_bps }
    }
}

/// Per-frame retransmission timeout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rto {
    pub base: Nanos,
    /// Control budget whose pacing slots are added per frame.
    pub budget_bps: Option<f64>,
}

impl Rto {
    pub fn fixed(t: Nanos) -> Self {
        Rto { base: t, budget_bps: None }
    }

    /// Timeout of a frame of `size` wire bytes.
    pub fn of(&self, size: u32) -> Nanos {
        self.base.max(1) + self.budget_bps.map_or(0, |b| 2 * crate::simcore::serialization_ns(size, b))
    }
}

/// Which part of the network a phase may use.
#[derive(Debug, Clone)]
pub struct Scope {
    pub alive: Vec<bool>,
    pub usable: Vec<bool>,
}

impl Scope {
    pub fn full(t: &Topology) -> Self {
        Scope { alive: vec![true; t.node_count()], usable: vec![true; t.edge_count()] }
    }

    /// Everything except the given failed links and the switches whose every
    /// link is listed.
    pub fn without(t: &Topology, failed: &[LinkId], dead: &[NodeId]) -> Self {
        let mut s = Scope::full(t);
        for &l in failed {
            s.usable[l.idx()] = false;
        }
        for &n in dead {
            s.alive[n.idx()] = false;
            for a in t.ports(n) {
                s.usable[a.link.idx()] = false;
            }
        }
        s
    }

    pub fn link_ok(&self, l: LinkId) -> bool {
        self.usable[l.idx()]
    }
}

/// Everything a driver needs besides the network and the programs.
#[derive(Debug, Clone)]
pub struct PhaseEnv<'a> {
    pub cfg: &'a EngineConfig,
    pub scope: Scope,
    pub start: Nanos,
    pub horizon: Nanos,
    /// Tree that carries synchronization; built from the scope when absent.
    pub sync_tree: Option<std::sync::Arc<SyncTree>>,
}

impl<'a> PhaseEnv<'a> {
    pub fn new(cfg: &'a EngineConfig, scope: Scope, start: Nanos) -> Self {
        PhaseEnv { cfg, scope, start, horizon: Nanos::MAX, sync_tree: None }
    }

    pub fn with_sync_tree(mut self, tree: std::sync::Arc<SyncTree>) -> Self {
        self.sync_tree = Some(tree);
        self
    }

    pub fn with_horizon(mut self, horizon: Nanos) -> Self {
        self.horizon = horizon;
        self
    }
}

/// Outcome of one synchronized or asynchronous execution.
#[derive(Debug, Clone, Default)]
pub struct PhaseReport {
    pub start: Nanos,
    /// Time the last node learned of termination.
    pub end: Nanos,
    pub converged: bool,
    /// Index of the last round in which any node sent a message (round 0
    /// is initialization; always 0 for asynchronous runs).
    pub rounds: u64,
    pub halted_at: Vec<Option<Nanos>>,
    pub counters: RuntimeCounters,
}

impl PhaseReport {
    pub fn duration(&self) -> Nanos {
        self.end - self.start
    }
}

/// Groups per-port messages into packets of at most `p_batch` sub-messages,
/// preserving send order within each port.
pub fn batch_by_port<M>(out: Vec<(Port, M)>, p_batch: usize) -> Vec<(Port, Vec<M>)> {
    let mut per_port: std::collections::BTreeMap<Port, Vec<M>> = std::collections::BTreeMap::new();
    for (p, m) in out {
        per_port.entry(p).or_default().push(m);
    }
    let mut packets = Vec::new();
    for (p, msgs) in per_port {
        let mut it = msgs.into_iter().peekable();
        while it.peek().is_some() {
            packets.push((p, it.by_ref().take(p_batch).collect()));
        }
    }
    packets
}

/// Bytes to name `count` members of a set of `universe` ids: the cheaper of
/// a bitmap and a list of ids of the smallest whole-byte width.
pub fn id_set_bytes(universe: usize, count: usize) -> u32 {
    let width = match universe {
        0..=256 => 1,
        257..=65_536 => 2,
        _ => 4,
    };
    (universe.div_ceil(8) as u32).min(width * count as u32)
}

/// Splits one port's messages of one round into `(messages, payload)`
/// packets. Under `pack_rounds` a program's packed encoding is used and the
/// messages ride on the last frame, so the receiver sees them once the
/// whole payload is in.
pub(crate) fn packetize<P: Program>(cfg: &EngineConfig, prog: &P, msgs: Vec<P::Msg>) -> Vec<(Vec<P::Msg>, u32)> {
    if msgs.is_empty() {
        return Vec::new();
    }
    if let Some(total) = cfg.pack_rounds.then(|| prog.packed_payload(&msgs)).flatten() {
        let frames = total.div_ceil(MTU_PAYLOAD).max(1);
        let mut out: Vec<(Vec<P::Msg>, u32)> =
            (0..frames).map(|k| (Vec::new(), (total - k * MTU_PAYLOAD).min(MTU_PAYLOAD))).collect();
        out.last_mut().unwrap().0 = msgs;
        return out;
    }
    let mut out = Vec::new();
    let mut it = msgs.into_iter().peekable();
    while it.peek().is_some() {
        let chunk: Vec<P::Msg> = it.by_ref().take(cfg.p_batch).collect();
        let payload = chunk.iter().map(|m| prog.payload_bytes(m)).sum();
        out.push((chunk, payload));
    }
    out
}

#[cfg(test)]
mod batch_tests {
    use super::*;

    #[test]
    fn batching_counts() {
        let out: Vec<(Port, u32)> = (0..25).map(|i| (0, i)).collect();
        let packets = batch_by_port(out, 24);
        assert_eq!(packets.iter().map(|(_, m)| m.len()).collect::<Vec<_>>(), vec![24, 1]);
        let cfg = EngineConfig::default();
        assert_eq!(cfg.packet_size(24 * 4) - HEADER_BYTES, 96);
        let single: Vec<(Port, u32)> = (0..5).map(|i| (i % 2, i as u32)).collect();
        assert_eq!(batch_by_port(single, 1).len(), 5);
    }
}

#[cfg(test)]
mod tests;
