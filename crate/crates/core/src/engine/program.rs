use std::fmt::Debug;

use super::Arith;
use crate::simcore::Nanos;
use crate::topo::{NodeId, Port};

/// Per-node view handed to a [`Program`] callback.
pub struct Ctx<'a, M> {
    pub node: NodeId,
    pub round: u64,
    pub now: Nanos,
    pub arith: Arith,
    live: &'a [Port],
    neighbors: &'a [NodeId],
    out: &'a mut Vec<(Port, M)>,
    logical: &'a mut u64,
    wasted: &'a mut u64,
}

impl<'a, M: Clone> Ctx<'a, M> {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        node: NodeId,
        round: u64,
        now: Nanos,
        arith: Arith,
        live: &'a [Port],
        neighbors: &'a [NodeId],
        out: &'a mut Vec<(Port, M)>,
        logical: &'a mut u64,
        wasted: &'a mut u64,
    ) -> Self {
        Ctx { node, round, now, arith, live, neighbors, out, logical, wasted }
    }

    /// Ports whose link and neighbor are usable in this phase.
    pub fn live_ports(&self) -> &[Port] {
        self.live
    }

    pub fn neighbor(&self, port: Port) -> NodeId {
        self.neighbors[port]
    }

    pub fn port_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn send(&mut self, port: Port, msg: M) {
        *self.logical += 1;
        self.out.push((port, msg));
    }

    pub fn broadcast(&mut self, msg: M) {
        *self.logical += 1;
        for &p in self.live {
            self.out.push((p, msg.clone()));
        }
    }

    /// Broadcast-then-filter: one logical send, one internal copy per live
    /// port, of which those not selected by `keep` are discarded.
    pub fn multicast(&mut self, keep: impl Fn(Port) -> bool, msg: M) {
        *self.logical += 1;
        for &p in self.live {
            if keep(p) {
                self.out.push((p, msg.clone()));
            } else {
                *self.wasted += 1;
            }
        }
    }

    pub fn sent_any(&self) -> bool {
        !self.out.is_empty()
    }
}

/// A per-node round-based algorithm.
///
/// In round `r` a node sees the messages its neighbors sent in round `r-1`
/// and may send new ones. A round marked free-running instead delivers
/// messages through [`Program::on_message`] as they arrive; the round ends
/// for this node once [`Program::round_finished`] holds and every message
/// it sent has been acknowledged.
pub trait Program {
    type Msg: Clone + Debug;

    fn payload_bytes(&self, msg: &Self::Msg) -> u32;

    /// Size of one port's messages for a round when sent as a single packed
    /// payload; `None` keeps per-message batching.
    fn packed_payload(&self, _msgs: &[Self::Msg]) -> Option<u32> {
        None
    }

    fn round(&mut self, ctx: &mut Ctx<Self::Msg>, inbox: &[(Port, Self::Msg)]);

    fn free_running(&self, _round: u64) -> bool {
        false
    }

    fn on_message(&mut self, _ctx: &mut Ctx<Self::Msg>, _port: Port, _msg: Self::Msg) {}

    fn round_finished(&self) -> bool {
        true
    }

    /// Nothing left to do unless new messages arrive.
    fn done(&self) -> bool;
}
