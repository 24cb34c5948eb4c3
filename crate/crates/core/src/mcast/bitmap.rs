//! Bitmap-based fast recovery.
//!
//! After a flood has built a spanning tree rooted at a detector, the root
//! sends a query down the tree naming the failed links. Every switch knows
//! which groups each link carries, so it can tell which of the affected
//! groups have members below it. Reports travel back up as bitmaps over the
//! affected-group list: a switch records each child's bitmap and ORs them,
//! together with its own membership, into the bitmap it sends to its
//! parent. Forwarding for an affected group then follows the bitmaps.
//!
//! A switch expects one message from every port except the one to its
//! father: a report from each child, or the query itself from any neighbor
//! that is not a child. That lets parents learn their children without an
//! extra round of announcements.

use crate::engine::{AsyncProgram, Ctx, HEADER_BYTES, MTU_PAYLOAD};
use crate::simcore::Nanos;
use crate::topo::{NodeId, Port, Topology};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Bits {
    words: Vec<u64>,
    len: usize,
}

impl Bits {
    pub fn new(len: usize) -> Self {
        Bits { words: vec![0; len.div_ceil(64)], len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn set(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn or_with(&mut self, other: &Bits) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Wire size: the width is rounded up to a power of two, at least one
    /// byte.
    pub fn bytes(&self) -> u32 {
        (self.len.next_power_of_two().max(8) / 8) as u32
    }
}

#[derive(Debug, Clone)]
pub enum RecoveryMsg {
    Query { failed_links: u32 },
    Report(Bits),
}

/// Frames needed to carry `payload` bytes.
pub fn frames_for(payload: u32) -> u32 {
    payload.div_ceil(MTU_PAYLOAD).max(1)
}

#[derive(Debug, Clone)]
pub struct BitmapCollect {
    pub father: Option<Port>,
    pub is_root: bool,
    failed_links: u32,
    /// Affected groups with a member at this switch.
    pub own: Bits,
    /// Bitmap reported by each child.
    pub is_son: Vec<(Port, Bits)>,
    /// Affected groups with a member in this switch's subtree.
    pub in_tree: Bits,
    queried: bool,
    /// Messages still expected; a neighbor's query can arrive before our own.
    pending: isize,
    pub finished_at: Option<Nanos>,
}

impl BitmapCollect {
    pub fn new(father: Option<Port>, is_root: bool, own: Bits, failed_links: u32) -> Self {
        let in_tree = Bits::new(own.len());
        BitmapCollect { father, is_root, failed_links, own, is_son: Vec::new(), in_tree, queried: false, pending: 0, finished_at: None }
    }

    fn fan_out(&mut self, ctx: &mut Ctx<RecoveryMsg>) {
        self.queried = true;
        let ports: Vec<Port> = ctx.live_ports().iter().copied().filter(|&p| Some(p) != self.father).collect();
        self.pending += ports.len() as isize;
        let msg = RecoveryMsg::Query { failed_links: self.failed_links };
        for p in ports {
            ctx.send(p, msg.clone());
        }
        self.maybe_finish(ctx);
    }

    fn maybe_finish(&mut self, ctx: &mut Ctx<RecoveryMsg>) {
        if !self.queried || self.pending > 0 || self.finished_at.is_some() {
            return;
        }
        let mut acc = self.own.clone();
        for (_, b) in &self.is_son {
            acc.or_with(b);
        }
        self.in_tree = acc;
        self.finished_at = Some(ctx.now);
        if let Some(f) = self.father {
            ctx.send(f, RecoveryMsg::Report(self.in_tree.clone()));
        }
    }
}

impl AsyncProgram for BitmapCollect {
    type Msg = RecoveryMsg;

    fn payload_bytes(&self, m: &RecoveryMsg) -> u32 {
        match m {
            RecoveryMsg::Query { failed_links } => 4 * failed_links,
            RecoveryMsg::Report(b) => {
                let bytes = b.bytes();
                bytes + (frames_for(bytes) - 1) * HEADER_BYTES
            }
        }
    }

    fn start(&mut self, ctx: &mut Ctx<RecoveryMsg>) {
        if self.is_root {
            self.fan_out(ctx);
        }
    }

    fn on_message(&mut self, ctx: &mut Ctx<RecoveryMsg>, port: Port, msg: RecoveryMsg) {
        match msg {
            RecoveryMsg::Query { .. } if Some(port) == self.father && !self.queried => self.fan_out(ctx),
            RecoveryMsg::Query { .. } => {
                self.pending -= 1;
                self.maybe_finish(ctx);
            }
            RecoveryMsg::Report(b) => {
                self.is_son.push((port, b));
                self.pending -= 1;
                self.maybe_finish(ctx);
            }
        }
    }
}

/// Follows the recovery bitmaps for affected group `g` from `src`: up the
/// tree to the root and down every child whose bitmap has `g` set. Returns
/// the switches reached, in visiting order, or `None` if some switch would
/// receive the packet twice.
pub fn forward_by_bitmaps(t: &Topology, progs: &[BitmapCollect], g: usize, src: NodeId) -> Option<Vec<NodeId>> {
    let mut seen = vec![false; t.node_count()];
    let mut order = Vec::new();
    // (node, port the packet arrived on)
    let mut stack: Vec<(NodeId, Option<Port>)> = vec![(src, None)];
    while let Some((v, from)) = stack.pop() {
        if std::mem::replace(&mut seen[v.idx()], true) {
            return None;
        }
        order.push(v);
        let st = &progs[v.idx()];
        let from_parent = from.is_some() && from == st.father;
        if !from_parent {
            if let Some(f) = st.father {
                stack.push((t.neighbor(v, f), Some(t.port_to(t.neighbor(v, f), v).unwrap())));
            }
        }
        for (p, bits) in &st.is_son {
            if Some(*p) != from && bits.get(g) {
                let c = t.neighbor(v, *p);
                stack.push((c, Some(t.port_to(c, v).unwrap())));
            }
        }
    }
    Some(order)
}
