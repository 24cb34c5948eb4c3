//! Asynchronous flooding that builds a spanning tree.
//!
//! Each flood carries a tag; a node joins the first copy of a flood it sees
//! and rebroadcasts it on every port. A flood with a higher tag overrides
//! one with a lower tag, so concurrent floods started by several detectors
//! settle on the tree of the highest-priority one.
//!
//! A node may also hold a detection timer: when it fires and the node has
//! not yet been reached by any flood, it starts its own, tagged with the
//! firing time.

use crate::engine::{AsyncProgram, Ctx};
use crate::simcore::Nanos;
use crate::topo::{NodeId, Port};

/// Flood priority: later detection wins, then the higher detector id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FloodTag {
    pub ts: Nanos,
    pub origin: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FloodMsg {
    pub tag: FloodTag,
    pub hops: u32,
}

/// Detector address and timestamp plus a one-byte hop count.
pub const FLOOD_PAYLOAD: u32 = 13;

#[derive(Debug, Clone, Default)]
pub struct Flooding {
    /// Tag of the flood this node starts at phase start, if any.
    pub start_tag: Option<FloodTag>,
    /// Time this node detects a failure and floods unless reached first.
    pub detect_at: Option<Nanos>,
    pub tag: Option<FloodTag>,
    pub father: Option<Port>,
    pub depth: u32,
    /// Time the current flood reached this node.
    pub joined_at: Option<Nanos>,
    /// Time any flood first reached this node.
    pub first_joined_at: Option<Nanos>,
    /// Every `(time, depth)` at which this node joined a flood.
    pub joins: Vec<(Nanos, u32)>,
}

impl Flooding {
    pub fn origin(tag: FloodTag) -> Self {
        Flooding { start_tag: Some(tag), ..Default::default() }
    }

    pub fn detector(at: Nanos) -> Self {
        Flooding { detect_at: Some(at), ..Default::default() }
    }

    fn launch(&mut self, ctx: &mut Ctx<FloodMsg>, tag: FloodTag) {
        self.tag = Some(tag);
        self.father = None;
        self.depth = 0;
        self.joined_at = Some(ctx.now);
        self.first_joined_at.get_or_insert(ctx.now);
        self.joins.push((ctx.now, 0));
        ctx.broadcast(FloodMsg { tag, hops: 0 });
    }
}

impl AsyncProgram for Flooding {
    type Msg = FloodMsg;

    fn payload_bytes(&self, _: &FloodMsg) -> u32 {
        FLOOD_PAYLOAD
    }

    fn start(&mut self, ctx: &mut Ctx<FloodMsg>) {
        if let Some(t) = self.start_tag {
            self.launch(ctx, t);
        }
    }

    fn wake_at(&self) -> Option<Nanos> {
        self.detect_at
    }

    fn on_wake(&mut self, ctx: &mut Ctx<FloodMsg>) {
        if self.tag.is_none() {
            let tag = FloodTag { ts: ctx.now, origin: ctx.node };
            self.launch(ctx, tag);
        }
    }

    fn on_message(&mut self, ctx: &mut Ctx<FloodMsg>, port: Port, msg: FloodMsg) {
        if self.tag.is_some_and(|cur| cur >= msg.tag) {
            return;
        }
        self.tag = Some(msg.tag);
        self.father = Some(port);
        self.depth = msg.hops + 1;
        self.joined_at = Some(ctx.now);
        self.first_joined_at.get_or_insert(ctx.now);
        self.joins.push((ctx.now, self.depth));
        ctx.broadcast(FloodMsg { tag: msg.tag, hops: msg.hops + 1 });
    }
}
