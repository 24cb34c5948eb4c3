//! Per-hop reliable delivery on top of the lossy link model.
//!
//! Every egress port holds one stop-and-wait slot per [`Class`]: a frame in
//! flight with its departure time, an alternating sequence bit, and a queue
//! of frames waiting behind it. Receivers ACK every data frame and drop
//! duplicates by comparing the sequence bit with the one they expect next.
//! A frame's timeout depends on its size (see [`Rto::of`]) and is fixed when
//! it departs. Each node keeps one timer armed at the earliest due time of
//! its in-flight frames, so a lost frame is resent exactly when it expires.
//! Each processed incoming packet also inspects one slot of the receiving
//! node in round-robin order.

use std::collections::VecDeque;
use std::sync::Arc;

use super::{Rto, Scope, ACK_BYTES};
use crate::simcore::{DeliveryOutcome, EventQueue, Nanos, Network, PacketKind, PacketMeta};
use crate::topo::{LinkId, NodeId, Port, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Class {
    Sync = 0,
    Algo = 1,
}

#[derive(Debug, Clone)]
pub struct Frame<B> {
    pub class: Class,
    pub kind: PacketKind,
    pub size: u32,
    pub body: B,
}

#[derive(Debug, Clone)]
enum Wire<B> {
    Data { seq: bool, frame: Frame<B> },
    Ack { class: Class, seq: bool },
}

#[derive(Debug, Clone)]
enum Event<B> {
    Arrive { to: NodeId, port: Port, link: LinkId, wire: Wire<B> },
    Tick(NodeId),
    App { node: NodeId, tag: u64 },
}

/// What the transport hands up to a driver.
#[derive(Debug, Clone)]
pub enum Delivery<B> {
    Msg { node: NodeId, port: Port, body: B },
    Acked { node: NodeId, port: Port, class: Class },
    App { node: NodeId, tag: u64 },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RuntimeCounters {
    pub frames: u64,
    pub retransmissions: u64,
    pub duplicates: u64,
    /// Algorithm-level sends (a multicast counts once).
    pub logical_sends: u64,
    /// Internal copies created by broadcast-then-filter that never hit a link.
    pub wasted_copies: u64,
}

#[derive(Debug)]
struct Inflight<B> {
    frame: Frame<B>,
    seq: bool,
    due: Nanos,
}

#[derive(Debug)]
struct Slot<B> {
    inflight: Option<Inflight<B>>,
    next_seq: bool,
    pending: VecDeque<Frame<B>>,
}

impl<B> Default for Slot<B> {
    fn default() -> Self {
        Slot { inflight: None, next_seq: false, pending: VecDeque::new() }
    }
}

pub struct Runtime<B> {
    net: Network,
    topo: Arc<Topology>,
    queue: EventQueue<Event<B>>,
    now: Nanos,
    horizon: Nanos,
    hit_horizon: bool,
    tx: Vec<Vec<[Slot<B>; 2]>>,
    rx_expect: Vec<Vec<[bool; 2]>>,
    busy: Vec<usize>,
    rr: Vec<usize>,
    tick_at: Vec<Option<Nanos>>,
    scope: Scope,
    rto: Rto,
    pub counters: RuntimeCounters,
}

impl<B: Clone> Runtime<B> {
    pub fn new(net: Network, scope: Scope, rto: Rto, start: Nanos) -> Self {
        let topo = net.topology().clone();
        let tx = topo.nodes().map(|n| (0..topo.degree(n)).map(|_| Default::default()).collect()).collect();
        let rx_expect = topo.nodes().map(|n| vec![[false; 2]; topo.degree(n)]).collect();
        let n = topo.node_count();
        Runtime {
            net,
            queue: EventQueue::default(),
            now: start,
            horizon: Nanos::MAX,
            hit_horizon: false,
            tx,
            rx_expect,
            busy: vec![0; n],
            rr: vec![0; n],
            tick_at: vec![None; n],
            scope,
            rto,
            counters: RuntimeCounters::default(),
            topo,
        }
    }

    pub fn into_network(self) -> Network {
        self.net
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.net
    }

    pub fn topology(&self) -> &Arc<Topology> {
        &self.topo
    }

    pub fn scope(&self) -> &Scope {
        &self.scope
    }

    pub fn now(&self) -> Nanos {
        self.now
    }

    pub fn rto(&self) -> Rto {
        self.rto
    }

    pub fn set_horizon(&mut self, h: Nanos) {
        self.horizon = h;
    }

    pub fn hit_horizon(&self) -> bool {
        self.hit_horizon
    }

    pub fn alive(&self, n: NodeId) -> bool {
        self.scope.alive[n.idx()]
    }

    /// Ports of `n` whose link is usable in this phase.
    pub fn live_ports(&self, n: NodeId) -> Vec<Port> {
        self.topo
            .ports(n)
            .iter()
            .enumerate()
            .filter(|(_, a)| self.scope.usable[a.link.idx()] && self.scope.alive[a.neighbor.idx()])
            .map(|(p, _)| p)
            .collect()
    }

    pub fn port_live(&self, n: NodeId, port: Port) -> bool {
        let a = self.topo.ports(n)[port];
        self.scope.usable[a.link.idx()] && self.scope.alive[a.neighbor.idx()]
    }

    /// Marks a link unusable from now on and discards frames queued on it.
    pub fn retire_link(&mut self, link: LinkId) {
        self.scope.usable[link.idx()] = false;
        let l = self.topo.link(link).clone();
        for (n, p) in [(l.a, l.port_a), (l.b, l.port_b)] {
            for c in 0..2 {
                let s = &mut self.tx[n.idx()][p][c];
                if s.inflight.take().is_some() {
                    self.busy[n.idx()] -= 1;
                }
                s.pending.clear();
            }
        }
    }

    /// True when nothing `n` sent in `class` is waiting for an ACK.
    pub fn class_idle(&self, n: NodeId, class: Class) -> bool {
        self.tx[n.idx()].iter().all(|s| s[class as usize].inflight.is_none())
    }

    pub fn schedule(&mut self, node: NodeId, at: Nanos, tag: u64) {
        self.queue.push(at.max(self.now), Event::App { node, tag });
    }

    /// Queues `frame` for reliable delivery out of `port`.
    pub fn send(&mut self, node: NodeId, port: Port, frame: Frame<B>) {
        if !self.scope.alive[node.idx()] || !self.port_live(node, port) {
            return;
        }
        self.counters.frames += 1;
        let class = frame.class as usize;
        let slot = &mut self.tx[node.idx()][port][class];
        if slot.inflight.is_some() {
            slot.pending.push_back(frame);
            return;
        }
        let seq = slot.next_seq;
        slot.next_seq = !seq;
        slot.inflight = Some(Inflight { frame, seq, due: 0 });
        self.busy[node.idx()] += 1;
        self.transmit_slot(node, port, class);
    }

    fn transmit_slot(&mut self, node: NodeId, port: Port, class: usize) {
        let adj = self.topo.ports(node)[port];
        let (wire, meta) = {
            let inf = self.tx[node.idx()][port][class].inflight.as_ref().unwrap();
            let meta = PacketMeta { src: node, dst: adj.neighbor, kind: inf.frame.kind, size: inf.frame.size };
            (Wire::Data { seq: inf.seq, frame: inf.frame.clone() }, meta)
        };
        let outcome = self.net.transmit(node, port, meta, self.now);
        let departed = self.net.last_departure();
        let due = departed + self.rto.of(meta.size);
        let inf = self.tx[node.idx()][port][class].inflight.as_mut().unwrap();
        inf.due = due;
        if let DeliveryOutcome::Delivered { at } = outcome {
            self.queue.push(at, Event::Arrive { to: adj.neighbor, port: adj.remote_port, link: adj.link, wire });
        }
        self.arm_tick(node, due);
    }

    /// Makes sure `node` gets a timer event no later than `at`. Stands in
    /// for the packet generator that keeps an idle switch checking slots.
    fn arm_tick(&mut self, node: NodeId, at: Nanos) {
        if self.tick_at[node.idx()].is_none_or(|t| at < t) {
            self.tick_at[node.idx()] = Some(at);
            self.queue.push(at, Event::Tick(node));
        }
    }

    fn check_slot(&mut self, node: NodeId, port: Port, class: usize) {
        let due = match &self.tx[node.idx()][port][class].inflight {
            Some(inf) => self.now >= inf.due,
            None => false,
        };
        if due {
            self.counters.retransmissions += 1;
            self.transmit_slot(node, port, class);
        }
    }

    fn round_robin_check(&mut self, node: NodeId) {
        let slots = self.topo.degree(node) * 2;
        if slots == 0 || self.busy[node.idx()] == 0 {
            return;
        }
        let i = self.rr[node.idx()] % slots;
        self.rr[node.idx()] = (i + 1) % slots;
        self.check_slot(node, i / 2, i % 2);
    }

    /// Advances to the next event that matters to a driver.
    pub fn next(&mut self) -> Option<(Nanos, Delivery<B>)> {
        loop {
            let t = self.queue.peek_time()?;
            if t > self.horizon {
                self.hit_horizon = true;
                return None;
            }
            let (t, ev) = self.queue.pop().unwrap();
            self.now = t;
            match ev {
                Event::App { node, tag } => {
                    if self.scope.alive[node.idx()] {
                        return Some((t, Delivery::App { node, tag }));
                    }
                }
                Event::Tick(node) => {
                    if self.tick_at[node.idx()] != Some(t) {
                        continue;
                    }
                    self.tick_at[node.idx()] = None;
                    if !self.scope.alive[node.idx()] {
                        continue;
                    }
                    let mut next = None::<Nanos>;
                    for port in 0..self.topo.degree(node) {
                        for c in 0..2 {
                            self.check_slot(node, port, c);
                            if let Some(inf) = &self.tx[node.idx()][port][c].inflight {
                                next = Some(next.map_or(inf.due, |n| n.min(inf.due)));
                            }
                        }
                    }
                    if let Some(at) = next {
                        self.arm_tick(node, at);
                    }
                }
                Event::Arrive { to, port, link, wire } => {
                    if !self.scope.alive[to.idx()] || !self.net.arrival_survives(link, t) {
                        continue;
                    }
                    if let Some(d) = self.on_arrive(to, port, wire) {
                        self.round_robin_check(to);
                        return Some((t, d));
                    }
                    self.round_robin_check(to);
                }
            }
        }
    }

    fn on_arrive(&mut self, to: NodeId, port: Port, wire: Wire<B>) -> Option<Delivery<B>> {
        match wire {
            Wire::Data { seq, frame } => {
                let class = frame.class;
                let adj = self.topo.ports(to)[port];
                let ack = Wire::Ack { class, seq };
                let meta = PacketMeta { src: to, dst: adj.neighbor, kind: PacketKind::Ack, size: ACK_BYTES };
                if let DeliveryOutcome::Delivered { at } = self.net.transmit(to, port, meta, self.now) {
                    self.queue.push(at, Event::Arrive { to: adj.neighbor, port: adj.remote_port, link: adj.link, wire: ack });
                }
                let expect = &mut self.rx_expect[to.idx()][port][class as usize];
                if *expect != seq {
                    self.counters.duplicates += 1;
                    return None;
                }
                *expect = !seq;
                Some(Delivery::Msg { node: to, port, body: frame.body })
            }
            Wire::Ack { class, seq } => {
                let c = class as usize;
                let slot = &mut self.tx[to.idx()][port][c];
                match &slot.inflight {
                    Some(inf) if inf.seq == seq => {}
                    _ => return None,
                }
                slot.inflight = None;
                self.busy[to.idx()] -= 1;
                if let Some(frame) = slot.pending.pop_front() {
                    let seq = slot.next_seq;
                    slot.next_seq = !seq;
                    slot.inflight = Some(Inflight { frame, seq, due: 0 });
                    self.busy[to.idx()] += 1;
                    self.transmit_slot(to, port, c);
                }
                Some(Delivery::Acked { node: to, port, class })
            }
        }
    }
}
