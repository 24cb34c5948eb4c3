//! Global synchrony over a rooted tree.
//!
//! The root starts round `r` by sending SYNC down the tree. Every node
//! forwards it, runs its round, and answers COMPLETE once its own sends are
//! acknowledged and all its children have answered. COMPLETE carries a quiet
//! flag (no input, no output, nothing pending); a round in which the whole
//! tree is quiet ends the run with a terminating SYNC wave. Only the round
//! parity is charged on the wire; the body keeps the full number for
//! assertions.

use super::program::Ctx;
use super::transport::{Class, Delivery, Frame, Runtime};
use super::{packetize, EngineConfig, PhaseEnv, PhaseReport, Program, SyncTree};
use crate::simcore::{Network, PacketKind};
use crate::topo::{NodeId, Port};

#[derive(Debug, Clone)]
pub(crate) enum BetaBody<M> {
    Sync { round: u64, terminate: bool },
    Complete { round: u64, quiet: bool },
    Algo { round: u64, msgs: Vec<M> },
}

struct NodeSt<M> {
    round: Option<u64>,
    buf: [Vec<(Port, M)>; 2],
    children_done: usize,
    children_quiet: bool,
    own_quiet: bool,
    complete_sent: bool,
    halted: bool,
}

struct Beta<'a, P: Program> {
    rt: Runtime<BetaBody<P::Msg>>,
    cfg: &'a EngineConfig,
    tree: &'a SyncTree,
    progs: &'a mut [P],
    st: Vec<NodeSt<P::Msg>>,
    live: Vec<Vec<Port>>,
    neighbors: Vec<Vec<NodeId>>,
    halted_at: Vec<Option<u64>>,
    halted: usize,
    last_send_round: u64,
}

impl<'a, P: Program> Beta<'a, P> {
    fn ctl(&mut self, node: NodeId, port: Port, body: BetaBody<P::Msg>, kind: PacketKind) {
        let size = self.cfg.packet_size(0);
        self.rt.send(node, port, Frame { class: Class::Sync, kind, size, body });
    }

    fn ship(&mut self, node: NodeId, round: u64, out: Vec<(Port, P::Msg)>) {
        if out.is_empty() {
            return;
        }
        self.st[node.idx()].own_quiet = false;
        self.last_send_round = self.last_send_round.max(round);
        let mut by_port: std::collections::BTreeMap<Port, Vec<P::Msg>> = std::collections::BTreeMap::new();
        for (p, m) in out {
            by_port.entry(p).or_default().push(m);
        }
        let packets: Vec<(Port, Vec<P::Msg>, u32)> = by_port
            .into_iter()
            .flat_map(|(port, msgs)| packetize(self.cfg, &self.progs[node.idx()], msgs).into_iter().map(move |(m, b)| (port, m, b)))
            .collect();
        for (port, msgs, payload) in packets {
            let size = self.cfg.packet_size(payload);
            self.rt.send(node, port, Frame { class: Class::Algo, kind: PacketKind::Algo, size, body: BetaBody::Algo { round, msgs } });
        }
    }

    fn ctx_call<F>(&mut self, node: NodeId, round: u64, f: F) -> Vec<(Port, P::Msg)>
    where
        F: FnOnce(&mut P, &mut Ctx<P::Msg>),
    {
        let mut out = Vec::new();
        let now = self.rt.now();
        let i = node.idx();
        let (mut logical, mut wasted) = (0, 0);
        {
            let mut ctx = Ctx::new(node, round, now, self.cfg.arithmetic, &self.live[i], &self.neighbors[i], &mut out, &mut logical, &mut wasted);
            f(&mut self.progs[i], &mut ctx);
        }
        self.rt.counters.logical_sends += logical;
        self.rt.counters.wasted_copies += wasted;
        out
    }

    fn start_round(&mut self, node: NodeId, r: u64) {
        let i = node.idx();
        for &p in &self.tree.children[i].clone() {
            self.ctl(node, p, BetaBody::Sync { round: r, terminate: false }, PacketKind::Sync);
        }
        let st = &mut self.st[i];
        st.round = Some(r);
        st.children_done = 0;
        st.children_quiet = true;
        st.complete_sent = false;
        let inbox = std::mem::take(&mut st.buf[((r + 1) % 2) as usize]);
        st.own_quiet = inbox.is_empty();
        let out = self.ctx_call(node, r, |p, ctx| p.round(ctx, &inbox));
        self.ship(node, r, out);
        if self.progs[i].free_running(r) {
            let early = std::mem::take(&mut self.st[i].buf[(r % 2) as usize]);
            for (port, m) in early {
                self.deliver_free(node, r, port, m);
            }
        }
        self.try_complete(node);
    }

    fn deliver_free(&mut self, node: NodeId, r: u64, port: Port, m: P::Msg) {
        self.st[node.idx()].own_quiet = false;
        let out = self.ctx_call(node, r, |p, ctx| p.on_message(ctx, port, m));
        self.ship(node, r, out);
    }

    fn try_complete(&mut self, node: NodeId) {
        let i = node.idx();
        let st = &self.st[i];
        let Some(r) = st.round else { return };
        if st.complete_sent
            || st.halted
            || st.children_done < self.tree.children[i].len()
            || !self.progs[i].round_finished()
            || !self.rt.class_idle(node, Class::Algo)
        {
            return;
        }
        let quiet = st.own_quiet && st.children_quiet && self.progs[i].done();
        self.st[i].complete_sent = true;
        match self.tree.parent[i] {
            Some((_, up)) => self.ctl(node, up, BetaBody::Complete { round: r, quiet }, PacketKind::Complete),
            None if quiet => self.halt(node),
            None => self.start_round(node, r + 1),
        }
    }

    fn halt(&mut self, node: NodeId) {
        let i = node.idx();
        self.st[i].halted = true;
        self.halted += 1;
        self.halted_at[i] = Some(self.rt.now());
        let r = self.st[i].round.unwrap_or(0);
        for &p in &self.tree.children[i].clone() {
            self.ctl(node, p, BetaBody::Sync { round: r + 1, terminate: true }, PacketKind::Sync);
        }
    }

    fn on_delivery(&mut self, d: Delivery<BetaBody<P::Msg>>) {
        match d {
            Delivery::Msg { node, port, body } => {
                if self.st[node.idx()].halted {
                    return;
                }
                match body {
                    BetaBody::Sync { terminate: true, .. } => self.halt(node),
                    BetaBody::Sync { round, .. } => self.start_round(node, round),
                    BetaBody::Complete { round, quiet } => {
                        let st = &mut self.st[node.idx()];
                        debug_assert_eq!(Some(round), st.round);
                        st.children_done += 1;
                        st.children_quiet &= quiet;
                        self.try_complete(node);
                    }
                    BetaBody::Algo { round, msgs } => {
                        let cur = self.st[node.idx()].round;
                        if cur == Some(round) && self.progs[node.idx()].free_running(round) {
                            for m in msgs {
                                self.deliver_free(node, round, port, m);
                            }
                            self.try_complete(node);
                        } else {
                            let b = &mut self.st[node.idx()].buf[(round % 2) as usize];
                            b.extend(msgs.into_iter().map(|m| (port, m)));
                        }
                    }
                }
            }
            Delivery::Acked { node, class: Class::Algo, .. } => self.try_complete(node),
            _ => {}
        }
    }
}

/// Runs `progs` (one per node) under the β synchronizer over `tree`.
pub fn run_beta<P: Program>(net: Network, env: PhaseEnv, tree: &SyncTree, progs: &mut [P]) -> (Network, PhaseReport) {
    let topo = net.topology().clone();
    let t_rto = env.cfg.rto(&topo);
    let mut rt = Runtime::new(net, env.scope, t_rto, env.start);
    rt.set_horizon(env.horizon);
    let n = topo.node_count();
    let live = topo.nodes().map(|v| rt.live_ports(v)).collect();
    let neighbors = topo.nodes().map(|v| topo.neighbors(v).collect()).collect();
    let st = (0..n)
        .map(|_| NodeSt {
            round: None,
            buf: [Vec::new(), Vec::new()],
            children_done: 0,
            children_quiet: true,
            own_quiet: true,
            complete_sent: false,
            halted: false,
        })
        .collect();
    let mut b = Beta {
        rt,
        cfg: env.cfg,
        tree,
        progs,
        st,
        live,
        neighbors,
        halted_at: vec![None; n],
        halted: 0,
        last_send_round: 0,
    };
    let members = tree.members().count();
    b.start_round(tree.root, 0);
    while b.halted < members {
        match b.rt.next() {
            Some((_, d)) => b.on_delivery(d),
            None => break,
        }
    }
    let converged = b.halted == members;
    let end = b.halted_at.iter().flatten().copied().max().unwrap_or(env.start).max(env.start);
    let report = PhaseReport {
        start: env.start,
        end: if converged { end } else { b.rt.now() },
        converged,
        rounds: b.last_send_round,
        halted_at: b.halted_at,
        counters: b.rt.counters.clone(),
    };
    (b.rt.into_network(), report)
}
