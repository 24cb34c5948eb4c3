//! Local synchrony: every round, every node sends one envelope to each live
//! neighbor (its messages for that neighbor, or an empty "no-msg"), and
//! executes round `r+1` once it holds a round-`r` envelope from all of them.
//!
//! Termination piggybacks on the envelopes sent to the parent in a rooted
//! tree. A node is quiet in round `r` if it received nothing, sent nothing
//! and has no pending work. Each node reports the interval of rounds over
//! which its whole subtree is known to have been quiet; these intervals are
//! historical facts, so the root may intersect reports of different ages.
//! A non-empty intersection at the root means some round was globally
//! quiet, after which nothing can ever be sent again; the root then sends a
//! terminate wave down the tree.

use std::collections::VecDeque;

use super::program::Ctx;
use super::transport::{Class, Delivery, Frame, Runtime};
use super::{packetize, EngineConfig, PhaseEnv, PhaseReport, Program, SyncTree};
use crate::simcore::{Network, PacketKind};
use crate::topo::{NodeId, Port};

/// Extra bytes when an envelope carries a quiescence report.
const REPORT_BYTES: u32 = 4;

#[derive(Debug, Clone)]
pub(crate) enum AlphaBody<M> {
    Env { round: u64, eor: bool, msgs: Vec<M>, report: Option<(u64, u64)> },
    Terminate,
}

struct NodeSt<M> {
    round: Option<u64>,
    rx: Vec<VecDeque<Vec<M>>>,
    partial: Vec<Vec<M>>,
    quiet_since: Option<u64>,
    child_report: Vec<Option<(u64, u64)>>,
    halted: bool,
}

fn intersect(a: (u64, u64), b: (u64, u64)) -> Option<(u64, u64)> {
    let lo = a.0.max(b.0);
    let hi = a.1.min(b.1);
    (lo <= hi).then_some((lo, hi))
}

struct Alpha<'a, P: Program> {
    rt: Runtime<AlphaBody<P::Msg>>,
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

impl<'a, P: Program> Alpha<'a, P> {
    fn subtree_report(&self, node: NodeId) -> Option<(u64, u64)> {
        let i = node.idx();
        let st = &self.st[i];
        let mut acc = (st.quiet_since?, st.round?);
        for r in &st.child_report {
            acc = intersect(acc, (*r)?)?;
        }
        Some(acc)
    }

    fn ready(&self, node: NodeId) -> bool {
        let st = &self.st[node.idx()];
        !st.halted && self.live[node.idx()].iter().all(|&p| !st.rx[p].is_empty())
    }

    fn execute(&mut self, node: NodeId) {
        let i = node.idx();
        let r = self.st[i].round.map_or(0, |r| r + 1);
        let mut inbox = Vec::new();
        if r > 0 {
            for &p in &self.live[i] {
                let msgs = self.st[i].rx[p].pop_front().expect("envelope present");
                inbox.extend(msgs.into_iter().map(|m| (p, m)));
            }
        }
        let mut out = Vec::new();
        let (mut logical, mut wasted) = (0, 0);
        {
            let now = self.rt.now();
            let mut ctx = Ctx::new(node, r, now, self.cfg.arithmetic, &self.live[i], &self.neighbors[i], &mut out, &mut logical, &mut wasted);
            self.progs[i].round(&mut ctx, &inbox);
        }
        self.rt.counters.logical_sends += logical;
        self.rt.counters.wasted_copies += wasted;
        let quiet = inbox.is_empty() && out.is_empty() && self.progs[i].done();
        if !out.is_empty() {
            self.last_send_round = self.last_send_round.max(r);
        }
        let st = &mut self.st[i];
        st.round = Some(r);
        st.quiet_since = if quiet { Some(st.quiet_since.unwrap_or(r)) } else { None };

        let report = self.subtree_report(node);
        if self.tree.parent[i].is_none() && self.tree.contains(node) && report.is_some() {
            self.halt(node);
            return;
        }
        let parent_port = self.tree.parent[i].map(|(_, p)| p);
        let mut by_port: Vec<Vec<P::Msg>> = vec![Vec::new(); self.neighbors[i].len()];
        for (p, m) in out {
            by_port[p].push(m);
        }
        for &p in &self.live[i].clone() {
            let msgs = std::mem::take(&mut by_port[p]);
            let rep = if Some(p) == parent_port { report } else { None };
            let mut packets = packetize(self.cfg, &self.progs[i], msgs);
            if packets.is_empty() {
                packets.push((Vec::new(), 0));
            }
            let last = packets.len() - 1;
            for (k, (msgs, payload)) in packets.into_iter().enumerate() {
                let eor = k == last;
                let rep = if eor { rep } else { None };
                let payload = payload + if rep.is_some() { REPORT_BYTES } else { 0 };
                let size = self.cfg.packet_size(payload);
                let body = AlphaBody::Env { round: r, eor, msgs, report: rep };
                self.rt.send(node, p, Frame { class: Class::Algo, kind: PacketKind::Algo, size, body });
            }
        }
    }

    fn run_ready(&mut self, node: NodeId) {
        while self.ready(node) {
            self.execute(node);
        }
    }

    fn halt(&mut self, node: NodeId) {
        let i = node.idx();
        if self.st[i].halted {
            return;
        }
        self.st[i].halted = true;
        self.halted += 1;
        self.halted_at[i] = Some(self.rt.now());
        let size = self.cfg.packet_size(0);
        for &p in &self.tree.children[i].clone() {
            self.rt.send(node, p, Frame { class: Class::Sync, kind: PacketKind::Sync, size, body: AlphaBody::Terminate });
        }
    }

    fn on_delivery(&mut self, d: Delivery<AlphaBody<P::Msg>>) {
        let Delivery::Msg { node, port, body } = d else { return };
        let i = node.idx();
        if self.st[i].halted {
            return;
        }
        match body {
            AlphaBody::Terminate => self.halt(node),
            AlphaBody::Env { round, eor, msgs, report } => {
                let st = &mut self.st[i];
                debug_assert_eq!(round, st.round.unwrap_or(0) + st.rx[port].len() as u64, "envelopes arrive in round order");
                st.partial[port].extend(msgs);
                if let Some(rep) = report {
                    if let Some(slot) = self.tree.children[i].iter().position(|&c| c == port) {
                        st.child_report[slot] = Some(rep);
                    }
                }
                if eor {
                    let env = std::mem::take(&mut st.partial[port]);
                    st.rx[port].push_back(env);
                }
                if report.is_some() && self.tree.parent[i].is_none() && self.subtree_report(node).is_some() {
                    self.halt(node);
                    return;
                }
                self.run_ready(node);
            }
        }
    }
}

/// Runs `progs` under the α synchronizer; `tree` only carries termination.
pub fn run_alpha<P: Program>(net: Network, env: PhaseEnv, tree: &SyncTree, progs: &mut [P]) -> (Network, PhaseReport) {
    let topo = net.topology().clone();
    let t_rto = env.cfg.rto(&topo);
    let mut rt = Runtime::new(net, env.scope, t_rto, env.start);
    rt.set_horizon(env.horizon);
    let n = topo.node_count();
    let live: Vec<Vec<Port>> = topo.nodes().map(|v| rt.live_ports(v)).collect();
    let neighbors: Vec<Vec<NodeId>> = topo.nodes().map(|v| topo.neighbors(v).collect()).collect();
    let st = topo
        .nodes()
        .map(|v| NodeSt {
            round: None,
            rx: vec![VecDeque::new(); topo.degree(v)],
            partial: vec![Vec::new(); topo.degree(v)],
            quiet_since: None,
            child_report: vec![None; tree.children[v.idx()].len()],
            halted: false,
        })
        .collect();
    let mut a = Alpha { rt, cfg: env.cfg, tree, progs, st, live, neighbors, halted_at: vec![None; n], halted: 0, last_send_round: 0 };
    let members: Vec<NodeId> = tree.members().collect();
    for &v in &members {
        a.execute(v);
    }
    for &v in &members {
        a.run_ready(v);
    }
    while a.halted < members.len() {
        match a.rt.next() {
            Some((_, d)) => a.on_delivery(d),
            None => break,
        }
    }
    let converged = a.halted == members.len();
    let end = a.halted_at.iter().flatten().copied().max().unwrap_or(env.start).max(env.start);
    let report = PhaseReport {
        start: env.start,
        end: if converged { end } else { a.rt.now() },
        converged,
        rounds: a.last_send_round,
        halted_at: a.halted_at,
        counters: a.rt.counters.clone(),
    };
    (a.rt.into_network(), report)
}
