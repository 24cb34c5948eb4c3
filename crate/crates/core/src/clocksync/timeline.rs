//! Per-node record of received synchronizations and the ε(t) it implies.

use std::collections::VecDeque;

use super::ClockConfig;
use crate::engine::SyncTree;
use crate::simcore::Nanos;
use crate::topo::{LinkId, NodeId, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct SyncEvent {
    pub t: Nanos,
    /// Depth of the node in the tree that delivered the sync.
    pub depth: u32,
}

#[derive(Debug, Clone)]
pub struct SyncLog {
    pub events: Vec<Vec<SyncEvent>>,
}

impl SyncLog {
    pub fn new(n: usize) -> Self {
        SyncLog { events: vec![Vec::new(); n] }
    }

    pub fn push(&mut self, v: NodeId, t: Nanos, depth: u32) {
        self.events[v.idx()].push(SyncEvent { t, depth });
    }

    pub fn sort(&mut self) {
        for e in &mut self.events {
            e.sort_unstable();
        }
    }

    /// Latest sync of `v` at or before `t`.
    pub fn last_before(&self, v: NodeId, t: Nanos) -> Option<SyncEvent> {
        let e = &self.events[v.idx()];
        let i = e.partition_point(|s| s.t <= t);
        i.checked_sub(1).map(|i| e[i])
    }

    pub fn epsilon(&self, cfg: &ClockConfig, v: NodeId, t: Nanos) -> f64 {
        match self.last_before(v, t) {
            Some(s) => cfg.epsilon(s.depth, Some(s.t), t),
            None => cfg.epsilon(0, None, t),
        }
    }

    /// System-wide ε (maximum over `nodes`) sampled at `from, from+step, …`
    /// up to and including `to`.
    pub fn max_series(&self, cfg: &ClockConfig, nodes: &[NodeId], from: Nanos, to: Nanos, step: Nanos) -> Vec<(Nanos, f64)> {
        let mut cursor: Vec<usize> = nodes.iter().map(|v| self.events[v.idx()].partition_point(|s| s.t <= from)).collect();
        let mut out = Vec::with_capacity(((to.saturating_sub(from)) / step + 1) as usize);
        let mut t = from;
        while t <= to {
            let mut max = 0.0f64;
            for (k, v) in nodes.iter().enumerate() {
                let e = &self.events[v.idx()];
                while cursor[k] < e.len() && e[cursor[k]].t <= t {
                    cursor[k] += 1;
                }
                let eps = match cursor[k].checked_sub(1) {
                    Some(i) => cfg.epsilon(e[i].depth, Some(e[i].t), t),
                    None => f64::INFINITY,
                };
                max = max.max(eps);
            }
            out.push((t, max));
            t += step;
        }
        out
    }
}

/// Time for a sync message to travel from the root of `tree` to each of its
/// members, given per-link hop latencies.
pub fn tree_latency(t: &Topology, tree: &SyncTree, hop: impl Fn(LinkId) -> Nanos) -> Vec<Option<Nanos>> {
    let mut lat = vec![None; t.node_count()];
    lat[tree.root.idx()] = Some(0);
    let mut q = VecDeque::from([tree.root]);
    while let Some(u) = q.pop_front() {
        let base = lat[u.idx()].unwrap();
        for &p in &tree.children[u.idx()] {
            let a = t.ports(u)[p];
            lat[a.neighbor.idx()] = Some(base + hop(a.link));
            q.push_back(a.neighbor);
        }
    }
    lat
}

/// Logs syncs sent by the root of `tree` at `first, first+interval, …`
/// (send times strictly before `until`). A member accepts an arrival when
/// `accept(node, arrival)` holds.
pub fn emit_syncs(
    log: &mut SyncLog,
    tree: &SyncTree,
    lat: &[Option<Nanos>],
    first: Nanos,
    until: Nanos,
    interval: Nanos,
    accept: impl Fn(NodeId, Nanos) -> bool,
) {
    for v in tree.members() {
        let (Some(l), Some(d)) = (lat[v.idx()], tree.depth[v.idx()]) else { continue };
        let mut send = first;
        while send < until {
            let at = send + l;
            if accept(v, at) {
                log.push(v, at, d);
            }
            send += interval;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sawtooth_between_syncs() {
        let cfg = ClockConfig { max_drift_rate: 1e-3, ..Default::default() };
        let mut log = SyncLog::new(2);
        log.push(NodeId(0), 0, 0);
        log.push(NodeId(0), 100, 0);
        log.push(NodeId(1), 10, 2);
        log.sort();
        let s = log.max_series(&cfg, &[NodeId(0), NodeId(1)], 10, 150, 50);
        assert_eq!(s.len(), 3);
        assert!((s[0].1 - 10.0).abs() < 1e-9);
        assert!((s[1].1 - 10.05).abs() < 1e-9);
        assert!((s[2].1 - 10.1).abs() < 1e-9);
        assert!(log.epsilon(&cfg, NodeId(1), 5).is_infinite());
    }
}
