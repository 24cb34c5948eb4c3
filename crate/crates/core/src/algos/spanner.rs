//! Baswana–Sen `(2k-1)`-spanner for unweighted graphs, distributed and as a
//! centralized twin that consumes the same random coins.
//!
//! A cluster is sampled with probability `n^(-1/k)` using a coin derived
//! from the seed, the cluster center and the phase, so every member
//! evaluates it locally instead of waiting for the center to broadcast it.
//! Each phase is one round: a node decides on the announcements it received
//! and, in the same round, announces its (possibly new) cluster and coin for
//! the next phase on its remaining edges. On receipt, edges to unclustered
//! neighbors and intra-cluster edges are dropped, and each node of an
//! unsampled cluster either joins the adjacent sampled cluster through its
//! lowest-id neighbor there, or, if none exists, keeps one edge (again to
//! the lowest-id neighbor) into every adjacent cluster and leaves the
//! clustering. The final phase keeps one edge into every adjacent cluster.

use std::collections::BTreeMap;

use crate::engine::{Arith, Ctx, Program, Scope};
use crate::simcore::rng::substream;
use crate::topo::{LinkId, NodeId, Port, Topology};

pub const SPANNER_PAYLOAD: u32 = 5;
pub const SPANNER_STREAM: &str = "algo.spanner";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpannerMsg {
    Announce { cluster: u32, sampled: bool },
    Join,
    Add,
}

/// Sampling probability `n^(-1/k)`.
pub fn sample_prob(n: usize, k: u32) -> f64 {
    (n as f64).powf(-1.0 / k as f64)
}

/// Total rounds up to and including the last sends.
pub fn spanner_rounds(k: u32) -> u64 {
    k as u64 + 1
}

/// Whether `cluster` is sampled in `phase`.
pub fn coin(seed: u64, cluster: u32, phase: u32, p: f64, arith: Arith) -> bool {
    let key = (cluster as u64) << 16 | phase as u64;
    arith.bernoulli(p, &mut substream(seed, SPANNER_STREAM, key))
}

#[derive(Debug, Clone)]
pub struct Spanner {
    k: u32,
    p: f64,
    seed: u64,
    pub cluster: Option<u32>,
    sampled: bool,
    /// Remaining edges of the working graph.
    work: Vec<bool>,
    /// Edges kept in the spanner, as seen from this endpoint.
    pub kept: Vec<bool>,
    announced: Vec<Option<(u32, bool)>>,
}

impl Spanner {
    pub fn new(id: u32, k: u32, n: usize, seed: u64) -> Self {
        Spanner {
            k,
            p: sample_prob(n, k),
            seed,
            cluster: Some(id),
            sampled: false,
            work: Vec::new(),
            kept: Vec::new(),
            announced: Vec::new(),
        }
    }

    fn announce(&mut self, ctx: &mut Ctx<SpannerMsg>) {
        if let Some(c) = self.cluster {
            let msg = SpannerMsg::Announce { cluster: c, sampled: self.sampled };
            for p in 0..self.work.len() {
                if self.work[p] {
                    ctx.send(p, msg);
                }
            }
        }
    }

    /// Drops edges that received no announcement or lead into the own
    /// cluster; returns the remaining neighbors grouped by cluster, each
    /// group sorted by neighbor id.
    fn prune(&mut self, ctx: &Ctx<SpannerMsg>) -> BTreeMap<u32, (bool, Vec<(NodeId, Port)>)> {
        let mut by_cluster: BTreeMap<u32, (bool, Vec<(NodeId, Port)>)> = BTreeMap::new();
        for p in 0..self.work.len() {
            if !self.work[p] {
                continue;
            }
            match self.announced[p] {
                Some((c, s)) if Some(c) != self.cluster => {
                    let e = by_cluster.entry(c).or_insert((s, Vec::new()));
                    e.1.push((ctx.neighbor(p), p));
                }
                _ => self.work[p] = false,
            }
        }
        for (_, ports) in by_cluster.values_mut() {
            ports.sort_unstable();
        }
        by_cluster
    }

    fn keep(&mut self, ctx: &mut Ctx<SpannerMsg>, p: Port, msg: SpannerMsg) {
        self.kept[p] = true;
        ctx.send(p, msg);
    }

    fn decide(&mut self, ctx: &mut Ctx<SpannerMsg>) {
        let groups = self.prune(ctx);
        if self.cluster.is_none() {
            return;
        }
        if self.sampled {
            return;
        }
        let join = groups.iter().filter(|(_, (s, _))| *s).map(|(&c, (_, ps))| (ps[0], c)).min();
        match join {
            Some(((_, p), c)) => {
                self.cluster = Some(c);
                for &(_, q) in &groups[&c].1 {
                    self.work[q] = false;
                }
                self.keep(ctx, p, SpannerMsg::Join);
            }
            None => {
                for (_, ps) in groups.values() {
                    self.keep(ctx, ps[0].1, SpannerMsg::Add);
                }
                self.work.iter_mut().for_each(|w| *w = false);
                self.cluster = None;
            }
        }
    }

    fn finish(&mut self, ctx: &mut Ctx<SpannerMsg>) {
        let groups = self.prune(ctx);
        for (_, ps) in groups.values() {
            self.keep(ctx, ps[0].1, SpannerMsg::Add);
        }
    }
}

impl Program for Spanner {
    type Msg = SpannerMsg;

    fn payload_bytes(&self, _: &SpannerMsg) -> u32 {
        SPANNER_PAYLOAD
    }

    fn round(&mut self, ctx: &mut Ctx<SpannerMsg>, inbox: &[(Port, SpannerMsg)]) {
        if ctx.round == 0 {
            self.work = vec![false; ctx.port_count()];
            self.kept = vec![false; ctx.port_count()];
            for &p in ctx.live_ports() {
                self.work[p] = true;
            }
        }
        for &(p, m) in inbox {
            match m {
                SpannerMsg::Join | SpannerMsg::Add => self.kept[p] = true,
                SpannerMsg::Announce { cluster, sampled } => {
                    if self.work[p] {
                        self.announced[p] = Some((cluster, sampled));
                    }
                }
            }
        }
        let r = ctx.round;
        let k = self.k as u64;
        if r >= 1 && r < k {
            self.decide(ctx);
        }
        if r == k {
            self.finish(ctx);
        }
        if r < k {
            self.announced = vec![None; ctx.port_count()];
            let phase = r as u32 + 1;
            self.sampled = phase < self.k && self.cluster.is_some_and(|c| coin(self.seed, c, phase, self.p, ctx.arith));
            self.announce(ctx);
        }
    }

    fn done(&self) -> bool {
        true
    }
}

/// Runs the same algorithm centrally. Returns the kept links.
pub fn spanner_central(t: &Topology, scope: &Scope, k: u32, seed: u64, arith: Arith) -> Vec<bool> {
    let n = t.node_count();
    let p = sample_prob(n, k);
    let mut cluster: Vec<Option<u32>> = (0..n).map(|v| scope.alive[v].then_some(v as u32)).collect();
    let mut work: Vec<Vec<bool>> = t
        .nodes()
        .map(|v| t.ports(v).iter().map(|a| scope.alive[v.idx()] && scope.alive[a.neighbor.idx()] && scope.link_ok(a.link)).collect())
        .collect();
    let mut kept = vec![false; t.edge_count()];

    // Snapshot-based pruning shared by every phase: an edge survives if the
    // far end announced on it (it is clustered and still holds the edge) and
    // the two ends sit in different clusters.
    let prune = |cluster: &[Option<u32>], work: &mut Vec<Vec<bool>>| {
        let snap = work.clone();
        for v in t.nodes() {
            for (pi, a) in t.ports(v).iter().enumerate() {
                if !snap[v.idx()][pi] {
                    continue;
                }
                let u = a.neighbor;
                let back = t.port_to(u, v).unwrap();
                let ok = cluster[u.idx()].is_some() && snap[u.idx()][back] && cluster[u.idx()] != cluster[v.idx()];
                work[v.idx()][pi] = ok;
            }
        }
    };
    let groups = |v: NodeId, cluster: &[Option<u32>], work: &[Vec<bool>]| {
        let mut g: BTreeMap<u32, Vec<(NodeId, usize)>> = BTreeMap::new();
        for (pi, a) in t.ports(v).iter().enumerate() {
            if work[v.idx()][pi] {
                g.entry(cluster[a.neighbor.idx()].unwrap()).or_default().push((a.neighbor, pi));
            }
        }
        for ps in g.values_mut() {
            ps.sort_unstable();
        }
        g
    };

    for phase in 1..k {
        let mut sampled = vec![false; n];
        for v in 0..n {
            if cluster[v] == Some(v as u32) {
                sampled[v] = coin(seed, v as u32, phase, p, arith);
            }
        }
        let announced_work = work.clone();
        // edges a node holds but the far end dropped are discarded first
        let mut next_work = announced_work.clone();
        prune(&cluster, &mut next_work);
        let mut next_cluster = cluster.clone();
        for v in t.nodes() {
            let Some(c) = cluster[v.idx()] else { continue };
            if sampled[c as usize] {
                continue;
            }
            let g = groups(v, &cluster, &next_work);
            let join = g.iter().filter(|(&cc, _)| sampled[cc as usize]).map(|(&cc, ps)| (ps[0], cc)).min();
            match join {
                Some(((_, pi), cc)) => {
                    next_cluster[v.idx()] = Some(cc);
                    kept[t.ports(v)[pi].link.idx()] = true;
                    for &(_, q) in &g[&cc] {
                        next_work[v.idx()][q] = false;
                    }
                }
                None => {
                    for ps in g.values() {
                        kept[t.ports(v)[ps[0].1].link.idx()] = true;
                    }
                    next_work[v.idx()].iter_mut().for_each(|w| *w = false);
                    next_cluster[v.idx()] = None;
                }
            }
        }
        cluster = next_cluster;
        work = next_work;
    }
    prune(&cluster, &mut work);
    for v in t.nodes() {
        for ps in groups(v, &cluster, &work).values() {
            kept[t.ports(v)[ps[0].1].link.idx()] = true;
        }
    }
    kept
}

/// Links kept by a distributed run.
pub fn kept_links(t: &Topology, progs: &[Spanner]) -> Vec<bool> {
    let mut kept = vec![false; t.edge_count()];
    for v in t.nodes() {
        for (pi, a) in t.ports(v).iter().enumerate() {
            if progs[v.idx()].kept.get(pi).copied().unwrap_or(false) {
                kept[a.link.idx()] = true;
            }
        }
    }
    kept
}

pub fn kept_link_ids(kept: &[bool]) -> Vec<LinkId> {
    kept.iter().enumerate().filter(|(_, &k)| k).map(|(i, _)| LinkId(i as u32)).collect()
}
