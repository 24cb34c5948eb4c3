//! Reference implementations used as test oracles. They work on plain
//! adjacency lists and share no code with the crate's own graph routines.
#![allow(dead_code)]

use std::collections::VecDeque;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reactsim::engine::{EngineConfig, PhaseEnv, Scope};
use reactsim::simcore::Network;
use reactsim::topo::{LinkParams, NodeId, Topology};

pub fn adjacency(t: &Topology) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); t.node_count()];
    for l in t.links() {
        adj[l.a.idx()].push(l.b.idx());
        adj[l.b.idx()].push(l.a.idx());
    }
    adj
}

pub fn adjacency_of_links(t: &Topology, keep: &[bool]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); t.node_count()];
    for (i, l) in t.links().iter().enumerate() {
        if keep[i] {
            adj[l.a.idx()].push(l.b.idx());
            adj[l.b.idx()].push(l.a.idx());
        }
    }
    adj
}

pub fn bfs_dist(adj: &[Vec<usize>], s: usize) -> Vec<Option<u32>> {
    let mut d = vec![None; adj.len()];
    d[s] = Some(0);
    let mut q = VecDeque::from([s]);
    while let Some(v) = q.pop_front() {
        for &u in &adj[v] {
            if d[u].is_none() {
                d[u] = Some(d[v].unwrap() + 1);
                q.push_back(u);
            }
        }
    }
    d
}

/// Kruskal on `(weight, link id)` keys; returns the sorted link ids.
pub fn kruskal(t: &Topology, w: &[u32]) -> Vec<u32> {
    let mut parent: Vec<usize> = (0..t.node_count()).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let next = p[y];
            p[y] = r;
            y = next;
        }
        r
    }
    let mut order: Vec<usize> = (0..t.edge_count()).collect();
    order.sort_by_key(|&i| (w[i], i));
    let mut out = Vec::new();
    for i in order {
        let l = &t.links()[i];
        let (a, b) = (find(&mut parent, l.a.idx()), find(&mut parent, l.b.idx()));
        if a != b {
            parent[a] = b;
            out.push(i as u32);
        }
    }
    out.sort_unstable();
    out
}

/// Exhaustive minimum-weight vertex cover.
pub fn min_vertex_cover(adj: &[Vec<usize>], w: &[u32]) -> u64 {
    let n = adj.len();
    assert!(n <= 20);
    let mut best = u64::MAX;
    for mask in 0u32..(1 << n) {
        let covers = (0..n).all(|v| adj[v].iter().all(|&u| mask >> v & 1 == 1 || mask >> u & 1 == 1));
        if covers {
            let cost = (0..n).filter(|&v| mask >> v & 1 == 1).map(|v| w[v] as u64).sum();
            best = best.min(cost);
        }
    }
    best
}

/// Random connected graph: a random spanning tree plus `extra` edges.
pub fn random_connected(n: usize, extra: usize, seed: u64) -> Topology {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Topology::with_nodes(n);
    let mut have = std::collections::HashSet::new();
    for v in 1..n {
        let u = rng.gen_range(0..v);
        t.add_link(NodeId(u as u32), NodeId(v as u32), LinkParams::default()).unwrap();
        have.insert((u, v));
    }
    let mut tries = 0;
    let mut added = 0;
    while added < extra && tries < extra * 20 {
        tries += 1;
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        let (a, b) = (a.min(b), a.max(b));
        if a == b || !have.insert((a, b)) {
            continue;
        }
        t.add_link(NodeId(a as u32), NodeId(b as u32), LinkParams::default()).unwrap();
        added += 1;
    }
    t
}

pub fn network(t: &Topology, cfg: &EngineConfig, seed: u64) -> Network {
    Network::new(Arc::new(t.clone()), cfg.net_config(), seed)
}

pub fn env<'a>(t: &Topology, cfg: &'a EngineConfig) -> PhaseEnv<'a> {
    PhaseEnv::new(cfg, Scope::full(t), 0)
}
