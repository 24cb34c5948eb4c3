use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{LinkParams, NodeId, Role, Topology};
use crate::error::{Error, Result};
use crate::simcore::rng::stream;

/// Index arithmetic for the standard three-level k-ary fat-tree.
///
/// Node ids are laid out as `(k/2)²` core switches first, then for every pod
/// its `k/2` aggregation switches followed by its `k/2` ToR switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FatTreeLayout {
    pub k: usize,
}

impl FatTreeLayout {
    pub fn half(&self) -> usize {
        self.k / 2
    }

    pub fn core_count(&self) -> usize {
        self.half() * self.half()
    }

    pub fn node_count(&self) -> usize {
        5 * self.k * self.k / 4
    }

    /// Core `index` of core group `group`; group `g` attaches to aggregation
    /// switch `g` of every pod.
    pub fn core(&self, group: usize, index: usize) -> NodeId {
        NodeId::from(group * self.half() + index)
    }

    pub fn agg(&self, pod: usize, i: usize) -> NodeId {
        NodeId::from(self.core_count() + pod * self.k + i)
    }

    pub fn tor(&self, pod: usize, i: usize) -> NodeId {
        NodeId::from(self.core_count() + pod * self.k + self.half() + i)
    }

    /// Pod of a non-core switch.
    pub fn pod_of(&self, n: NodeId) -> Option<usize> {
        let i = n.idx();
        (i >= self.core_count()).then(|| (i - self.core_count()) / self.k)
    }
}

/// Standard three-level fat-tree: `5k²/4` switches and `k³/2` links.
pub fn build_fat_tree(k: usize) -> Result<Topology> {
    if k < 4 || !k.is_multiple_of(2) {
        return Err(Error::param(format!("fat-tree arity must be even and >= 4, got {k}")));
    }
    let lay = FatTreeLayout { k };
    let h = lay.half();
    let mut t = Topology::with_nodes(lay.node_count());
    let params = LinkParams::default();
    for g in 0..h {
        for i in 0..h {
            t.set_role(lay.core(g, i), Role::Core);
        }
    }
    for pod in 0..k {
        for i in 0..h {
            t.set_role(lay.agg(pod, i), Role::Aggregation);
            t.set_role(lay.tor(pod, i), Role::Tor);
        }
    }
    // Core links first so that each aggregation switch's low ports face up.
    for pod in 0..k {
        for g in 0..h {
            for i in 0..h {
                t.add_link(lay.agg(pod, g), lay.core(g, i), params)?;
            }
        }
    }
    for pod in 0..k {
        for a in 0..h {
            for r in 0..h {
                t.add_link(lay.agg(pod, a), lay.tor(pod, r), params)?;
            }
        }
    }
    Ok(t)
}

/// Random `r`-regular switch graph built by random stub matching, with edge
/// swaps to escape dead ends. Deterministic for a fixed seed.
pub fn build_jellyfish(n: usize, r: usize, seed: u64) -> Result<Topology> {
    if r >= n || !(n * r).is_multiple_of(2) || n < 2 {
        return Err(Error::param(format!("no simple {r}-regular graph on {n} nodes")));
    }
    let mut rng = stream(seed, "topo.jellyfish");
    let mut adj: Vec<HashSet<u32>> = vec![HashSet::new(); n];
    let mut edges: Vec<(u32, u32)> = Vec::with_capacity(n * r / 2);
    let mut free: Vec<u32> = (0..n as u32).collect();

    let add = |adj: &mut Vec<HashSet<u32>>, edges: &mut Vec<(u32, u32)>, u: u32, v: u32| {
        adj[u as usize].insert(v);
        adj[v as usize].insert(u);
        edges.push((u, v));
    };

    loop {
        free.retain(|&u| adj[u as usize].len() < r);
        if free.is_empty() {
            break;
        }
        let mut progressed = false;
        if free.len() >= 2 {
            for _ in 0..64 {
                let u = free[rng.gen_range(0..free.len())];
                let v = free[rng.gen_range(0..free.len())];
                if u != v && !adj[u as usize].contains(&v) {
                    add(&mut adj, &mut edges, u, v);
                    progressed = true;
                    break;
                }
            }
            if !progressed && free.len() <= 4 * r + 8 {
                // Exhaustive search for a joinable pair among few free nodes.
                let mut pairs = Vec::new();
                for (i, &u) in free.iter().enumerate() {
                    for &v in &free[i + 1..] {
                        if !adj[u as usize].contains(&v) {
                            pairs.push((u, v));
                        }
                    }
                }
                if let Some(&(u, v)) = pairs.choose(&mut rng) {
                    add(&mut adj, &mut edges, u, v);
                    progressed = true;
                }
            }
        }
        if progressed {
            continue;
        }
        // Dead end: swap an existing edge (a, b) into the free stubs.
        let x = free[0];
        let y = if r - adj[x as usize].len() >= 2 { x } else { free[1.min(free.len() - 1)] };
        let mut swapped = false;
        for _ in 0..10_000 {
            let ei = rng.gen_range(0..edges.len());
            let (a, b) = edges[ei];
            let (a, b) = if rng.gen_bool(0.5) { (a, b) } else { (b, a) };
            let ok = a != x
                && b != y
                && a != y
                && b != x
                && !adj[x as usize].contains(&a)
                && !adj[y as usize].contains(&b);
            if ok {
                edges.swap_remove(ei);
                adj[a as usize].remove(&b);
                adj[b as usize].remove(&a);
                add(&mut adj, &mut edges, x, a);
                add(&mut adj, &mut edges, y, b);
                swapped = true;
                break;
            }
        }
        if !swapped {
            return Err(Error::param("jellyfish construction failed to converge"));
        }
    }

    let mut sorted: Vec<(u32, u32)> =
        edges.into_iter().map(|(u, v)| if u < v { (u, v) } else { (v, u) }).collect();
    sorted.sort_unstable();
    let mut t = Topology::with_nodes(n);
    let params = LinkParams::default();
    for (u, v) in sorted {
        t.add_link(NodeId(u), NodeId(v), params)?;
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topo::graph::bfs_distances;

    #[test]
    fn fat_tree_counts() {
        let t = build_fat_tree(4).unwrap();
        assert_eq!((t.node_count(), t.edge_count()), (20, 32));
        let t = build_fat_tree(8).unwrap();
        assert_eq!((t.node_count(), t.edge_count()), (80, 256));
        // connected
        assert!(bfs_distances(&t, NodeId(0)).iter().all(|d| d.is_some()));
        t.validate().unwrap();
    }

    #[test]
    fn fat_tree_rejects_bad_arity() {
        assert!(build_fat_tree(5).is_err());
        assert!(build_fat_tree(2).is_err());
    }

    #[test]
    fn fat_tree_tor_attaches_to_every_agg_in_pod() {
        let k = 6;
        let t = build_fat_tree(k).unwrap();
        let lay = FatTreeLayout { k };
        for pod in 0..k {
            for r in 0..k / 2 {
                let tor = lay.tor(pod, r);
                let aggs: Vec<_> = t.neighbors(tor).collect();
                assert_eq!(aggs.len(), k / 2);
                assert!(aggs.iter().all(|&a| t.role(a) == Role::Aggregation && lay.pod_of(a) == Some(pod)));
            }
        }
    }

    #[test]
    fn jellyfish_k4() {
        let t = build_jellyfish(4, 3, 7).unwrap();
        assert_eq!(t.edge_count(), 6);
    }

    #[test]
    fn jellyfish_regular_and_deterministic() {
        let a = build_jellyfish(20, 4, 1).unwrap();
        let b = build_jellyfish(20, 4, 1).unwrap();
        assert!(a.nodes().all(|n| a.degree(n) == 4));
        let ea: Vec<_> = a.links().iter().map(|l| (l.a, l.b)).collect();
        let eb: Vec<_> = b.links().iter().map(|l| (l.a, l.b)).collect();
        assert_eq!(ea, eb);
        assert!(build_jellyfish(5, 3, 1).is_err());
    }
}
