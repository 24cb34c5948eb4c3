//! Centralized graph queries used by setup code and reporting.

use std::collections::{BTreeMap, VecDeque};

use serde::Serialize;

use super::{LinkId, NodeId, Topology};
use crate::error::{Error, Result};

/// Hop distances from `src`; `None` for unreachable nodes.
pub fn bfs_distances(t: &Topology, src: NodeId) -> Vec<Option<u32>> {
    bfs_distances_where(t, src, |_| true)
}

/// BFS restricted to links accepted by `usable`.
pub fn bfs_distances_where(t: &Topology, src: NodeId, usable: impl Fn(LinkId) -> bool) -> Vec<Option<u32>> {
    let mut dist = vec![None; t.node_count()];
    let mut q = VecDeque::new();
    dist[src.idx()] = Some(0);
    q.push_back(src);
    while let Some(u) = q.pop_front() {
        let du = dist[u.idx()].unwrap();
        for a in t.ports(u) {
            if dist[a.neighbor.idx()].is_none() && usable(a.link) {
                dist[a.neighbor.idx()] = Some(du + 1);
                q.push_back(a.neighbor);
            }
        }
    }
    dist
}

/// Connected components over usable links, each sorted, ordered by
/// smallest member.
pub fn components_where(t: &Topology, usable: impl Fn(LinkId) -> bool) -> Vec<Vec<NodeId>> {
    let mut comp = vec![usize::MAX; t.node_count()];
    let mut out = Vec::new();
    for s in t.nodes() {
        if comp[s.idx()] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = vec![s];
        comp[s.idx()] = id;
        let mut i = 0;
        while i < members.len() {
            let u = members[i];
            i += 1;
            for a in t.ports(u) {
                if comp[a.neighbor.idx()] == usize::MAX && usable(a.link) {
                    comp[a.neighbor.idx()] = id;
                    members.push(a.neighbor);
                }
            }
        }
        members.sort();
        out.push(members);
    }
    out
}

pub fn components(t: &Topology) -> Vec<Vec<NodeId>> {
    components_where(t, |_| true)
}

/// Largest BFS distance from `src`, or `None` if some node is unreachable.
pub fn eccentricity(t: &Topology, src: NodeId) -> Option<u32> {
    bfs_distances(t, src).into_iter().try_fold(0, |m, d| d.map(|d| m.max(d)))
}

/// Unweighted diameter via all-pairs BFS.
pub fn diameter(t: &Topology) -> Result<u32> {
    if t.node_count() == 0 {
        return Ok(0);
    }
    let comps = components(t);
    if comps.len() > 1 {
        return Err(Error::Disconnected { components: comps });
    }
    Ok(t.nodes().map(|s| eccentricity(t, s).unwrap()).max().unwrap_or(0))
}

/// JSON-printable overview of a topology.
#[derive(Debug, Clone, Serialize)]
pub struct TopologySummary {
    pub nodes: usize,
    pub edges: usize,
    pub degree_histogram: BTreeMap<usize, usize>,
    pub diameter: Option<u32>,
    pub components: usize,
}

impl TopologySummary {
    pub fn of(t: &Topology) -> Self {
        let mut hist = BTreeMap::new();
        for n in t.nodes() {
            *hist.entry(t.degree(n)).or_insert(0) += 1;
        }
        TopologySummary {
            nodes: t.node_count(),
            edges: t.edge_count(),
            degree_histogram: hist,
            diameter: diameter(t).ok(),
            components: components(t).len(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topo::{build_fat_tree, load_edge_list, LinkParams};
    use rand::{Rng, SeedableRng};

    #[test]
    fn path_diameter() {
        let t = load_edge_list("0 1\n1 2").unwrap();
        assert_eq!(diameter(&t).unwrap(), 2);
    }

    #[test]
    fn fat_tree_diameter() {
        assert_eq!(diameter(&build_fat_tree(8).unwrap()).unwrap(), 4);
    }

    #[test]
    fn disconnected_reports_partition() {
        let t = load_edge_list("0 1\n2 3").unwrap();
        match diameter(&t) {
            Err(Error::Disconnected { components }) => {
                assert_eq!(components, vec![vec![NodeId(0), NodeId(1)], vec![NodeId(2), NodeId(3)]])
            }
            other => panic!("{other:?}"),
        }
    }

    /// Floyd–Warshall as an independent all-pairs oracle.
    fn floyd_diameter(t: &Topology) -> u32 {
        let n = t.node_count();
        let inf = u32::MAX / 4;
        let mut d = vec![vec![inf; n]; n];
        for i in 0..n {
            d[i][i] = 0;
        }
        for l in t.links() {
            d[l.a.idx()][l.b.idx()] = 1;
            d[l.b.idx()][l.a.idx()] = 1;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let via = d[i][k] + d[k][j];
                    if via < d[i][j] {
                        d[i][j] = via;
                    }
                }
            }
        }
        d.iter().flatten().copied().max().unwrap()
    }

    #[test]
    fn random_gnp_matches_floyd_warshall() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let mut tested = 0;
        while tested < 5 {
            let mut t = Topology::with_nodes(10);
            for u in 0..10u32 {
                for v in u + 1..10 {
                    if rng.gen_bool(0.5) {
                        t.add_link(NodeId(u), NodeId(v), LinkParams::default()).unwrap();
                    }
                }
            }
            if let Ok(d) = diameter(&t) {
                assert_eq!(d, floyd_diameter(&t));
                tested += 1;
            }
        }
    }
}
