//! Per-group multicast trees and their source-routed header encoding.

use rand::Rng;
use serde::{Deserialize, Serialize};

use std::collections::BTreeMap;

use crate::algos::layered_cover_central;
use crate::error::{Error, Result};
use crate::topo::{bfs_distances_where, LinkId, NodeId, Role, Topology};

/// A multicast tree kept as its edges, `(child, father)` sorted by child.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupTree {
    pub src: NodeId,
    pub edges: Vec<(NodeId, NodeId)>,
}

impl GroupTree {
    pub fn from_parents(src: NodeId, parent: &[Option<NodeId>]) -> Self {
        let edges = parent.iter().enumerate().filter_map(|(v, p)| p.map(|p| (NodeId::from(v), p))).collect();
        GroupTree { src, edges }
    }

    pub fn from_edges(src: NodeId, mut edges: Vec<(NodeId, NodeId)>) -> Self {
        edges.sort_unstable();
        GroupTree { src, edges }
    }

    pub fn father(&self, v: NodeId) -> Option<NodeId> {
        self.edges.binary_search_by_key(&v, |e| e.0).ok().map(|i| self.edges[i].1)
    }

    /// Switches on the tree, sorted.
    pub fn nodes(&self) -> Vec<NodeId> {
        let mut v: Vec<NodeId> = self.edges.iter().map(|e| e.0).collect();
        v.push(self.src);
        v.sort_unstable();
        v
    }

    /// Hops from `v` up to the source, `None` if `v` is not on the tree or
    /// the edges do not lead back to the source.
    pub fn depth_of(&self, v: NodeId) -> Option<u32> {
        let mut x = v;
        let mut d = 0;
        while x != self.src {
            x = self.father(x)?;
            d += 1;
            if d as usize > self.edges.len() {
                return None;
            }
        }
        Some(d)
    }

    /// Links used by the tree; errors if an edge is not a link.
    pub fn links(&self, t: &Topology) -> Result<Vec<LinkId>> {
        self.edges
            .iter()
            .map(|&(c, p)| t.link_between(c, p).ok_or_else(|| Error::Contract(format!("tree edge {c:?}-{p:?} is not a link"))))
            .collect()
    }

    pub fn child_counts(&self) -> BTreeMap<NodeId, u32> {
        let mut m = BTreeMap::new();
        for &(_, p) in &self.edges {
            *m.entry(p).or_default() += 1;
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    /// Tree built on the full graph, one ECMP path per receiving ToR.
    NaiveSa,
    /// Small shortest-path tree built on a spanner by layered set cover.
    SpannerSa,
}

impl Encoding {
    pub fn as_str(self) -> &'static str {
        match self {
            Encoding::NaiveSa => "naive_sa",
            Encoding::SpannerSa => "spanner_sa",
        }
    }
}

/// BFS layers from `src` over the links flagged in `usable`.
pub fn layers(t: &Topology, usable: &[bool], src: NodeId) -> Vec<Option<u32>> {
    bfs_distances_where(t, src, |l| usable[l.idx()])
}

/// Neighbors of `v` one layer closer to the source, sorted by id.
pub fn up_neighbors(t: &Topology, usable: &[bool], depth: &[Option<u32>], v: NodeId) -> Vec<NodeId> {
    let Some(d) = depth[v.idx()] else { return Vec::new() };
    let mut ups: Vec<NodeId> = t
        .ports(v)
        .iter()
        .filter(|a| usable[a.link.idx()] && d > 0 && depth[a.neighbor.idx()] == Some(d - 1))
        .map(|a| a.neighbor)
        .collect();
    ups.sort_unstable();
    ups
}

fn check_reachable(depth: &[Option<u32>], dsts: &[NodeId]) -> Result<()> {
    let missing: Vec<NodeId> = dsts.iter().copied().filter(|d| depth[d.idx()].is_none()).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::Unreachable(missing))
    }
}

/// Layered greedy set-cover tree from `src` (the root of `depth`).
pub fn cover_tree(t: &Topology, usable: &[bool], depth: &[Option<u32>], src: NodeId, dsts: &[NodeId]) -> Result<GroupTree> {
    check_reachable(depth, dsts)?;
    let parents = layered_cover_central(depth, |v| up_neighbors(t, usable, depth, v), dsts);
    Ok(GroupTree::from_parents(src, &parents))
}

/// Each receiving ToR follows a uniformly chosen shortest path back towards
/// the source until it meets the tree built so far.
pub fn ecmp_tree<R: Rng>(t: &Topology, usable: &[bool], depth: &[Option<u32>], src: NodeId, dsts: &[NodeId], rng: &mut R) -> Result<GroupTree> {
    check_reachable(depth, dsts)?;
    let mut parent = vec![None; t.node_count()];
    let mut in_tree = vec![false; t.node_count()];
    in_tree[src.idx()] = true;
    for &d in dsts {
        let mut v = d;
        while !in_tree[v.idx()] {
            let ups = up_neighbors(t, usable, depth, v);
            let p = ups[rng.gen_range(0..ups.len())];
            parent[v.idx()] = Some(p);
            in_tree[v.idx()] = true;
            v = p;
        }
    }
    Ok(GroupTree::from_parents(src, &parent))
}

/// Header bytes for source-routing along `tree`: every non-ToR switch with
/// children carries a one-byte tag plus the cheaper of an egress-port
/// bitmap and a count-prefixed list of one-byte port ids.
pub fn encode_header(t: &Topology, tree: &GroupTree) -> u32 {
    tree.child_counts()
        .into_iter()
        .filter(|&(u, _)| t.role(u) != Role::Tor)
        .map(|(u, kids)| 1 + (t.degree(u).div_ceil(8) as u32).min(1 + kids))
        .sum()
}

/// Per receiving ToR: tree depth divided by the shortest-path distance in
/// the graph described by `graph_depth`.
pub fn stretch(tree: &GroupTree, graph_depth: &[Option<u32>], dsts: &[NodeId]) -> Vec<(NodeId, f64)> {
    dsts.iter()
        .filter_map(|&d| {
            let g = graph_depth[d.idx()]?;
            let h = tree.depth_of(d)?;
            (g > 0).then(|| (d, h as f64 / g as f64))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topo::load_edge_list;

    #[test]
    fn path_of_three_has_one_paid_rule_per_inner_switch() {
        let mut t = load_edge_list("0 1\n1 2\n2 3").unwrap();
        t.set_role(NodeId(1), Role::Aggregation);
        t.set_role(NodeId(2), Role::Aggregation);
        let usable = vec![true; t.edge_count()];
        let d = layers(&t, &usable, NodeId(0));
        let tree = cover_tree(&t, &usable, &d, NodeId(0), &[NodeId(3)]).unwrap();
        // Two aggregation switches, degree 2: tag + one bitmap byte each.
        assert_eq!(encode_header(&t, &tree), 4);
    }

    #[test]
    fn trees_agree_on_a_tree_topology() {
        let t = load_edge_list("0 1\n1 2\n1 3\n3 4\n3 5").unwrap();
        let usable = vec![true; t.edge_count()];
        let d = layers(&t, &usable, NodeId(0));
        let dsts = [NodeId(2), NodeId(4), NodeId(5)];
        let a = cover_tree(&t, &usable, &d, NodeId(0), &dsts).unwrap();
        let b = ecmp_tree(&t, &usable, &d, NodeId(0), &dsts, &mut rand::thread_rng()).unwrap();
        assert_eq!(a, b);
        assert!(stretch(&a, &d, &dsts).iter().all(|&(_, s)| s == 1.0));
    }

    #[test]
    fn unreachable_destination_is_reported() {
        let t = load_edge_list("0 1\n2 3").unwrap();
        let usable = vec![true; t.edge_count()];
        let d = layers(&t, &usable, NodeId(0));
        assert!(matches!(cover_tree(&t, &usable, &d, NodeId(0), &[NodeId(3)]), Err(Error::Unreachable(_))));
    }
}
