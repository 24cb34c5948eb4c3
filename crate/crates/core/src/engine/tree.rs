use std::collections::VecDeque;

use super::Scope;
use crate::error::{Error, Result};
use crate::topo::{components_where, NodeId, Port, Topology};

/// Rooted spanning tree over the live part of a topology.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyncTree {
    pub root: NodeId,
    /// `(parent, port towards it)`; `None` for the root and for nodes
    /// outside the tree.
    pub parent: Vec<Option<(NodeId, Port)>>,
    /// Ports leading to children.
    pub children: Vec<Vec<Port>>,
    pub depth: Vec<Option<u32>>,
}

impl SyncTree {
    pub fn height(&self) -> u32 {
        self.depth.iter().flatten().copied().max().unwrap_or(0)
    }

    pub fn contains(&self, n: NodeId) -> bool {
        self.depth[n.idx()].is_some()
    }

    pub fn members(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.depth.len()).filter(|&i| self.depth[i].is_some()).map(NodeId::from)
    }

    /// Builds the tree from parent pointers alone.
    pub fn from_parents(t: &Topology, root: NodeId, parent: &[Option<NodeId>]) -> Result<Self> {
        let n = t.node_count();
        let mut tree = SyncTree { root, parent: vec![None; n], children: vec![Vec::new(); n], depth: vec![None; n] };
        for v in t.nodes() {
            if let Some(p) = parent[v.idx()] {
                let up = t.port_to(v, p).ok_or_else(|| Error::Contract(format!("{v} has non-neighbor parent {p}")))?;
                tree.parent[v.idx()] = Some((p, up));
                tree.children[p.idx()].push(t.port_to(p, v).unwrap());
            }
        }
        for c in tree.children.iter_mut() {
            c.sort_unstable();
        }
        tree.depth[root.idx()] = Some(0);
        let mut q = VecDeque::from([root]);
        while let Some(u) = q.pop_front() {
            let d = tree.depth[u.idx()].unwrap();
            for &p in &tree.children[u.idx()] {
                let c = t.neighbor(u, p);
                tree.depth[c.idx()] = Some(d + 1);
                q.push_back(c);
            }
        }
        if let Some(v) = t.nodes().find(|v| parent[v.idx()].is_some() && tree.depth[v.idx()].is_none()) {
            return Err(Error::Contract(format!("parent pointers of {v} do not lead to root {root}")));
        }
        Ok(tree)
    }

    pub fn parents(&self) -> Vec<Option<NodeId>> {
        self.parent.iter().map(|p| p.map(|(n, _)| n)).collect()
    }
}

/// BFS tree from `root` over usable links; among equally deep candidates a
/// node picks the parent with the lowest id.
pub fn bfs_tree(t: &Topology, scope: &Scope, root: NodeId) -> SyncTree {
    let n = t.node_count();
    let mut parent: Vec<Option<NodeId>> = vec![None; n];
    let mut depth = vec![None; n];
    depth[root.idx()] = Some(0u32);
    let mut frontier = vec![root];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &u in &frontier {
            for a in t.ports(u) {
                let v = a.neighbor;
                if !scope.link_ok(a.link) || !scope.alive[v.idx()] {
                    continue;
                }
                if depth[v.idx()].is_none() {
                    depth[v.idx()] = Some(depth[u.idx()].unwrap() + 1);
                    parent[v.idx()] = Some(u);
                    next.push(v);
                } else if depth[v.idx()] == Some(depth[u.idx()].unwrap() + 1) && parent[v.idx()].is_some_and(|p| u < p) {
                    parent[v.idx()] = Some(u);
                }
            }
        }
        frontier = next;
    }
    SyncTree::from_parents(t, root, &parent).expect("BFS parents form a tree")
}

/// One descent step of the center search. `up` is the height of the part of
/// the tree reached through the current node's parent, `h1 ≥ h2` the two
/// largest values of `child subtree depth + 1`. Returns the `up` value to
/// hand to the deepest child, or `None` when the current node is a center.
pub fn center_step(up: u32, h1: u32, h2: u32) -> Option<u32> {
    let here = up.max(h1);
    let below = up.max(h2) + 1;
    (h1 > 0 && below < here).then_some(below)
}

/// Re-roots `tree` at its center, reversing the root-to-center path.
pub fn recenter(t: &Topology, tree: &SyncTree) -> SyncTree {
    let n = t.node_count();
    // subtree depths bottom-up
    let mut order: Vec<NodeId> = tree.members().collect();
    order.sort_by_key(|v| std::cmp::Reverse(tree.depth[v.idx()].unwrap()));
    let mut sub = vec![0u32; n];
    for &v in &order {
        if let Some((p, _)) = tree.parent[v.idx()] {
            sub[p.idx()] = sub[p.idx()].max(sub[v.idx()] + 1);
        }
    }
    let mut x = tree.root;
    let mut up = 0;
    loop {
        let mut kids: Vec<(u32, NodeId)> = tree.children[x.idx()]
            .iter()
            .map(|&p| {
                let c = t.neighbor(x, p);
                (sub[c.idx()] + 1, c)
            })
            .collect();
        kids.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let h2 = kids.get(1).map_or(0, |k| k.0);
        let Some(&(h1, c1)) = kids.first() else { break };
        match center_step(up, h1, h2) {
            Some(next_up) => {
                up = next_up;
                x = c1;
            }
            None => break,
        }
    }
    reroot(t, tree, x)
}

/// Same tree, rooted at `new_root`.
pub fn reroot(t: &Topology, tree: &SyncTree, new_root: NodeId) -> SyncTree {
    let mut parent = tree.parents();
    let mut cur = new_root;
    let mut prev: Option<NodeId> = None;
    loop {
        let old = parent[cur.idx()];
        parent[cur.idx()] = prev;
        match old {
            Some(p) => {
                prev = Some(cur);
                cur = p;
            }
            None => break,
        }
    }
    SyncTree::from_parents(t, new_root, &parent).expect("re-rooting preserves the tree")
}

/// BFS tree from the lowest-id live node, re-rooted at its center.
pub fn build_sync_tree(t: &Topology, scope: &Scope) -> Result<SyncTree> {
    let comps: Vec<Vec<NodeId>> =
        components_where(t, |l| scope.link_ok(l)).into_iter().filter(|c| scope.alive[c[0].idx()]).collect();
    if comps.is_empty() {
        return Err(Error::param("no live switch"));
    }
    if comps.len() > 1 {
        return Err(Error::Disconnected { components: comps });
    }
    let start = comps[0][0];
    Ok(recenter(t, &bfs_tree(t, scope, start)))
}
