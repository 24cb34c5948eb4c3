//! Switch topologies: construction, loading, validation and queries.

mod builders;
mod edgelist;
pub mod graph;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simcore::Nanos;

pub use builders::{build_fat_tree, build_jellyfish, FatTreeLayout};
pub use edgelist::{load_edge_list, serialize_edge_list};
pub use graph::{bfs_distances, bfs_distances_where, components, components_where, diameter, eccentricity, TopologySummary};

/// Index of a switch in a [`Topology`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for NodeId {
    fn from(v: usize) -> Self {
        NodeId(v as u32)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Index of an undirected link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkId(pub u32);

impl LinkId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

/// Egress/ingress port index on a switch; dense `0..degree`.
pub type Port = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Core,
    Aggregation,
    Tor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    /// bits per second
    pub bandwidth_bps: f64,
    pub base_prop_delay: Nanos,
    /// Uniform half-width around `base_prop_delay`.
    pub prop_jitter: Nanos,
    pub loss_rate: f64,
    pub up: bool,
}

impl Default for LinkParams {
    /// 100 Gbps, 100 ± 10 ns, lossless.
    fn default() -> Self {
        LinkParams {
            bandwidth_bps: 100e9,
            base_prop_delay: 100,
            prop_jitter: 10,
            loss_rate: 0.0,
            up: true,
        }
    }
}

impl LinkParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.loss_rate) {
            return Err(Error::param(format!("loss rate {} outside [0, 1)", self.loss_rate)));
        }
        if self.base_prop_delay <= self.prop_jitter {
            return Err(Error::param(format!(
                "propagation delay {} must exceed jitter {}",
                self.base_prop_delay, self.prop_jitter
            )));
        }
        if !(self.bandwidth_bps > 0.0) {
            return Err(Error::param("bandwidth must be positive"));
        }
        Ok(())
    }

    /// Largest possible propagation delay.
    pub fn max_prop(&self) -> Nanos {
        self.base_prop_delay + self.prop_jitter
    }
}

/// One end of a link as seen from a switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Adjacency {
    pub neighbor: NodeId,
    pub link: LinkId,
    /// Port index on the neighbor that leads back here.
    pub remote_port: Port,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub a: NodeId,
    pub b: NodeId,
    pub port_a: Port,
    pub port_b: Port,
    pub params: LinkParams,
}

impl Link {
    pub fn other(&self, n: NodeId) -> NodeId {
        if n == self.a {
            self.b
        } else {
            self.a
        }
    }
}

/// Immutable switch graph with per-link parameters and role labels.
#[derive(Debug, Clone)]
pub struct Topology {
    roles: Vec<Role>,
    adj: Vec<Vec<Adjacency>>,
    links: Vec<Link>,
    index: HashMap<(NodeId, NodeId), LinkId>,
    hosts_per_tor: usize,
}

impl Topology {
    /// Empty topology with `n` isolated switches, all labelled ToR.
    pub fn with_nodes(n: usize) -> Self {
        Topology {
            roles: vec![Role::Tor; n],
            adj: vec![Vec::new(); n],
            links: Vec::new(),
            index: HashMap::new(),
            hosts_per_tor: 4,
        }
    }

    pub fn node_count(&self) -> usize {
        self.roles.len()
    }

    pub fn edge_count(&self) -> usize {
        self.links.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.roles.len()).map(NodeId::from)
    }

    pub fn role(&self, n: NodeId) -> Role {
        self.roles[n.idx()]
    }

    pub fn set_role(&mut self, n: NodeId, role: Role) {
        self.roles[n.idx()] = role;
    }

    pub fn hosts_per_tor(&self) -> usize {
        self.hosts_per_tor
    }

    pub fn set_hosts_per_tor(&mut self, h: usize) {
        self.hosts_per_tor = h;
    }

    pub fn degree(&self, n: NodeId) -> usize {
        self.adj[n.idx()].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Neighbors in port order.
    pub fn ports(&self, n: NodeId) -> &[Adjacency] {
        &self.adj[n.idx()]
    }

    pub fn neighbor(&self, n: NodeId, port: Port) -> NodeId {
        self.adj[n.idx()][port].neighbor
    }

    pub fn neighbors(&self, n: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adj[n.idx()].iter().map(|a| a.neighbor)
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.idx()]
    }

    pub fn link_between(&self, u: NodeId, v: NodeId) -> Option<LinkId> {
        self.index.get(&ordered(u, v)).copied()
    }

    /// Port on `u` that leads to `v`.
    pub fn port_to(&self, u: NodeId, v: NodeId) -> Option<Port> {
        let l = self.link_between(u, v)?;
        let link = &self.links[l.idx()];
        Some(if link.a == u { link.port_a } else { link.port_b })
    }

    pub fn tors(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes().filter(|&n| self.role(n) == Role::Tor)
    }

    /// Adds an undirected link. Rejects self-loops and duplicates.
    pub fn add_link(&mut self, u: NodeId, v: NodeId, params: LinkParams) -> Result<LinkId> {
        if u == v {
            return Err(Error::param(format!("self-loop on node {u}")));
        }
        let n = self.node_count();
        if u.idx() >= n || v.idx() >= n {
            return Err(Error::param(format!("link {u}-{v} references unknown node")));
        }
        let key = ordered(u, v);
        if self.index.contains_key(&key) {
            return Err(Error::param(format!("duplicate link {u}-{v}")));
        }
        params.validate()?;
        let id = LinkId(self.links.len() as u32);
        let port_a = self.adj[u.idx()].len();
        let port_b = self.adj[v.idx()].len();
        self.adj[u.idx()].push(Adjacency { neighbor: v, link: id, remote_port: port_b });
        self.adj[v.idx()].push(Adjacency { neighbor: u, link: id, remote_port: port_a });
        self.links.push(Link { a: u, b: v, port_a, port_b, params });
        self.index.insert(key, id);
        Ok(id)
    }

    /// Overwrites the parameters of every link.
    pub fn set_all_link_params(&mut self, params: LinkParams) -> Result<()> {
        params.validate()?;
        for l in &mut self.links {
            l.params = params;
        }
        Ok(())
    }

    pub fn set_loss_rate(&mut self, loss: f64) -> Result<()> {
        for l in &mut self.links {
            l.params.loss_rate = loss;
            l.params.validate()?;
        }
        Ok(())
    }

    /// Checks the structural invariants: symmetric adjacency, dense ports,
    /// one entry per link.
    pub fn validate(&self) -> Result<()> {
        for (i, ports) in self.adj.iter().enumerate() {
            let u = NodeId::from(i);
            for (p, a) in ports.iter().enumerate() {
                let back = self
                    .adj
                    .get(a.neighbor.idx())
                    .and_then(|v| v.get(a.remote_port))
                    .ok_or_else(|| Error::Contract(format!("dangling port {p} on {u}")))?;
                if back.neighbor != u || back.remote_port != p || back.link != a.link {
                    return Err(Error::Contract(format!("asymmetric adjacency at {u} port {p}")));
                }
            }
        }
        if self.index.len() != self.links.len() {
            return Err(Error::Contract("link index out of sync".into()));
        }
        for l in &self.links {
            l.params.validate()?;
        }
        Ok(())
    }

    /// Largest single-link round trip: two maximal propagations, two
    /// min-frame serializations and two switch processing delays.
    pub fn max_link_rtt(&self, min_frame_bytes: u32, processing: Nanos) -> Nanos {
        self.links
            .iter()
            .map(|l| {
                let tx = crate::simcore::serialization_ns(min_frame_bytes, l.params.bandwidth_bps);
                2 * l.params.max_prop() + 2 * tx + 2 * processing
            })
            .max()
            .unwrap_or(0)
    }
}

fn ordered(u: NodeId, v: NodeId) -> (NodeId, NodeId) {
    if u <= v {
        (u, v)
    } else {
        (v, u)
    }
}
