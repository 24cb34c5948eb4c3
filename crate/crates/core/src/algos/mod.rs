//! Distributed algorithm library, written against [`crate::engine`].
//!
//! Each algorithm is a per-node program plus a driver function here that
//! builds the programs, runs them on a [`Network`] and collects the result.
//! [`run_named`] dispatches by name for the CLI and the scenario harness.

pub mod bfs;
pub mod center;
pub mod flooding;
pub mod leader;
pub mod mis;
pub mod mst;
pub mod set_cover;
pub mod spanner;
pub mod vertex_cover;

use std::sync::Arc;

use serde::Serialize;

use crate::engine::{build_sync_tree, run_alpha, run_async, run_beta, EngineConfig, PhaseEnv, PhaseReport, Program, Scope, Synchronizer};
use crate::error::{Error, Result};
use crate::simcore::rng::substream;
use crate::simcore::{Nanos, Network};
use crate::topo::{LinkId, NodeId, Port, Topology};

pub use bfs::MultiBfs;
pub use center::CenterFinding;
pub use flooding::{FloodTag, Flooding};
pub use leader::{LeaderElection, LeaderKey};
pub use mis::{LubyMis, MisState};
pub use mst::Boruvka;
pub use set_cover::{layered_cover_central, LayerView, LayeredCover};
pub use spanner::{spanner_central, Spanner};
pub use vertex_cover::VertexCover;

/// Runs round-based programs under the configured synchronizer, over a
/// sync tree built from the phase scope unless the phase brings its own.
pub fn run_sync<P: Program>(net: Network, env: PhaseEnv, progs: &mut [P]) -> Result<(Network, PhaseReport)> {
    let tree = match &env.sync_tree {
        Some(t) => t.clone(),
        None => Arc::new(build_sync_tree(net.topology(), &env.scope)?),
    };
    Ok(match env.cfg.synchronizer {
        Synchronizer::Alpha => run_alpha(net, env, &tree, progs),
        Synchronizer::Beta => run_beta(net, env, &tree, progs),
    })
}

/// Parent pointers as node ids.
pub fn fathers_of(t: &Topology, ports: impl Iterator<Item = Option<Port>>) -> Vec<Option<NodeId>> {
    ports.enumerate().map(|(v, p)| p.map(|p| t.neighbor(NodeId::from(v), p))).collect()
}

#[derive(Debug, Clone)]
pub struct BfsOutcome {
    pub depth: Vec<Option<u32>>,
    pub father: Vec<Option<NodeId>>,
    pub report: PhaseReport,
}

pub fn bfs(net: Network, env: PhaseEnv, root: NodeId) -> Result<(Network, BfsOutcome)> {
    let t = net.topology().clone();
    let mut progs: Vec<MultiBfs> =
        t.nodes().map(|v| MultiBfs::new(1, if v == root { vec![0] } else { vec![] }, None)).collect();
    let (net, report) = run_sync(net, env, &mut progs)?;
    let (depth, father) = bfs::extract(&progs, 0, |v, p| t.neighbor(v, p));
    Ok((net, BfsOutcome { depth, father, report }))
}

/// One BFS per source, all in the same rounds. `allowed[link]` restricts
/// the edges used.
pub fn multi_bfs(net: Network, env: PhaseEnv, sources: &[NodeId], allowed: Option<&[bool]>) -> Result<(Network, Vec<MultiBfs>, PhaseReport)> {
    let t = net.topology().clone();
    let mut progs: Vec<MultiBfs> = t
        .nodes()
        .map(|v| {
            let seeds = sources.iter().enumerate().filter(|(_, &s)| s == v).map(|(i, _)| i as u32).collect();
            let mask = allowed.map(|a| t.ports(v).iter().map(|adj| a[adj.link.idx()]).collect());
            MultiBfs::new(sources.len(), seeds, mask)
        })
        .collect();
    let (net, report) = run_sync(net, env, &mut progs)?;
    Ok((net, progs, report))
}

#[derive(Debug, Clone)]
pub struct FloodOutcome {
    pub tag: Vec<Option<FloodTag>>,
    pub father: Vec<Option<NodeId>>,
    pub report: PhaseReport,
}

pub fn flood(net: Network, env: PhaseEnv, origins: &[FloodTag]) -> Result<(Network, FloodOutcome)> {
    let t = net.topology().clone();
    let mut progs: Vec<Flooding> = vec![Flooding::default(); t.node_count()];
    for &o in origins {
        let slot = &mut progs[o.origin.idx()];
        if slot.start_tag.is_none_or(|cur| cur < o) {
            *slot = Flooding::origin(o);
        }
    }
    let (net, report) = run_async(net, env, &mut progs);
    let father = fathers_of(&t, progs.iter().map(|p| p.father));
    Ok((net, FloodOutcome { tag: progs.iter().map(|p| p.tag).collect(), father, report }))
}

#[derive(Debug, Clone)]
pub struct LeaderOutcome {
    pub best: Vec<Option<LeaderKey>>,
    pub report: PhaseReport,
}

/// Every node that appears in `candidates` advertises its smallest key.
pub fn elect(net: Network, env: PhaseEnv, candidates: &[(NodeId, LeaderKey)]) -> Result<(Network, LeaderOutcome)> {
    let t = net.topology().clone();
    let mut progs: Vec<LeaderElection> = vec![LeaderElection::default(); t.node_count()];
    for &(v, k) in candidates {
        let slot = &mut progs[v.idx()];
        if slot.best.is_none_or(|b| k < b) {
            *slot = LeaderElection::candidate(k);
        }
    }
    let (net, report) = run_sync(net, env, &mut progs)?;
    Ok((net, LeaderOutcome { best: progs.iter().map(|p| p.best).collect(), report }))
}

#[derive(Debug, Clone)]
pub struct CenterOutcome {
    /// Per instance: the center and the recentered height.
    pub centers: Vec<Option<(NodeId, u32)>>,
    /// Per instance, per node: parent after re-rooting at the center.
    pub father: Vec<Vec<Option<NodeId>>>,
    pub report: PhaseReport,
}

/// Finds the center of every BFS tree in `trees` (as left by [`multi_bfs`]).
pub fn find_centers(net: Network, env: PhaseEnv, trees: &[MultiBfs]) -> Result<(Network, CenterOutcome)> {
    let t = net.topology().clone();
    let k = trees.first().map_or(0, |b| b.inst.len());
    let mut progs: Vec<CenterFinding> = trees
        .iter()
        .map(|b| {
            let mut c = CenterFinding::default();
            for st in &b.inst {
                c.add_instance(st.depth.is_some(), st.father, st.children.clone());
            }
            c
        })
        .collect();
    let (net, report) = run_async(net, env, &mut progs);
    let mut centers = vec![None; k];
    let mut father = vec![vec![None; t.node_count()]; k];
    for v in t.nodes() {
        for (i, st) in progs[v.idx()].inst.iter().enumerate() {
            if let Some(h) = st.center_height {
                centers[i] = Some((v, h));
            }
            father[i][v.idx()] = st.father.map(|p| t.neighbor(v, p));
        }
    }
    Ok((net, CenterOutcome { centers, father, report }))
}

#[derive(Debug, Clone)]
pub struct MstOutcome {
    pub links: Vec<LinkId>,
    pub iterations: u32,
    pub report: PhaseReport,
}

/// Borůvka over per-link weights (ties by link id). Needs the β
/// synchronizer, whose rounds may run free.
pub fn mst(net: Network, env: PhaseEnv, weights: &[u32]) -> Result<(Network, MstOutcome)> {
    if env.cfg.synchronizer != Synchronizer::Beta {
        return Err(Error::config("the MST program uses free-running rounds, which need the beta synchronizer"));
    }
    let t = net.topology().clone();
    if weights.len() != t.edge_count() {
        return Err(Error::param("one weight per link required"));
    }
    let mut progs: Vec<Boruvka> = t
        .nodes()
        .map(|v| Boruvka::new(v.0, t.ports(v).iter().map(|a| (weights[a.link.idx()], a.link.0)).collect()))
        .collect();
    let (net, report) = run_sync(net, env, &mut progs)?;
    let mut links = Vec::new();
    for v in t.nodes() {
        for (p, a) in t.ports(v).iter().enumerate() {
            if progs[v.idx()].tree_ports[p] && v < a.neighbor {
                links.push(a.link);
            }
        }
    }
    links.sort_unstable();
    let iterations = progs.iter().map(|p| p.merges).max().unwrap_or(0);
    Ok((net, MstOutcome { links, iterations, report }))
}

#[derive(Debug, Clone)]
pub struct SetOutcome {
    pub members: Vec<bool>,
    pub report: PhaseReport,
}

pub fn mis(net: Network, env: PhaseEnv, seed: u64) -> Result<(Network, SetOutcome)> {
    let t = net.topology().clone();
    let mut progs: Vec<LubyMis> = t.nodes().map(|v| LubyMis::new(substream(seed, "algo.mis", v.0 as u64))).collect();
    let (net, report) = run_sync(net, env, &mut progs)?;
    Ok((net, SetOutcome { members: progs.iter().map(|p| p.state == MisState::In).collect(), report }))
}

pub fn vertex_cover(net: Network, env: PhaseEnv, weights: &[u32], eps: f64) -> Result<(Network, SetOutcome)> {
    let t = net.topology().clone();
    if weights.len() != t.node_count() || !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::param("vertex cover needs one weight per node and 0 < eps <= 1"));
    }
    let mut progs: Vec<VertexCover> = weights.iter().map(|&w| VertexCover::new(w, eps)).collect();
    let (net, report) = run_sync(net, env, &mut progs)?;
    Ok((net, SetOutcome { members: progs.iter().map(|p| p.in_cover).collect(), report }))
}

#[derive(Debug, Clone)]
pub struct SpannerOutcome {
    /// Kept flag per link.
    pub kept: Vec<bool>,
    pub report: PhaseReport,
}

pub fn spanner(net: Network, env: PhaseEnv, k: u32, seed: u64) -> Result<(Network, SpannerOutcome)> {
    if k < 2 {
        return Err(Error::param("spanner parameter k must be at least 2"));
    }
    let t = net.topology().clone();
    let n = env.scope.alive.iter().filter(|&&a| a).count();
    let mut progs: Vec<Spanner> = t.nodes().map(|v| Spanner::new(v.0, k, n, seed)).collect();
    let (net, report) = run_sync(net, env, &mut progs)?;
    Ok((net, SpannerOutcome { kept: spanner::kept_links(&t, &progs), report }))
}

#[derive(Debug, Clone)]
pub struct SptOutcome {
    /// Per instance: `(child, father)` for every tree edge, by child id.
    pub edges: Vec<Vec<(NodeId, NodeId)>>,
    pub report: PhaseReport,
}

impl SptOutcome {
    /// Father of every node of instance `i`'s tree in an `n`-node graph.
    pub fn father(&self, i: usize, n: usize) -> Vec<Option<NodeId>> {
        let mut f = vec![None; n];
        for &(c, p) in &self.edges[i] {
            f[c.idx()] = Some(p);
        }
        f
    }
}

/// Each node's view of the layers of every BFS instance, taking the
/// per-instance state out of `bfs`.
pub fn layer_views(bfs: Vec<MultiBfs>) -> Vec<Vec<LayerView>> {
    bfs.into_iter()
        .map(|b| b.inst.into_iter().map(|st| LayerView { depth: st.depth, up_ports: st.up_ports }).collect())
        .collect()
}

/// Builds one small shortest-path tree per instance, covering `dsts[i]`
/// over the BFS layers of source `inst_src[i]` given per node in `views`.
pub fn set_cover_spt(net: Network, env: PhaseEnv, views: Vec<Vec<LayerView>>, inst_src: &[u32], dsts: &[Vec<NodeId>]) -> Result<(Network, SptOutcome)> {
    let t = net.topology().clone();
    if inst_src.len() != dsts.len() {
        return Err(Error::config("one source per set-cover instance is required"));
    }
    let layers = views.iter().flat_map(|v| v.iter().filter_map(|s| s.depth)).max().unwrap_or(0);
    let mut dst_of: Vec<Vec<u32>> = vec![Vec::new(); t.node_count()];
    for (i, ds) in dsts.iter().enumerate() {
        for &d in ds {
            dst_of[d.idx()].push(i as u32);
        }
    }
    let inst_src: Arc<[u32]> = inst_src.into();
    let mut progs: Vec<LayeredCover> = views
        .into_iter()
        .zip(dst_of)
        .map(|(v, d)| LayeredCover::new(layers, v, inst_src.clone(), d))
        .collect();
    let (net, report) = run_sync(net, env, &mut progs)?;
    let mut edges = vec![Vec::new(); dsts.len()];
    for v in t.nodes() {
        for (&i, st) in &progs[v.idx()].state {
            if let Some(p) = st.father {
                edges[i as usize].push((v, t.neighbor(v, p)));
            }
        }
    }
    Ok((net, SptOutcome { edges, report }))
}

/// Algorithms runnable by name.
pub const ALGORITHMS: &[&str] =
    &["bfs", "flooding", "leader_election", "center", "mst", "mis", "vertex_cover", "spanner", "set_cover_spt"];

/// Summary of a named run, for the CLI and scenario output.
#[derive(Debug, Clone, Serialize)]
pub struct NamedRun {
    pub algorithm: String,
    pub converged: bool,
    pub rounds: u64,
    pub duration_ns: u64,
    pub frames: u64,
    pub retransmissions: u64,
    pub control_packets: u64,
    pub logical_sends: u64,
    pub result_size: usize,
    /// Hash of the algorithm's output, for comparing runs.
    pub answer: String,
}

/// Link weights the MST run of [`run_named`] uses.
pub fn named_link_weights(topo: &Topology, seed: u64) -> Vec<u32> {
    use rand::Rng;
    let mut rng = substream(seed, "algo.params", 0);
    (0..topo.edge_count()).map(|_| rng.gen_range(1..=1000)).collect()
}

/// Runs an algorithm from [`ALGORITHMS`] on the whole topology with
/// defaults for its parameters: node 0 as root or source, unit weights
/// perturbed by the seed, `k = 3` for the spanner, ε = 0.1 for the cover.
/// The run stops at `horizon` ns of simulated time.
pub fn run_named(name: &str, topo: Arc<Topology>, cfg: &EngineConfig, seed: u64, horizon: Nanos) -> Result<NamedRun> {
    use rand::Rng;
    cfg.validate()?;
    let net = Network::new(topo.clone(), cfg.net_config(), seed);
    let env = PhaseEnv::new(cfg, Scope::full(&topo), 0).with_horizon(horizon);
    let root = NodeId(0);
    let mut rng = substream(seed, "algo.params", 0);
    let (net, report, size, answer) = match name {
        "bfs" => {
            let (n, o) = bfs(net, env, root)?;
            (n, o.report, o.depth.iter().flatten().count(), digest(&(&o.depth, &o.father)))
        }
        "flooding" => {
            let (n, o) = flood(net, env, &[FloodTag { ts: 0, origin: root }])?;
            (n, o.report, o.tag.iter().flatten().count(), digest(&o.tag))
        }
        "leader_election" => {
            let cands: Vec<(NodeId, LeaderKey)> = topo.nodes().map(|v| (v, LeaderKey { metric: 0, id: v.0 })).collect();
            let (n, o) = elect(net, env, &cands)?;
            (n, o.report, o.best.iter().flatten().count(), digest(&o.best))
        }
        "center" => {
            let (n, trees, _) = multi_bfs(net, env.clone(), &[root], None)?;
            let (n, o) = find_centers(n, env, &trees)?;
            (n, o.report, o.centers.iter().flatten().count(), digest(&o.centers))
        }
        "mst" => {
            let (n, o) = mst(net, env, &named_link_weights(&topo, seed))?;
            (n, o.report, o.links.len(), digest(&o.links))
        }
        "mis" => {
            let (n, o) = mis(net, env, seed)?;
            (n, o.report, o.members.iter().filter(|&&m| m).count(), digest(&o.members))
        }
        "vertex_cover" => {
            let w: Vec<u32> = (0..topo.node_count()).map(|_| rng.gen_range(1..=256)).collect();
            let (n, o) = vertex_cover(net, env, &w, 0.1)?;
            (n, o.report, o.members.iter().filter(|&&m| m).count(), digest(&o.members))
        }
        "spanner" => {
            let (n, o) = spanner(net, env, 3, seed)?;
            (n, o.report, o.kept.iter().filter(|&&k| k).count(), digest(&o.kept))
        }
        "set_cover_spt" => {
            let (n, trees, _) = multi_bfs(net, env.clone(), &[root], None)?;
            let dsts: Vec<NodeId> = topo.tors().collect();
            let (n, o) = set_cover_spt(n, env, layer_views(trees), &[0], &[dsts])?;
            (n, o.report, o.edges[0].len(), digest(&o.edges))
        }
        other => return Err(Error::config(format!("unknown algorithm '{other}'"))),
    };
    Ok(NamedRun {
        algorithm: name.to_string(),
        converged: report.converged,
        rounds: report.rounds,
        duration_ns: report.duration(),
        frames: report.counters.frames,
        retransmissions: report.counters.retransmissions,
        control_packets: net.stats().control_packets(),
        logical_sends: report.counters.logical_sends,
        result_size: size,
        answer,
    })
}

fn digest(x: &impl std::fmt::Debug) -> String {
    use sha2::{Digest, Sha256};
    let h = Sha256::digest(format!("{x:?}").as_bytes());
    format!("{h:x}")[..16].to_string()
}
