//! Multicast with source-routed headers that reacts to failures.
//!
//! Groups are deployed on shortest-path trees built over a sparse spanner,
//! which keeps the per-packet header small. When a link or switch fails,
//! the switches probing its active ports detect it, flood a recovery tree,
//! and collect per-group membership bitmaps over it so traffic of the
//! affected groups can be forwarded at once. In the background a fresh
//! spanner is built on the surviving network and every affected group gets
//! a new shortest-path tree on it.

pub mod bitmap;
mod groups;
pub mod tree;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use bitmap::{forward_by_bitmaps, BitmapCollect, Bits};
pub use groups::{generate_groups, Group, GroupConfig, Slot};
pub use tree::{cover_tree, ecmp_tree, encode_header, layers, stretch, Encoding, GroupTree};

use crate::algos::{self, spanner_central, FloodTag, Flooding};
use crate::engine::{run_async, EngineConfig, PhaseEnv, PhaseReport, Scope, SyncTree, Synchronizer};
use crate::error::{Error, Result};
use crate::simcore::rng::substream;
use crate::simcore::{FailureSpec, FailureTarget, Nanos, Network, WireStats, MICROS};
use crate::topo::{components_where, LinkId, NodeId, Topology};

pub const ECMP_STREAM: &str = "mcast.ecmp";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McastConfig {
    pub groups: GroupConfig,
    pub spanner_k: u32,
    pub probe_interval_ns: Nanos,
    pub probe_loss_threshold: u32,
    /// Messages per packet during optimization.
    pub opt_batch: usize,
}

impl Default for McastConfig {
    fn default() -> Self {
        McastConfig {
            groups: GroupConfig::default(),
            spanner_k: 15,
            probe_interval_ns: 50 * MICROS,
            probe_loss_threshold: 3,
            opt_batch: 24,
        }
    }
}

impl McastConfig {
    pub fn validate(&self) -> Result<()> {
        if self.spanner_k < 2 {
            return Err(Error::config("spanner_k must be at least 2"));
        }
        if self.probe_interval_ns == 0 || self.probe_loss_threshold == 0 || self.opt_batch == 0 {
            return Err(Error::config("probe interval, loss threshold and batch must be positive"));
        }
        Ok(())
    }
}

/// Group ids carried by each link in the deployed trees.
#[derive(Debug, Clone)]
pub struct AffectedIndex {
    pub per_link: Vec<Vec<u32>>,
}

impl AffectedIndex {
    pub fn build(t: &Topology, trees: &[GroupTree]) -> Result<Self> {
        let mut per_link = vec![Vec::new(); t.edge_count()];
        for (g, tree) in trees.iter().enumerate() {
            for l in tree.links(t)? {
                per_link[l.idx()].push(g as u32);
            }
        }
        Ok(AffectedIndex { per_link })
    }

    /// Groups using any of `links`, sorted.
    pub fn lookup(&self, links: &[LinkId]) -> Vec<u32> {
        let mut out: Vec<u32> = links.iter().flat_map(|l| self.per_link[l.idx()].iter().copied()).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn is_active(&self, l: LinkId) -> bool {
        !self.per_link[l.idx()].is_empty()
    }
}

/// Groups deployed on spanner trees before any failure.
#[derive(Debug, Clone)]
pub struct Deployment {
    pub groups: Vec<Group>,
    pub spanner: Vec<bool>,
    pub trees: Vec<GroupTree>,
    pub index: AffectedIndex,
}

/// Calls `f(src, group indices)` once per distinct source ToR.
fn by_source(groups: &[Group], mut f: impl FnMut(NodeId, &[usize]) -> Result<()>) -> Result<()> {
    let mut map: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        map.entry(g.src_tor()).or_default().push(i);
    }
    map.iter().try_for_each(|(&s, gs)| f(s, gs))
}

/// Builds a tree for every group in the given mode over `usable` links.
pub fn build_trees(t: &Topology, groups: &[Group], usable: &[bool], mode: Encoding, seed: u64) -> Result<Vec<GroupTree>> {
    let mut out: Vec<Option<GroupTree>> = vec![None; groups.len()];
    by_source(groups, |src, gs| {
        let depth = layers(t, usable, src);
        for &i in gs {
            let dsts = groups[i].dst_tors();
            out[i] = Some(match mode {
                Encoding::SpannerSa => cover_tree(t, usable, &depth, src, &dsts)?,
                Encoding::NaiveSa => {
                    let mut rng = substream(seed, ECMP_STREAM, groups[i].id as u64);
                    ecmp_tree(t, usable, &depth, src, &dsts, &mut rng)?
                }
            });
        }
        Ok(())
    })?;
    Ok(out.into_iter().map(|t| t.expect("every group visited")).collect())
}

/// The switch whose failure touches the most deployed groups, with that count.
/// Ties go to the lowest id.
pub fn worst_switch(t: &Topology, dep: &Deployment) -> (NodeId, usize) {
    t.nodes()
        .map(|v| {
            let links: Vec<LinkId> = t.ports(v).iter().map(|a| a.link).collect();
            (v, dep.index.lookup(&links).len())
        })
        .max_by_key(|&(v, c)| (c, std::cmp::Reverse(v)))
        .expect("topology has nodes")
}

/// Links sorted by the number of deployed groups they carry, busiest first.
pub fn busiest_links(dep: &Deployment) -> Vec<(LinkId, usize)> {
    let mut v: Vec<(LinkId, usize)> = dep.index.per_link.iter().enumerate().map(|(i, g)| (LinkId(i as u32), g.len())).collect();
    v.sort_by_key(|&(l, c)| (std::cmp::Reverse(c), l));
    v
}

pub fn deploy(t: &Topology, cfg: &McastConfig, engine: &EngineConfig, seed: u64) -> Result<Deployment> {
    cfg.validate()?;
    let groups = generate_groups(t, &cfg.groups, seed)?;
    let spanner = spanner_central(t, &Scope::full(t), cfg.spanner_k, seed, engine.arithmetic);
    let trees = build_trees(t, &groups, &spanner, Encoding::SpannerSa, seed)?;
    let index = AffectedIndex::build(t, &trees)?;
    Ok(Deployment { groups, spanner, trees, index })
}

/// `(group id, naive_sa bytes, spanner_sa bytes)` for every group on the
/// intact topology.
pub fn header_sizes(t: &Topology, dep: &Deployment, seed: u64) -> Result<Vec<(u32, u32, u32)>> {
    let naive = build_trees(t, &dep.groups, &vec![true; t.edge_count()], Encoding::NaiveSa, seed)?;
    Ok(dep
        .groups
        .iter()
        .zip(naive.iter().zip(&dep.trees))
        .map(|(g, (a, b))| (g.id, encode_header(t, a), encode_header(t, b)))
        .collect())
}

/// Detection time for a switch probing an active port whose link fails at
/// `fail`: probes go out every `interval`, the last one before the failure
/// is answered and `threshold` consecutive misses are noticed one interval
/// after the last of them was sent.
pub fn probe_detection(fail: Nanos, interval: Nanos, threshold: u32) -> Nanos {
    let last_ok = fail.saturating_sub(1) / interval * interval;
    last_ok + (threshold as Nanos + 1) * interval
}

#[derive(Debug, Clone)]
pub struct McastScenario {
    pub mcast: McastConfig,
    pub engine: EngineConfig,
    pub failures: Vec<FailureSpec>,
    pub seed: u64,
}

impl McastScenario {
    /// Use-case defaults: 100-byte packets and a 100 Mbps control budget.
    pub fn new(mcast: McastConfig, failures: Vec<FailureSpec>, seed: u64) -> Self {
        let engine = EngineConfig { packet_floor: 100, control_budget_bps: Some(100e6), ..Default::default() };
        McastScenario { mcast, engine, failures, seed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Detection {
    pub node: NodeId,
    pub at: Nanos,
}

#[derive(Debug, Clone, Default)]
pub struct McastRun {
    /// Affected group ids, sorted.
    pub affected: Vec<u32>,
    /// Affected groups with a member outside the recovered component.
    pub unrecoverable: Vec<u32>,
    pub detections: Vec<Detection>,
    pub first_failure: Option<Nanos>,
    pub first_detection: Option<Nanos>,
    pub recovery_root: Option<FloodTag>,
    /// Flood tree the bitmaps were collected over.
    pub recovery_tree: Option<SyncTree>,
    /// Per-switch recovery state; bit `i` refers to `affected[i]`.
    pub bitmaps: Vec<BitmapCollect>,
    /// Bitmap size carried by each report.
    pub bitmap_bytes: u32,
    /// The recovery bitmaps are in place at every switch.
    pub fast_done: Option<Nanos>,
    /// Every recoverable group's traffic reaches exactly its receivers when
    /// forwarded by the bitmaps.
    pub delivery_ok: bool,
    /// Per recoverable affected group: `in_tree` at every switch equals the
    /// set of switches the forwarding walk visits.
    pub bitmaps_consistent: bool,
    /// New trees are in place.
    pub full_done: Option<Nanos>,
    pub new_trees: Vec<(u32, GroupTree)>,
    /// `(group id, receiving ToR, tree distance over graph distance)` for
    /// every recovered group.
    pub stretch: Vec<(u32, NodeId, f64)>,
    /// New trees satisfy the shortest-path property on the new spanner.
    pub spt_ok: bool,
    pub events: Vec<(&'static str, &'static str, Nanos)>,
    pub phases: Vec<(&'static str, PhaseReport)>,
    pub max_overhead_bps: f64,
    /// `(bin start, busiest link, bps)` per 10 µs bin with control traffic.
    pub overhead_series: Vec<(Nanos, LinkId, f64)>,
    pub stats: WireStats,
}

impl McastRun {
    pub fn fast_recovery_ns(&self) -> Option<Nanos> {
        Some(self.fast_done? - self.first_failure?)
    }

    pub fn full_recovery_ns(&self) -> Option<Nanos> {
        Some(self.full_done? - self.first_failure?)
    }

    pub fn max_stretch(&self) -> f64 {
        self.stretch.iter().map(|s| s.2).fold(1.0, f64::max)
    }

    pub fn mean_stretch(&self) -> f64 {
        if self.stretch.is_empty() {
            1.0
        } else {
            self.stretch.iter().map(|s| s.2).sum::<f64>() / self.stretch.len() as f64
        }
    }
}

/// Links taken down by `failures` and the switches that die.
fn failed_parts(t: &Topology, failures: &[FailureSpec]) -> Result<(Vec<(LinkId, Nanos)>, Vec<NodeId>)> {
    let mut down: BTreeMap<LinkId, Nanos> = BTreeMap::new();
    let mut dead = Vec::new();
    for f in failures {
        match f.target {
            FailureTarget::Link { link } if (link as usize) < t.edge_count() => {
                let e = down.entry(LinkId(link)).or_insert(f.time);
                *e = (*e).min(f.time);
            }
            FailureTarget::Switch { node } if (node as usize) < t.node_count() => {
                dead.push(NodeId(node));
                for a in t.ports(NodeId(node)) {
                    let e = down.entry(a.link).or_insert(f.time);
                    *e = (*e).min(f.time);
                }
            }
            _ => return Err(Error::config(format!("failure target {:?} is not in the topology", f.target))),
        }
    }
    Ok((down.into_iter().collect(), dead))
}

pub fn run(topo: Arc<Topology>, dep: &Deployment, sc: &McastScenario) -> Result<McastRun> {
    let cfg = &sc.mcast;
    let ecfg = &sc.engine;
    cfg.validate()?;
    ecfg.validate()?;
    let t = topo.as_ref();
    let n = t.node_count();
    let mut run = McastRun { first_failure: sc.failures.iter().map(|f| f.time).min(), ..Default::default() };

    let mut net = Network::new(topo.clone(), ecfg.net_config(), sc.seed);
    net.enable_meter();
    for f in &sc.failures {
        net.inject_failure(f, 0)?;
    }
    let (down, dead) = failed_parts(t, &sc.failures)?;
    let failed_links: Vec<LinkId> = down.iter().map(|&(l, _)| l).collect();
    run.affected = dep.index.lookup(&failed_links);

    // Detection at the live ends of failed active links.
    let is_dead = |v: NodeId| dead.contains(&v);
    let mut det: BTreeMap<NodeId, Nanos> = BTreeMap::new();
    for &(l, at) in &down {
        if !dep.index.is_active(l) {
            continue;
        }
        let link = t.link(l);
        for v in [link.a, link.b] {
            if !is_dead(v) {
                let d = probe_detection(at, cfg.probe_interval_ns, cfg.probe_loss_threshold);
                let e = det.entry(v).or_insert(d);
                *e = (*e).min(d);
            }
        }
    }
    run.detections = det.iter().map(|(&node, &at)| Detection { node, at }).collect();
    run.detections.sort_by_key(|d| (d.at, d.node));
    run.first_detection = run.detections.first().map(|d| d.at);
    let Some(t_det) = run.first_detection else {
        run.delivery_ok = true;
        run.bitmaps_consistent = true;
        run.spt_ok = true;
        run.stats = net.stats().clone();
        return Ok(run);
    };
    if let Some(last) = sc.failures.iter().map(|f| f.time).max() {
        if last >= t_det {
            return Err(Error::config(format!("failure at {last} ns happens after recovery has already started at {t_det} ns")));
        }
    }
    run.events.push(("detect", "first", t_det));

    // Flood a recovery tree.
    let scope = Scope::without(t, &failed_links, &dead);
    let mut progs: Vec<Flooding> = vec![Flooding::default(); n];
    for d in &run.detections {
        progs[d.node.idx()] = Flooding::detector(d.at);
    }
    let (net2, flood) = run_async(net, PhaseEnv::new(ecfg, scope.clone(), t_det), &mut progs);
    net = net2;
    run.events.push(("flood", "end", flood.end));
    run.phases.push(("flood", flood.clone()));

    let comps = components_where(t, |l| scope.link_ok(l));
    let main: Vec<NodeId> = comps
        .into_iter()
        .filter(|c| scope.alive[c[0].idx()])
        .filter(|c| c.iter().any(|v| progs[v.idx()].tag.is_some()))
        .max_by_key(|c| (c.len(), std::cmp::Reverse(c[0])))
        .ok_or_else(|| Error::Contract("no flood reached a surviving component".into()))?;
    let mut in_main = vec![false; n];
    main.iter().for_each(|v| in_main[v.idx()] = true);
    let tag = progs[main[0].idx()].tag.expect("main component was flooded");
    run.recovery_root = Some(tag);

    let (recoverable, unrecoverable): (Vec<u32>, Vec<u32>) = run
        .affected
        .iter()
        .partition(|&&g| dep.groups[g as usize].member_tors().iter().all(|v| in_main[v.idx()]));
    run.unrecoverable = unrecoverable;

    let mut main_scope = scope.clone();
    for v in t.nodes().filter(|v| !in_main[v.idx()]) {
        main_scope.alive[v.idx()] = false;
        for a in t.ports(v) {
            main_scope.usable[a.link.idx()] = false;
        }
    }

    // Collect membership bitmaps over the affected-group list.
    let a = run.affected.len();
    let mut own = vec![Bits::new(a); n];
    for (i, &g) in run.affected.iter().enumerate() {
        for v in dep.groups[g as usize].member_tors() {
            own[v.idx()].set(i);
        }
    }
    let mut collect: Vec<BitmapCollect> = t
        .nodes()
        .map(|v| {
            let p = &progs[v.idx()];
            BitmapCollect::new(p.father, v == tag.origin, std::mem::take(&mut own[v.idx()]), failed_links.len() as u32)
        })
        .collect();
    let (net2, rep) = run_async(net, PhaseEnv::new(ecfg, main_scope.clone(), flood.end), &mut collect);
    net = net2;
    run.bitmap_bytes = Bits::new(a).bytes();
    let fast = collect[tag.origin.idx()].finished_at.ok_or_else(|| Error::Contract("bitmap collection did not finish".into()))?;
    run.fast_done = Some(fast);
    run.events.push(("fast_recovery", "bitmaps_ready", fast));
    run.phases.push(("bitmaps", rep));

    let index_of: BTreeMap<u32, usize> = run.affected.iter().enumerate().map(|(i, &g)| (g, i)).collect();
    run.delivery_ok = true;
    run.bitmaps_consistent = true;
    for &g in &recoverable {
        let group = &dep.groups[g as usize];
        let i = index_of[&g];
        let Some(path) = forward_by_bitmaps(t, &collect, i, group.src_tor()) else {
            run.delivery_ok = false;
            continue;
        };
        let mut reached: Vec<NodeId> = path.iter().copied().filter(|v| collect[v.idx()].own.get(i)).collect();
        reached.sort_unstable();
        let mut want = group.member_tors();
        want.sort_unstable();
        run.delivery_ok &= reached == want;
        let mut visited = path.clone();
        visited.sort_unstable();
        let mut marked: Vec<NodeId> = t.nodes().filter(|v| collect[v.idx()].in_tree.get(i)).collect();
        marked.sort_unstable();
        // The sender's path to the root is marked by its own bit, so the
        // walk should cover exactly the marked switches.
        run.bitmaps_consistent &= visited == marked;
    }
    run.bitmaps = collect;

    // Re-optimize on a fresh spanner.
    let opt_cfg = EngineConfig { synchronizer: Synchronizer::Alpha, p_batch: cfg.opt_batch, pack_rounds: true, ..*ecfg };
    let flood_tree = {
        let parents: Vec<Option<NodeId>> = t
            .nodes()
            .map(|v| progs[v.idx()].father.filter(|_| in_main[v.idx()]).map(|p| t.neighbor(v, p)))
            .collect();
        Arc::new(SyncTree::from_parents(t, tag.origin, &parents)?)
    };
    run.recovery_tree = Some((*flood_tree).clone());
    let env = |at: Nanos| PhaseEnv::new(&opt_cfg, main_scope.clone(), at).with_sync_tree(flood_tree.clone());
    let (net2, sp) = algos::spanner(net, env(fast), cfg.spanner_k, sc.seed)?;
    net = net2;
    run.events.push(("optimize", "spanner_done", sp.report.end));
    let groups: Vec<&Group> = recoverable.iter().map(|&g| &dep.groups[g as usize]).collect();
    let mut sources: Vec<NodeId> = groups.iter().map(|g| g.src_tor()).collect();
    sources.sort_unstable();
    sources.dedup();
    let (net2, bfs, bfs_rep) = algos::multi_bfs(net, env(sp.report.end), &sources, Some(&sp.kept))?;
    net = net2;
    run.events.push(("optimize", "bfs_done", bfs_rep.end));
    let src_index: Vec<u32> = groups.iter().map(|g| sources.binary_search(&g.src_tor()).unwrap() as u32).collect();
    let dsts: Vec<Vec<NodeId>> = groups.iter().map(|g| g.dst_tors()).collect();
    let (net2, spt) = algos::set_cover_spt(net, env(bfs_rep.end), algos::layer_views(bfs), &src_index, &dsts)?;
    net = net2;
    run.full_done = Some(spt.report.end);
    run.events.push(("optimize", "trees_ready", spt.report.end));
    run.phases.push(("spanner", sp.report));
    run.phases.push(("bfs", bfs_rep));
    run.phases.push(("set_cover", spt.report));

    run.spt_ok = true;
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.sort_by_key(|&i| (src_index[i], i));
    let mut cached: Option<(u32, Vec<Option<u32>>, Vec<Option<u32>>)> = None;
    let mut new_trees = Vec::with_capacity(groups.len());
    for (i, edges) in spt.edges.into_iter().enumerate() {
        new_trees.push(Some(GroupTree::from_edges(groups[i].src_tor(), edges)));
    }
    for i in order {
        let g = groups[i];
        if cached.as_ref().is_none_or(|c| c.0 != src_index[i]) {
            cached = Some((src_index[i], layers(t, &main_scope.usable, g.src_tor()), layers(t, &sp.kept, g.src_tor())));
        }
        let (_, graph, span) = cached.as_ref().unwrap();
        let tree = new_trees[i].as_ref().unwrap();
        for &d in &dsts[i] {
            run.spt_ok &= tree.depth_of(d).is_some() && tree.depth_of(d) == span[d.idx()];
        }
        run.stretch.extend(stretch(tree, graph, &dsts[i]).into_iter().map(|(d, x)| (g.id, d, x)));
    }
    run.new_trees = groups.iter().zip(new_trees).map(|(g, t)| (g.id, t.unwrap())).collect();

    let mut meter = net.take_meter().expect("meter enabled above");
    run.max_overhead_bps = meter.max_window_bps();
    run.overhead_series = meter.series();
    run.stats = net.stats().clone();
    Ok(run)
}
