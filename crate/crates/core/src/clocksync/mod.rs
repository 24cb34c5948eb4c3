//! Clock synchronization reacting to switch and link failures.
//!
//! A sync tree distributes time from its root every sync interval. When a
//! node stops hearing from its parent it probes; enough unanswered probes
//! make it a detector, which floods a fresh spanning tree rooted at itself.
//! Concurrent floods resolve to the one with the latest detection. Once the
//! flood has settled, a background optimization replaces the flood tree by a
//! near-minimum-height tree.
//!
//! Periodic sync and probe messages are modelled analytically from the
//! link delay model; the flood and the optimization run packet by packet on
//! the simulated network, so their control overhead is metered.

mod config;
pub mod detect;
pub mod optimize;
pub mod timeline;

use std::sync::Arc;

pub use config::ClockConfig;
pub use detect::{detection_time, CheckAction, ProbeMonitor};
pub use optimize::{optimize_tree, sample_candidates, OptimizeOutcome};
pub use timeline::{emit_syncs, tree_latency, SyncEvent, SyncLog};

use crate::algos::{FloodTag, Flooding};
use crate::engine::{build_sync_tree, run_async, EngineConfig, PhaseEnv, PhaseReport, Scope, SyncTree};
use crate::error::{Error, Result};
use crate::simcore::{serialization_ns, FailureSpec, FailureTarget, Nanos, Network, WireStats, MICROS};
use crate::topo::{components_where, LinkId, NodeId, Topology};

/// Timestamp plus sequence number carried by a sync message.
pub const SYNC_PAYLOAD: u32 = 12;

#[derive(Debug, Clone)]
pub struct ClockScenario {
    pub clock: ClockConfig,
    pub engine: EngineConfig,
    pub failures: Vec<FailureSpec>,
    pub seed: u64,
}

impl ClockScenario {
    /// Use-case defaults: 100-byte packets and a 100 Mbps control budget.
    pub fn new(failures: Vec<FailureSpec>, seed: u64) -> Self {
        let engine = EngineConfig { packet_floor: 100, control_budget_bps: Some(100e6), ..Default::default() };
        ClockScenario { clock: ClockConfig::default(), engine, failures, seed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Detection {
    pub node: NodeId,
    pub at: Nanos,
}

#[derive(Debug, Clone)]
pub struct ClockRun {
    pub initial_tree: SyncTree,
    /// Nodes whose monitor fired, in time order. A detector already
    /// reached by a flood does not start its own.
    pub detections: Vec<Detection>,
    pub first_failure: Option<Nanos>,
    pub first_detection: Option<Nanos>,
    /// Tags of the floods that won in each component.
    pub winning_floods: Vec<FloodTag>,
    /// Every surviving node joined the flood tree it ends up in.
    pub attach_done: Option<Nanos>,
    pub flood_report: Option<PhaseReport>,
    /// Flood tree of the largest surviving component.
    pub recovery_tree: Option<SyncTree>,
    pub optimized: Option<OptimizeOutcome>,
    /// The optimized tree took over.
    pub full_done: Option<Nanos>,
    pub partitioned: bool,
    pub log: SyncLog,
    pub eps_series: Vec<(Nanos, f64)>,
    pub peak_eps: f64,
    pub overhead_series: Vec<(Nanos, LinkId, f64)>,
    pub max_overhead_bps: f64,
    pub stats: WireStats,
    pub end: Nanos,
}

impl ClockRun {
    pub fn fast_recovery_ns(&self) -> Option<Nanos> {
        Some(self.attach_done? - self.first_failure?)
    }

    pub fn full_recovery_ns(&self) -> Option<Nanos> {
        Some(self.full_done? - self.first_failure?)
    }

    pub fn detection_latency_ns(&self) -> Option<Nanos> {
        Some(self.first_detection? - self.first_failure?)
    }
}

fn hop_latency(t: &Topology, ecfg: &EngineConfig, l: LinkId) -> Nanos {
    let p = t.link(l).params;
    serialization_ns(ecfg.packet_size(SYNC_PAYLOAD), p.bandwidth_bps) + p.base_prop_delay + ecfg.processing_delay_ns
}

/// When each node stops receiving syncs from the root of `tree` because a
/// link or switch on its path failed.
fn cut_times(t: &Topology, tree: &SyncTree, link_down: &[Nanos], node_down: &[Nanos]) -> Vec<Nanos> {
    let mut cut = vec![Nanos::MAX; t.node_count()];
    let mut order: Vec<NodeId> = tree.members().collect();
    order.sort_by_key(|v| tree.depth[v.idx()]);
    for v in order {
        if let Some((p, port)) = tree.parent[v.idx()] {
            let l = t.ports(v)[port].link;
            cut[v.idx()] = cut[p.idx()].min(link_down[l.idx()]).min(node_down[p.idx()]);
        }
    }
    cut
}

pub fn run(topo: Arc<Topology>, sc: &ClockScenario) -> Result<ClockRun> {
    let cfg = &sc.clock;
    let ecfg = &sc.engine;
    cfg.validate()?;
    ecfg.validate()?;
    let t = topo.as_ref();
    let n = t.node_count();
    let interval = cfg.sync_interval_ns;

    let mut net = Network::new(topo.clone(), ecfg.net_config(), sc.seed);
    net.enable_meter();
    let tree0 = build_sync_tree(t, &Scope::full(t))?;
    let hop = |l: LinkId| hop_latency(t, ecfg, l);
    let lat0 = tree_latency(t, &tree0, hop);
    let all_synced = lat0.iter().flatten().copied().max().unwrap_or(0);

    let mut link_down = vec![Nanos::MAX; t.edge_count()];
    let mut node_down = vec![Nanos::MAX; n];
    let mut dead = Vec::new();
    for f in &sc.failures {
        if f.time <= all_synced {
            return Err(Error::config(format!(
                "failure at {} ns precedes the first complete synchronization at {all_synced} ns",
                f.time
            )));
        }
        for l in net.inject_failure(f, 0)? {
            link_down[l.idx()] = link_down[l.idx()].min(f.time);
        }
        if let FailureTarget::Switch { node } = f.target {
            node_down[node as usize] = node_down[node as usize].min(f.time);
            dead.push(NodeId(node));
        }
    }
    let first_failure = sc.failures.iter().map(|f| f.time).min();
    let failed_links: Vec<LinkId> = (0..t.edge_count()).filter(|&i| link_down[i] < Nanos::MAX).map(|i| LinkId(i as u32)).collect();
    let alive = |v: NodeId| node_down[v.idx()] == Nanos::MAX;

    // Detection on the original tree.
    let cut = cut_times(t, &tree0, &link_down, &node_down);
    let mut detections = Vec::new();
    for v in t.nodes().filter(|&v| alive(v) && cut[v.idx()] < Nanos::MAX) {
        let (p, port) = tree0.parent[v.idx()].expect("only non-roots can be cut off");
        let l = t.ports(v)[port].link;
        let lat = lat0[v.idx()].unwrap();
        let last_heard = (cut[v.idx()] - 1 - lat) / interval * interval + lat;
        let answered = |at: Nanos| at < node_down[p.idx()] && at < link_down[l.idx()];
        let max_checks = 4 * cfg.probe_loss_threshold + 4;
        if let Some(at) = detection_time(last_heard, interval, cfg.probe_loss_threshold, max_checks, answered) {
            detections.push(Detection { node: v, at });
        }
    }
    detections.sort_by_key(|d| (d.at, d.node));
    let first_detection = detections.first().map(|d| d.at);
    if let (Some(det), Some(last)) = (first_detection, sc.failures.iter().map(|f| f.time).max()) {
        if last >= det {
            return Err(Error::config(format!(
                "failure at {last} ns happens after recovery has already started at {det} ns"
            )));
        }
    }

    let mut log = SyncLog::new(n);
    let mut winning_floods = Vec::new();
    let mut flood_report = None;
    let mut recovery_tree = None;
    let mut optimized = None;
    let mut attach_done = None;
    let mut full_done = None;
    let mut first_join = vec![Nanos::MAX; n];
    let scope = Scope::without(t, &failed_links, &dead);
    let comps: Vec<Vec<NodeId>> =
        components_where(t, |l| scope.link_ok(l)).into_iter().filter(|c| scope.alive[c[0].idx()]).collect();
    let partitioned = comps.len() > 1;
    let main = comps.iter().max_by_key(|c| (c.len(), std::cmp::Reverse(c[0]))).cloned().unwrap_or_default();
    let mut end = first_failure.unwrap_or(all_synced) + cfg.tail_ns;

    if let Some(t_det) = first_detection {
        let mut progs: Vec<Flooding> = vec![Flooding::default(); n];
        for d in &detections {
            progs[d.node.idx()] = Flooding::detector(d.at);
        }
        let (net2, report) = run_async(net, PhaseEnv::new(ecfg, scope.clone(), t_det), &mut progs);
        net = net2;
        attach_done = progs.iter().filter_map(|p| p.joined_at).max();
        for (v, p) in progs.iter().enumerate() {
            first_join[v] = p.first_joined_at.unwrap_or(Nanos::MAX);
            for &(at, depth) in &p.joins {
                log.push(NodeId::from(v), at, depth);
            }
        }
        let flood_end = report.end;
        flood_report = Some(report);

        let mut tags: Vec<FloodTag> = progs.iter().filter_map(|p| p.tag).collect();
        tags.sort_unstable();
        tags.dedup();
        let main_tag = progs[main[0].idx()].tag;
        let mut fr_trees = Vec::new();
        for &tag in &tags {
            let parents: Vec<Option<NodeId>> = t
                .nodes()
                .map(|v| {
                    let p = &progs[v.idx()];
                    p.father.filter(|_| p.tag == Some(tag)).map(|port| t.neighbor(v, port))
                })
                .collect();
            fr_trees.push((tag, SyncTree::from_parents(t, tag.origin, &parents)?));
        }
        winning_floods = tags;

        if let Some(mt) = main_tag {
            let (_, fr) = fr_trees.iter().find(|(tag, _)| *tag == mt).unwrap();
            let mut opt_scope = scope.clone();
            let in_main: Vec<bool> = {
                let mut m = vec![false; n];
                main.iter().for_each(|v| m[v.idx()] = true);
                m
            };
            for v in t.nodes().filter(|v| !in_main[v.idx()]) {
                opt_scope.alive[v.idx()] = false;
                for a in t.ports(v) {
                    opt_scope.usable[a.link.idx()] = false;
                }
            }
            let candidates = sample_candidates(cfg, ecfg, &main, sc.seed, mt.origin);
            let carrier = Arc::new(fr.clone());
            let (net2, out) = optimize_tree(net, cfg, ecfg, &opt_scope, flood_end, carrier, &candidates)?;
            net = net2;
            full_done = Some(out.end);
            end = out.end + cfg.tail_ns;
            let lat = tree_latency(t, &out.tree, hop);
            emit_syncs(&mut log, &out.tree, &lat, out.end, end, interval, |_, _| true);
            recovery_tree = Some(fr.clone());
            optimized = Some(out);
        } else {
            end = end.max(attach_done.unwrap_or(0) + cfg.tail_ns);
        }

        for (tag, tree) in &fr_trees {
            let until = if Some(*tag) == main_tag { full_done.unwrap_or(end) } else { end };
            let lat = tree_latency(t, tree, hop);
            let joined: Vec<Nanos> = progs.iter().map(|p| p.joined_at.unwrap_or(Nanos::MAX)).collect();
            emit_syncs(&mut log, tree, &lat, tag.ts + interval, until, interval, |v, at| at >= joined[v.idx()]);
        }
    }

    emit_syncs(&mut log, &tree0, &lat0, 0, end, interval, |v, at| {
        at < cut[v.idx()] && at < first_join[v.idx()] && at < node_down[v.idx()]
    });
    log.sort();

    let series_nodes: Vec<NodeId> = t.nodes().filter(|&v| alive(v)).collect();
    let eps_series = log.max_series(cfg, &series_nodes, all_synced, end, cfg.series_step_ns);
    let from = first_failure.unwrap_or(0);
    let peak_eps = eps_series.iter().filter(|(at, _)| *at >= from).map(|&(_, e)| e).fold(0.0, f64::max);
    let mut meter = net.take_meter().expect("meter enabled above");
    Ok(ClockRun {
        initial_tree: tree0,
        detections,
        first_failure,
        first_detection,
        winning_floods,
        attach_done,
        flood_report,
        recovery_tree,
        optimized,
        full_done,
        partitioned,
        log,
        eps_series,
        peak_eps,
        overhead_series: meter.series(),
        max_overhead_bps: meter.max_window_bps(),
        stats: net.stats().clone(),
        end,
    })
}

/// Default failure time used by the CLI: a few intervals into the run, so
/// that every node has synchronized several times.
pub fn default_failure_time(cfg: &ClockConfig) -> Nanos {
    3 * cfg.sync_interval_ns + 7 * MICROS
}
