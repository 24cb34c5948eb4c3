//! Scenario configuration, runs, parameter sweeps and CSV output.
//!
//! Every CSV starts with a `# schema=… config=… seed=…` line followed by the
//! column names. Layouts:
//!
//! | file                | columns                                   |
//! |---------------------|-------------------------------------------|
//! | epsilon_series.csv  | t_ns, max_eps_ns                          |
//! | overhead_series.csv | t_ns, link, bps                           |
//! | recovery.csv        | phase, event, t_ns                        |
//! | headers.csv         | group_id, mode, bytes                     |
//! | stretch.csv         | group_id, dst, stretch                    |
//! | algo_summary.csv    | algo, topo, seed, rounds, rtt, msgs       |
//! | manifest.csv        | dir, seed, loss_rate, config, status, fast_recovery_ns, full_recovery_ns |

pub mod config;
pub mod metrics;
pub mod output;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

pub use config::{ScenarioConfig, TopologySpec, UseCase, SCHEMA_VERSION, SEED_ENV};
pub use output::{read_csv, write_csv, CsvHeader};

use crate::algos;
use crate::clocksync::{self, ClockScenario};
use crate::engine::{build_sync_tree, Scope};
use crate::error::{Error, Result};
use crate::mcast::{self, McastScenario};
use crate::simcore::{FailureSpec, Nanos, MICROS};
use crate::topo::{bfs_distances, LinkId, Topology};

/// Simulated-time limit for algorithm runs without a configured horizon.
pub const DEFAULT_HORIZON_NS: Nanos = 10_000_000_000;

/// Time of automatically injected multicast failures.
pub const MCAST_FAILURE_NS: Nanos = 157 * MICROS;

#[derive(Debug, Clone, Default, Serialize)]
pub struct RunSummary {
    pub use_case: String,
    pub topology: String,
    pub seed: u64,
    pub config_hash: String,
    pub converged: bool,
    pub fast_recovery_ns: Option<Nanos>,
    pub full_recovery_ns: Option<Nanos>,
    pub rounds: Option<u64>,
    pub convergence_rtt: Option<f64>,
    pub normalized_convergence: Option<f64>,
    pub avg_messages: Option<f64>,
    pub peak_eps_ns: Option<f64>,
    pub max_overhead_bps: f64,
    pub affected_groups: Option<usize>,
    pub header_ratio: Option<f64>,
    pub max_stretch: Option<f64>,
    pub mean_stretch: Option<f64>,
    pub files: Vec<String>,
}

/// Runs one scenario with its effective seed and writes its files to `out`.
/// `base` resolves relative topology paths.
pub fn run_scenario(cfg: &ScenarioConfig, out: &Path, base: Option<&Path>) -> Result<RunSummary> {
    let seed = cfg.effective_seed()?;
    run_with_seed(cfg, seed, out, base)
}

fn run_with_seed(cfg: &ScenarioConfig, seed: u64, out: &Path, base: Option<&Path>) -> Result<RunSummary> {
    let mut cfg = cfg.clone();
    cfg.seed = seed;
    cfg.validate()?;
    std::fs::create_dir_all(out)?;
    let topo = Arc::new(cfg.topology(seed, base)?);
    topo.validate()?;
    let header = CsvHeader { config_hash: cfg.hash(), seed };
    let mut s = RunSummary { topology: cfg.topology.label(), seed, config_hash: header.config_hash.clone(), ..Default::default() };
    match &cfg.use_case {
        UseCase::Clocksync => run_clock(&cfg, topo, &header, out, &mut s)?,
        UseCase::Mcast => run_mcast(&cfg, topo, &header, out, &mut s)?,
        UseCase::Algorithm { name } => run_algo(&cfg, name, topo, &header, out, &mut s)?,
    }
    let json = serde_json::to_string_pretty(&s).expect("summary serializes");
    std::fs::write(out.join("summary.json"), json + "\n")?;
    if !s.converged {
        return Err(Error::NotConverged(format!("{} on {}", s.use_case, s.topology)));
    }
    Ok(s)
}

fn overhead_rows(series: &[(Nanos, LinkId, f64)]) -> impl Iterator<Item = (Nanos, u32, f64)> + '_ {
    series.iter().map(|&(t, l, bps)| (t, l.0, bps))
}

/// Clock-sync failures: the root of the synchronization tree, then its
/// lowest-id children, one microsecond apart.
pub fn clock_auto_failures(t: &Topology, cfg: &ScenarioConfig) -> Result<Vec<FailureSpec>> {
    let tree = build_sync_tree(t, &Scope::full(t))?;
    let at = clocksync::default_failure_time(&cfg.clock);
    let mut kids: Vec<_> = t.nodes().filter(|v| tree.parent[v.idx()].is_some_and(|(p, _)| p == tree.root)).collect();
    kids.sort();
    Ok(std::iter::once(tree.root)
        .chain(kids)
        .take(cfg.auto_failures.max(1))
        .enumerate()
        .map(|(i, v)| FailureSpec::switch(at + i as Nanos * MICROS, v))
        .collect())
}

fn run_clock(cfg: &ScenarioConfig, topo: Arc<Topology>, h: &CsvHeader, out: &Path, s: &mut RunSummary) -> Result<()> {
    s.use_case = "clocksync".into();
    let failures = if cfg.failures.is_empty() { clock_auto_failures(&topo, cfg)? } else { cfg.failures.clone() };
    let sc = ClockScenario { clock: cfg.clock, engine: cfg.engine_config(), failures, seed: h.seed };
    let r = clocksync::run(topo, &sc)?;
    write_csv(&out.join("epsilon_series.csv"), h, &["t_ns", "max_eps_ns"], &r.eps_series)?;
    write_csv(&out.join("overhead_series.csv"), h, &["t_ns", "link", "bps"], overhead_rows(&r.overhead_series))?;
    let mut events: Vec<(&str, &str, Nanos)> = Vec::new();
    events.extend(r.first_failure.map(|t| ("failure", "first", t)));
    events.extend(r.first_detection.map(|t| ("detect", "first", t)));
    events.extend(r.attach_done.map(|t| ("fast_recovery", "tree_ready", t)));
    events.extend(r.full_done.map(|t| ("optimize", "tree_ready", t)));
    write_csv(&out.join("recovery.csv"), h, &["phase", "event", "t_ns"], events)?;
    s.files = vec!["epsilon_series.csv".into(), "overhead_series.csv".into(), "recovery.csv".into()];
    let mut ok = r.flood_report.as_ref().is_none_or(|p| p.converged);
    if let Some(o) = &r.optimized {
        ok &= o.phases.iter().all(|p| p.1.converged);
    }
    s.converged = ok && (r.first_detection.is_none() || r.attach_done.is_some());
    s.fast_recovery_ns = r.fast_recovery_ns();
    s.full_recovery_ns = r.full_recovery_ns();
    s.peak_eps_ns = Some(r.peak_eps);
    s.max_overhead_bps = r.max_overhead_bps;
    Ok(())
}

/// Multicast failures: the switch touching the most groups, then the
/// busiest links not attached to it, three microseconds apart.
pub fn mcast_auto_failures(t: &Topology, dep: &mcast::Deployment, count: usize) -> Vec<FailureSpec> {
    let (victim, _) = mcast::worst_switch(t, dep);
    let mut out = vec![FailureSpec::switch(MCAST_FAILURE_NS, victim)];
    let links = mcast::busiest_links(dep).into_iter().filter(|&(l, c)| {
        let e = t.link(l);
        c > 0 && e.a != victim && e.b != victim
    });
    for (i, (l, _)) in links.take(count.max(1) - 1).enumerate() {
        out.push(FailureSpec::link(MCAST_FAILURE_NS + 3 * MICROS * (i as Nanos + 1), l));
    }
    out
}

fn run_mcast(cfg: &ScenarioConfig, topo: Arc<Topology>, h: &CsvHeader, out: &Path, s: &mut RunSummary) -> Result<()> {
    s.use_case = "mcast".into();
    let engine = cfg.engine_config();
    let dep = mcast::deploy(&topo, &cfg.mcast, &engine, h.seed)?;
    let headers = mcast::header_sizes(&topo, &dep, h.seed)?;
    write_csv(
        &out.join("headers.csv"),
        h,
        &["group_id", "mode", "bytes"],
        headers.iter().flat_map(|&(g, a, b)| [(g, "naive_sa", a), (g, "spanner_sa", b)]),
    )?;
    let (na, sp) = headers.iter().fold((0u64, 0u64), |acc, r| (acc.0 + r.1 as u64, acc.1 + r.2 as u64));
    s.header_ratio = (sp > 0).then(|| na as f64 / sp as f64);

    let failures = if cfg.failures.is_empty() { mcast_auto_failures(&topo, &dep, cfg.auto_failures) } else { cfg.failures.clone() };
    let sc = McastScenario { mcast: cfg.mcast, engine, failures, seed: h.seed };
    let r = mcast::run(topo, &dep, &sc)?;
    let mut events: Vec<(&str, &str, Nanos)> = r.first_failure.map(|t| ("failure", "first", t)).into_iter().collect();
    events.extend(r.events.iter().copied());
    write_csv(&out.join("recovery.csv"), h, &["phase", "event", "t_ns"], events)?;
    write_csv(&out.join("stretch.csv"), h, &["group_id", "dst", "stretch"], r.stretch.iter().map(|&(g, d, x)| (g, d.0, x)))?;
    write_csv(&out.join("overhead_series.csv"), h, &["t_ns", "link", "bps"], overhead_rows(&r.overhead_series))?;
    s.files = ["headers.csv", "recovery.csv", "stretch.csv", "overhead_series.csv"].map(String::from).to_vec();
    s.converged = r.phases.iter().all(|p| p.1.converged) && r.delivery_ok && r.bitmaps_consistent && r.spt_ok;
    s.fast_recovery_ns = r.fast_recovery_ns();
    s.full_recovery_ns = r.full_recovery_ns();
    s.affected_groups = Some(r.affected.len());
    s.max_overhead_bps = r.max_overhead_bps;
    if !r.stretch.is_empty() {
        s.max_stretch = Some(r.max_stretch());
        s.mean_stretch = Some(r.mean_stretch());
    }
    Ok(())
}

fn run_algo(cfg: &ScenarioConfig, name: &str, topo: Arc<Topology>, h: &CsvHeader, out: &Path, s: &mut RunSummary) -> Result<()> {
    s.use_case = name.to_string();
    let engine = cfg.engine_config();
    let horizon = cfg.horizon_ns.unwrap_or(DEFAULT_HORIZON_NS);
    let r = algos::run_named(name, topo.clone(), &engine, h.seed, horizon)?;
    let rtt = metrics::rtt_ns(&topo, engine.processing_delay_ns);
    let report = crate::engine::PhaseReport { start: 0, end: r.duration_ns, converged: r.converged, ..Default::default() };
    let rtts = metrics::convergence_time_rtt(&report, rtt);
    let height = build_sync_tree(&topo, &Scope::full(&topo)).map(|t| t.height()).unwrap_or(0);
    let msgs = metrics::avg_message_count(r.logical_sends, topo.node_count());
    write_csv(
        &out.join("algo_summary.csv"),
        h,
        &["algo", "topo", "seed", "rounds", "rtt", "msgs"],
        [(name, cfg.topology.label(), h.seed, r.rounds, rtts, msgs)],
    )?;
    s.files = vec!["algo_summary.csv".into()];
    s.converged = r.converged;
    s.rounds = Some(r.rounds);
    s.convergence_rtt = rtts;
    s.normalized_convergence = rtts.and_then(|x| metrics::normalized_convergence_time(x, engine.synchronizer, height));
    s.avg_messages = Some(msgs);
    Ok(())
}

/// A cartesian sweep over seeds and loss rates around a base scenario.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub base: ScenarioConfig,
    pub seeds: Vec<u64>,
    pub loss_rates: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestRow {
    pub dir: String,
    pub seed: u64,
    pub loss_rate: f64,
    pub config: String,
    pub status: String,
    pub fast_recovery_ns: Option<Nanos>,
    pub full_recovery_ns: Option<Nanos>,
}

/// Runs every point of the sweep (in parallel across points) into its own
/// directory under `out` and writes `manifest.csv` in sweep order.
pub fn sweep(spec: &SweepSpec, out: &Path, base: Option<&Path>) -> Result<Vec<ManifestRow>> {
    let seeds = if spec.seeds.is_empty() { vec![spec.base.seed] } else { spec.seeds.clone() };
    let losses = if spec.loss_rates.is_empty() { vec![spec.base.loss_rate] } else { spec.loss_rates.clone() };
    let points: Vec<(u64, f64)> = losses.iter().flat_map(|&l| seeds.iter().map(move |&s| (s, l))).collect();
    std::fs::create_dir_all(out)?;
    let rows: Vec<ManifestRow> = points
        .par_iter()
        .map(|&(seed, loss)| {
            let mut cfg = spec.base.clone();
            cfg.loss_rate = loss;
            cfg.seed = seed;
            let dir = format!("seed{seed}_loss{loss}");
            let res = run_with_seed(&cfg, seed, &out.join(&dir), base);
            let (status, fast, full) = match &res {
                Ok(s) => ("ok".to_string(), s.fast_recovery_ns, s.full_recovery_ns),
                Err(Error::NotConverged(_)) => ("not_converged".to_string(), None, None),
                Err(e) => (format!("error: {e}"), None, None),
            };
            ManifestRow { dir, seed, loss_rate: loss, config: cfg.hash(), status, fast_recovery_ns: fast, full_recovery_ns: full }
        })
        .collect();
    let h = CsvHeader { config_hash: spec.base.hash(), seed: spec.base.seed };
    write_csv(
        &out.join("manifest.csv"),
        &h,
        &["dir", "seed", "loss_rate", "config", "status", "fast_recovery_ns", "full_recovery_ns"],
        &rows,
    )?;
    Ok(rows)
}

/// Brute-force references the tests compare against.
pub const ORACLES: &[&str] = &["bfs", "mst"];

/// Writes the expected output of `algo` on `topo` to `path`: BFS depths
/// from node 0 as `node,depth` lines, or the minimum spanning tree weight
/// under the weights `run` uses for `mst`.
pub fn oracle(algo: &str, topo: &Topology, seed: u64, path: &Path) -> Result<PathBuf> {
    let text = match algo {
        "bfs" => {
            let d = bfs_distances(topo, crate::topo::NodeId(0));
            let mut s = String::from("node,depth\n");
            for (v, x) in d.iter().enumerate() {
                s += &format!("{v},{}\n", x.map_or(String::from("-"), |x| x.to_string()));
            }
            s
        }
        "mst" => {
            let w = algos::named_link_weights(topo, seed);
            format!("weight\n{}\n", kruskal_weight(topo, &w))
        }
        other => return Err(Error::config(format!("no oracle for '{other}' (available: {})", ORACLES.join(", ")))),
    };
    std::fs::write(path, text)?;
    Ok(path.to_path_buf())
}

/// Minimum spanning forest weight, ties broken by link id.
pub fn kruskal_weight(t: &Topology, w: &[u32]) -> u64 {
    let mut parent: Vec<usize> = (0..t.node_count()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut order: Vec<usize> = (0..t.edge_count()).collect();
    order.sort_by_key(|&i| (w[i], i));
    let mut total = 0;
    for i in order {
        let l = t.link(LinkId(i as u32));
        let (a, b) = (find(&mut parent, l.a.idx()), find(&mut parent, l.b.idx()));
        if a != b {
            parent[a] = b;
            total += w[i] as u64;
        }
    }
    total
}

/// Exit status for a harness result: 0 on success, 2 for configuration
/// errors, 3 when a run did not converge, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Param(_) | Error::Parse { .. } => 2,
        Error::NotConverged(_) => 3,
        _ => 1,
    }
}
