//! Background search for a shallow sync tree: sampled candidate roots each
//! grow a BFS tree, every tree finds its center, and an election picks the
//! tree with the smallest height after re-centering.

use std::sync::Arc;

use super::ClockConfig;
use crate::algos::{self, LeaderKey};
use crate::engine::{EngineConfig, PhaseEnv, PhaseReport, Scope, SyncTree, Synchronizer};
use crate::error::{Error, Result};
use crate::simcore::rng::substream;
use crate::simcore::{Nanos, Network};
use crate::topo::NodeId;

pub const SAMPLE_STREAM: &str = "clock.sample";

/// Each member volunteers independently with probability
/// `sample_expect / |members|`; `fallback` is used if nobody does.
pub fn sample_candidates(cfg: &ClockConfig, ecfg: &EngineConfig, members: &[NodeId], seed: u64, fallback: NodeId) -> Vec<NodeId> {
    let p = cfg.sample_expect / members.len().max(1) as f64;
    let picked: Vec<NodeId> = members
        .iter()
        .copied()
        .filter(|v| ecfg.arithmetic.bernoulli(p, &mut substream(seed, SAMPLE_STREAM, v.0 as u64)))
        .collect();
    if picked.is_empty() {
        vec![fallback]
    } else {
        picked
    }
}

#[derive(Debug, Clone)]
pub struct OptimizeOutcome {
    pub candidates: Vec<NodeId>,
    /// Candidate whose tree won.
    pub winner: NodeId,
    /// The winner's tree, re-rooted at its center.
    pub tree: SyncTree,
    pub phases: Vec<(&'static str, PhaseReport)>,
    pub end: Nanos,
}

/// Runs the three phases back to back under the α synchronizer, using
/// `carrier` (the tree already in place) for synchronizer traffic.
pub fn optimize_tree(
    net: Network,
    cfg: &ClockConfig,
    base: &EngineConfig,
    scope: &Scope,
    start: Nanos,
    carrier: Arc<SyncTree>,
    candidates: &[NodeId],
) -> Result<(Network, OptimizeOutcome)> {
    let ecfg = EngineConfig { synchronizer: Synchronizer::Alpha, p_batch: cfg.opt_batch, ..*base };
    let env = |at: Nanos| PhaseEnv::new(&ecfg, scope.clone(), at).with_sync_tree(carrier.clone());

    let (net, trees, r_bfs) = algos::multi_bfs(net, env(start), candidates, None)?;
    let (net, centers) = algos::find_centers(net, env(r_bfs.end), &trees)?;
    let keys: Vec<(NodeId, LeaderKey)> = candidates
        .iter()
        .zip(&centers.centers)
        .map(|(&c, ctr)| {
            let (at, h) = ctr.ok_or_else(|| Error::Contract(format!("no center found for candidate {c}")))?;
            Ok((at, LeaderKey { metric: h, id: c.0 }))
        })
        .collect::<Result<_>>()?;
    let (net, elected) = algos::elect(net, env(centers.report.end), &keys)?;

    let best = elected.best[keys[0].0.idx()].ok_or_else(|| Error::Contract("election produced no leader".into()))?;
    let i = candidates.iter().position(|c| c.0 == best.id).expect("winner is a candidate");
    let (center, _) = centers.centers[i].unwrap();
    let tree = SyncTree::from_parents(net.topology(), center, &centers.father[i])?;
    let end = elected.report.end;
    let phases = vec![("bfs", r_bfs), ("center", centers.report), ("elect", elected.report)];
    Ok((net, OptimizeOutcome { candidates: candidates.to_vec(), winner: NodeId(best.id), tree, phases, end }))
}
