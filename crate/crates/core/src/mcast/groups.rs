//! Multicast group generation.
//!
//! Group sizes follow a log-normal law shifted by the two mandatory members
//! (sender and one receiver), with stochastic rounding so the configured
//! mean is met exactly in expectation. Members occupy distinct VM slots
//! drawn uniformly from all ToRs.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simcore::rng::substream;
use crate::topo::{NodeId, Topology};

pub const GROUP_STREAM: &str = "mcast.groups";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Slot {
    pub tor: NodeId,
    pub vm: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub id: u32,
    pub src: Slot,
    pub dsts: Vec<Slot>,
}

impl Group {
    pub fn src_tor(&self) -> NodeId {
        self.src.tor
    }

    /// ToRs hosting receivers other than the sender's own ToR, sorted.
    pub fn dst_tors(&self) -> Vec<NodeId> {
        let mut v: Vec<NodeId> = self.dsts.iter().map(|s| s.tor).filter(|&t| t != self.src.tor).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Switches that must be in the group's tree: the sender's ToR first,
    /// then the receiving ToRs.
    pub fn member_tors(&self) -> Vec<NodeId> {
        let mut v = vec![self.src.tor];
        v.extend(self.dst_tors());
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroupConfig {
    pub count: usize,
    /// Mean group size as a fraction of the switch count.
    pub avg_frac: f64,
    /// Shape of the log-normal size law.
    pub sigma: f64,
    /// Forces every group to this size when set.
    pub fixed_size: Option<usize>,
}

impl Default for GroupConfig {
    fn default() -> Self {
        GroupConfig { count: 10_000, avg_frac: 0.05, sigma: 1.0, fixed_size: None }
    }
}

pub fn generate_groups(t: &Topology, cfg: &GroupConfig, seed: u64) -> Result<Vec<Group>> {
    let tors: Vec<NodeId> = t.tors().collect();
    let per = t.hosts_per_tor();
    let slots = tors.len() * per;
    if slots < 2 || per > 256 {
        return Err(Error::config(format!("{} ToRs with {per} VMs each cannot host a group", tors.len())));
    }
    let mean = cfg.avg_frac * t.node_count() as f64;
    if cfg.fixed_size.is_none() && !(mean >= 2.0) {
        return Err(Error::config(format!("mean group size {mean:.2} is below 2")));
    }
    if !(cfg.sigma > 0.0) {
        return Err(Error::config("group size sigma must be positive"));
    }
    if cfg.fixed_size.is_some_and(|s| s < 2 || s > slots) {
        return Err(Error::config(format!("fixed group size must lie in [2, {slots}]")));
    }
    let extra = (mean - 2.0).max(0.0);
    let law = (extra > 0.0)
        .then(|| LogNormal::new(extra.ln() - cfg.sigma * cfg.sigma / 2.0, cfg.sigma).expect("finite parameters"));

    let mut out = Vec::with_capacity(cfg.count);
    for id in 0..cfg.count {
        let mut rng = substream(seed, GROUP_STREAM, id as u64);
        let size = match (cfg.fixed_size, &law) {
            (Some(s), _) => s,
            (None, Some(l)) => {
                let y: f64 = l.sample(&mut rng);
                2 + (y + rng.gen::<f64>()).floor() as usize
            }
            (None, None) => 2,
        }
        .min(slots);
        let mut members = sample(&mut rng, slots, size).into_iter().map(|i| Slot { tor: tors[i / per], vm: (i % per) as u8 });
        let src = members.next().unwrap();
        out.push(Group { id: id as u32, src, dsts: members.collect() });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topo::build_fat_tree;

    #[test]
    fn fixed_pair() {
        let t = build_fat_tree(4).unwrap();
        let g = generate_groups(&t, &GroupConfig { count: 1, fixed_size: Some(2), ..Default::default() }, 7).unwrap();
        assert_eq!(g[0].dsts.len(), 1);
        assert_ne!(g[0].src, g[0].dsts[0]);
    }

    #[test]
    fn mean_size_on_fat_tree_k8() {
        let t = build_fat_tree(8).unwrap();
        let g = generate_groups(&t, &GroupConfig { count: 10_000, ..Default::default() }, 1).unwrap();
        let mean = g.iter().map(|g| 1 + g.dsts.len()).sum::<usize>() as f64 / g.len() as f64;
        assert!((mean - 4.0).abs() <= 0.4, "mean {mean}");
    }

    #[test]
    fn deterministic() {
        let t = build_fat_tree(4).unwrap();
        let c = GroupConfig { count: 50, avg_frac: 0.2, ..Default::default() };
        assert_eq!(generate_groups(&t, &c, 3).unwrap(), generate_groups(&t, &c, 3).unwrap());
    }
}
