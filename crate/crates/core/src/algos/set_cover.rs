//! Small shortest-path trees by layered greedy set cover.
//!
//! Given BFS layers from a source, the tree is built bottom-up. Nodes that
//! must be in the tree at layer `d` notify their neighbors in layer `d-1`;
//! those reply with how many notifications they got; each notifying node
//! then picks the neighbor with the largest count (lowest id on ties) as
//! father, which puts that neighbor into the tree. Three rounds per layer,
//! every instance following the same global schedule from a shared upper
//! bound `layers` on the depth.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use crate::engine::{id_set_bytes, Ctx, Program};
use crate::topo::{NodeId, Port};

pub const SET_COVER_PAYLOAD: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoverMsg {
    Notify(u32),
    Count { inst: u32, count: u32 },
    Confirm(u32),
}

/// One node's place in the BFS layers around one source.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LayerView {
    pub depth: Option<u32>,
    /// Neighbors one layer closer to the source.
    pub up_ports: Vec<Port>,
}

#[derive(Debug, Clone, Default)]
pub struct CoverState {
    pub active: bool,
    pub father: Option<Port>,
    notified_by: Vec<Port>,
    counts: Vec<(u32, Port)>,
}

/// Many trees at once. Instances sharing a source share its BFS layers, and
/// only instances that have reached a node keep state there.
#[derive(Debug, Clone, Default)]
pub struct LayeredCover {
    pub layers: u32,
    views: Vec<LayerView>,
    inst_src: Arc<[u32]>,
    pub state: BTreeMap<u32, CoverState>,
    /// Rounds are scheduled, so silence is not completion before the last
    /// layer has been handled.
    finished: bool,
}

impl LayeredCover {
    /// `views[s]` describes source `s`, `inst_src[i]` is the source of
    /// instance `i` and `dst_of` lists the instances this node receives.
    pub fn new(layers: u32, views: Vec<LayerView>, inst_src: Arc<[u32]>, dst_of: impl IntoIterator<Item = u32>) -> Self {
        let state = dst_of
            .into_iter()
            .filter(|&i| views[inst_src[i as usize] as usize].depth.is_some())
            .map(|i| (i, CoverState { active: true, ..Default::default() }))
            .collect();
        LayeredCover { layers, views, inst_src, state, finished: false }
    }

    pub fn view(&self, inst: u32) -> &LayerView {
        &self.views[self.inst_src[inst as usize] as usize]
    }
}

impl Program for LayeredCover {
    type Msg = CoverMsg;

    fn payload_bytes(&self, _: &CoverMsg) -> u32 {
        SET_COVER_PAYLOAD
    }

    /// Per message kind present: a kind byte and the set of instances;
    /// counts add one byte each.
    fn packed_payload(&self, msgs: &[CoverMsg]) -> Option<u32> {
        let mut n = [0usize; 3];
        for m in msgs {
            n[match m {
                CoverMsg::Notify(_) => 0,
                CoverMsg::Count { .. } => 1,
                CoverMsg::Confirm(_) => 2,
            }] += 1;
        }
        let sets: u32 = n.iter().filter(|&&c| c > 0).map(|&c| 1 + id_set_bytes(self.inst_src.len(), c)).sum();
        Some(sets + n[1] as u32)
    }

    fn round(&mut self, ctx: &mut Ctx<CoverMsg>, inbox: &[(Port, CoverMsg)]) {
        let step = (ctx.round / 3) as u32;
        self.finished = step >= self.layers;
        if step > self.layers {
            return;
        }
        let layer = self.layers - step;
        for &(p, m) in inbox {
            match m {
                CoverMsg::Confirm(i) => self.state.entry(i).or_default().active = true,
                CoverMsg::Notify(i) => self.state.entry(i).or_default().notified_by.push(p),
                CoverMsg::Count { inst, count } => self.state.entry(inst).or_default().counts.push((count, p)),
            }
        }
        match ctx.round % 3 {
            0 => {
                if layer == 0 {
                    return;
                }
                for (&i, st) in &self.state {
                    let view = &self.views[self.inst_src[i as usize] as usize];
                    if st.active && view.depth == Some(layer) {
                        for &p in &view.up_ports {
                            ctx.send(p, CoverMsg::Notify(i));
                        }
                    }
                }
            }
            1 => {
                for (&i, st) in self.state.iter_mut() {
                    if st.notified_by.is_empty() {
                        continue;
                    }
                    let from: BTreeSet<Port> = st.notified_by.drain(..).collect();
                    let msg = CoverMsg::Count { inst: i, count: from.len() as u32 };
                    ctx.multicast(|p| from.contains(&p), msg);
                }
            }
            _ => {
                for (&i, st) in self.state.iter_mut() {
                    if st.counts.is_empty() {
                        continue;
                    }
                    let &(_, p) = st
                        .counts
                        .iter()
                        .min_by_key(|&&(c, p)| (std::cmp::Reverse(c), ctx.neighbor(p)))
                        .unwrap();
                    st.counts.clear();
                    st.father = Some(p);
                    ctx.send(p, CoverMsg::Confirm(i));
                }
            }
        }
    }

    fn done(&self) -> bool {
        self.finished
    }
}

/// Centralized version of the same greedy: returns the father of every
/// tree node, `None` elsewhere and at the source. `depth` and `up` describe
/// the BFS layers, with `up(v)` the neighbors of `v` one layer closer; it is
/// only evaluated for nodes that end up in the tree.
pub fn layered_cover_central(depth: &[Option<u32>], up: impl Fn(NodeId) -> Vec<NodeId>, dsts: &[NodeId]) -> Vec<Option<NodeId>> {
    let n = depth.len();
    let mut father = vec![None; n];
    let mut active = vec![false; n];
    for &d in dsts {
        if depth[d.idx()].is_some() {
            active[d.idx()] = true;
        }
    }
    let max = depth.iter().flatten().copied().max().unwrap_or(0);
    for layer in (1..=max).rev() {
        let members: Vec<(usize, Vec<NodeId>)> =
            (0..n).filter(|&v| active[v] && depth[v] == Some(layer)).map(|v| (v, up(NodeId::from(v)))).collect();
        let mut count: HashMap<NodeId, u32> = HashMap::new();
        for (_, ups) in &members {
            for &u in ups {
                *count.entry(u).or_default() += 1;
            }
        }
        for (v, ups) in &members {
            let f = *ups.iter().min_by_key(|&&u| (std::cmp::Reverse(count[&u]), u)).expect("layered node has an upper neighbor");
            father[*v] = Some(f);
            active[f.idx()] = true;
        }
    }
    father
}
