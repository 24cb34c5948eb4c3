//! Round-based BFS, one or many instances at once.
//!
//! A node whose depth equals the current round broadcasts; an unvisited
//! node receiving such messages takes depth `round` and the lowest-id
//! sender as father, then broadcasts in the same round. All messages of one
//! round count as simultaneous, which makes the father choice independent
//! of the synchronizer. Each message carries one flag bit telling the
//! receiver whether it was chosen as father, so parents learn their
//! children without extra traffic. Several instances share rounds and
//! their messages are batched per port.

use crate::engine::{id_set_bytes, Ctx, Program};
use crate::topo::{NodeId, Port};

/// Payload of one BFS sub-message.
pub const BFS_PAYLOAD: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BfsMsg {
    pub instance: u32,
    pub depth: u32,
    pub to_father: bool,
}

#[derive(Debug, Clone, Default)]
pub struct InstanceState {
    pub depth: Option<u32>,
    pub father: Option<Port>,
    pub children: Vec<Port>,
    /// Ports that offered depth `depth - 1` in the adoption round.
    pub up_ports: Vec<Port>,
}

#[derive(Debug, Clone)]
pub struct MultiBfs {
    /// Instances this node seeds.
    pub seeds: Vec<u32>,
    pub inst: Vec<InstanceState>,
    /// Ports BFS may use; `None` means all live ports.
    pub allowed: Option<Vec<bool>>,
    pending: Vec<u32>,
}

impl MultiBfs {
    pub fn new(instances: usize, seeds: Vec<u32>, allowed: Option<Vec<bool>>) -> Self {
        MultiBfs { seeds, inst: vec![InstanceState::default(); instances], allowed, pending: Vec::new() }
    }

    fn emit(&self, ctx: &mut Ctx<BfsMsg>, instance: u32) {
        let st = &self.inst[instance as usize];
        let depth = st.depth.unwrap();
        let father = st.father;
        let allowed = self.allowed.clone();
        for &p in ctx.live_ports().to_vec().iter() {
            if allowed.as_ref().is_some_and(|a| !a[p]) {
                continue;
            }
            ctx.send(p, BfsMsg { instance, depth, to_father: Some(p) == father });
        }
    }
}

impl Program for MultiBfs {
    type Msg = BfsMsg;

    fn payload_bytes(&self, _: &BfsMsg) -> u32 {
        BFS_PAYLOAD
    }

    /// Depth byte, the set of instances, and which of them name the
    /// receiver as father.
    fn packed_payload(&self, msgs: &[BfsMsg]) -> Option<u32> {
        let fathers = msgs.iter().filter(|m| m.to_father).count();
        Some(1 + id_set_bytes(self.inst.len(), msgs.len()) + id_set_bytes(msgs.len(), fathers))
    }

    fn round(&mut self, ctx: &mut Ctx<BfsMsg>, inbox: &[(Port, BfsMsg)]) {
        if ctx.round == 0 {
            for &s in &self.seeds.clone() {
                self.inst[s as usize].depth = Some(0);
                self.emit(ctx, s);
            }
            return;
        }
        self.pending.clear();
        for &(p, m) in inbox {
            let st = &mut self.inst[m.instance as usize];
            if m.to_father {
                st.children.push(p);
            }
            match st.depth {
                None => {
                    st.depth = Some(m.depth + 1);
                    st.up_ports.push(p);
                    self.pending.push(m.instance);
                }
                Some(d) if d == m.depth + 1 && self.pending.contains(&m.instance) => st.up_ports.push(p),
                _ => {}
            }
        }
        let mut fresh = std::mem::take(&mut self.pending);
        fresh.sort_unstable();
        fresh.dedup();
        for &i in &fresh {
            let st = &mut self.inst[i as usize];
            st.up_ports.sort_unstable_by_key(|&p| ctx.neighbor(p));
            st.father = st.up_ports.first().copied();
        }
        for &i in &fresh {
            self.emit(ctx, i);
        }
        self.pending = fresh;
    }

    fn done(&self) -> bool {
        true
    }
}

/// Depth and father per node of a single BFS instance.
pub fn extract(progs: &[MultiBfs], instance: usize, neighbor: impl Fn(NodeId, Port) -> NodeId) -> (Vec<Option<u32>>, Vec<Option<NodeId>>) {
    let depth = progs.iter().map(|p| p.inst[instance].depth).collect();
    let father = progs
        .iter()
        .enumerate()
        .map(|(v, p)| p.inst[instance].father.map(|port| neighbor(NodeId::from(v), port)))
        .collect();
    (depth, father)
}
