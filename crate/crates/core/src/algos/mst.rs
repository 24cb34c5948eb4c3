//! Borůvka minimum spanning forest.
//!
//! Each iteration takes two synchronized rounds, both free-running so that
//! the convergecasts inside a fragment do not cost one round per hop:
//!
//! * even rounds: neighbors exchange fragment ids, every fragment
//!   convergecasts its minimum outgoing edge to its leader, the leader
//!   broadcasts the choice back and the owning endpoint sends MERGE across;
//! * odd rounds: the endpoint with the lower id of the edge chosen by both
//!   sides becomes leader of the merged fragment and floods its id over the
//!   tree edges, re-orienting parent pointers.
//!
//! A fragment with no outgoing edge is final and falls silent; once all are
//! final the synchronizer sees a quiet round and stops.

use crate::engine::{Ctx, Program};
use crate::topo::Port;

pub const MST_PAYLOAD: u32 = 9;

/// Edge order: weight, then link id.
pub type EdgeKey = (u32, u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MstMsg {
    Frag(u32),
    Report(Option<EdgeKey>),
    Choice(Option<EdgeKey>),
    Merge,
    NewFrag(u32),
}

#[derive(Debug, Clone)]
pub struct Boruvka {
    id: u32,
    /// Key of the edge behind each port.
    keys: Vec<EdgeKey>,
    live: Vec<bool>,
    pub frag: u32,
    pub tree_ports: Vec<bool>,
    parent: Option<Port>,
    children: Vec<Port>,
    pub is_final: bool,
    /// Iterations in which this node's fragment merged.
    pub merges: u32,
    // per even round
    nbr_frag: Vec<Option<u32>>,
    reports: usize,
    best: Option<EdgeKey>,
    reported: bool,
    choice_seen: bool,
    merge_port: Option<Port>,
    merge_in: Vec<Port>,
    // per odd round
    relabeled: bool,
    odd: bool,
}

impl Boruvka {
    pub fn new(id: u32, keys: Vec<EdgeKey>) -> Self {
        let d = keys.len();
        Boruvka {
            id,
            keys,
            live: vec![false; d],
            frag: id,
            tree_ports: vec![false; d],
            parent: None,
            children: Vec::new(),
            is_final: false,
            merges: 0,
            nbr_frag: vec![None; d],
            reports: 0,
            best: None,
            reported: false,
            choice_seen: false,
            merge_port: None,
            merge_in: Vec::new(),
            relabeled: false,
            odd: false,
        }
    }

    fn try_report(&mut self, ctx: &mut Ctx<MstMsg>) {
        if self.reported || self.reports < self.children.len() {
            return;
        }
        if (0..self.live.len()).any(|p| self.live[p] && self.nbr_frag[p].is_none()) {
            return;
        }
        let frag = self.frag;
        let local = (0..self.live.len())
            .filter(|&p| self.live[p] && self.nbr_frag[p] != Some(frag))
            .map(|p| self.keys[p])
            .min();
        self.best = match (self.best, local) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.reported = true;
        match self.parent {
            Some(p) => ctx.send(p, MstMsg::Report(self.best)),
            None => self.apply_choice(ctx, self.best),
        }
    }

    fn apply_choice(&mut self, ctx: &mut Ctx<MstMsg>, choice: Option<EdgeKey>) {
        self.choice_seen = true;
        for &c in &self.children {
            ctx.send(c, MstMsg::Choice(choice));
        }
        match choice {
            None => self.is_final = true,
            Some(key) => {
                self.merges += 1;
                if let Some(p) = (0..self.keys.len()).find(|&p| self.live[p] && self.keys[p] == key) {
                    self.tree_ports[p] = true;
                    self.merge_port = Some(p);
                    ctx.send(p, MstMsg::Merge);
                }
            }
        }
    }

    fn adopt(&mut self, ctx: &mut Ctx<MstMsg>, frag: u32, parent: Option<Port>) {
        self.frag = frag;
        self.parent = parent;
        self.children = (0..self.tree_ports.len()).filter(|&p| self.tree_ports[p] && Some(p) != parent).collect();
        self.relabeled = true;
        for &c in &self.children {
            ctx.send(c, MstMsg::NewFrag(frag));
        }
    }
}

impl Program for Boruvka {
    type Msg = MstMsg;

    fn payload_bytes(&self, _: &MstMsg) -> u32 {
        MST_PAYLOAD
    }

    fn free_running(&self, _round: u64) -> bool {
        true
    }

    fn round(&mut self, ctx: &mut Ctx<MstMsg>, _inbox: &[(Port, MstMsg)]) {
        self.odd = ctx.round % 2 == 1;
        if self.is_final {
            return;
        }
        if !self.odd {
            self.live = vec![false; self.keys.len()];
            for &p in ctx.live_ports() {
                self.live[p] = true;
            }
            self.nbr_frag.iter_mut().for_each(|f| *f = None);
            self.reports = 0;
            self.best = None;
            self.reported = false;
            self.choice_seen = false;
            self.merge_port = None;
            self.merge_in.clear();
            ctx.broadcast(MstMsg::Frag(self.frag));
            self.try_report(ctx);
        } else {
            self.relabeled = false;
            if let Some(p) = self.merge_port {
                if self.merge_in.contains(&p) && self.id < ctx.neighbor(p).0 {
                    self.adopt(ctx, self.id, None);
                }
            }
        }
    }

    fn on_message(&mut self, ctx: &mut Ctx<MstMsg>, port: Port, msg: MstMsg) {
        match msg {
            MstMsg::Frag(f) => {
                self.nbr_frag[port] = Some(f);
                self.try_report(ctx);
            }
            MstMsg::Report(k) => {
                self.reports += 1;
                self.best = match (self.best, k) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    (a, b) => a.or(b),
                };
                self.try_report(ctx);
            }
            MstMsg::Choice(k) => self.apply_choice(ctx, k),
            MstMsg::Merge => {
                self.tree_ports[port] = true;
                self.merge_in.push(port);
            }
            MstMsg::NewFrag(f) => self.adopt(ctx, f, Some(port)),
        }
    }

    fn round_finished(&self) -> bool {
        self.is_final || if self.odd { self.relabeled } else { self.choice_seen }
    }

    fn done(&self) -> bool {
        self.is_final
    }
}
