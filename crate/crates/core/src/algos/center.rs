//! Asynchronous tree-center search on many rooted trees at once.
//!
//! Subtree depths are convergecast to each root; the root then walks a token
//! toward the deepest child for as long as that lowers the height, reversing
//! the parent pointer of every edge the token crosses. The node holding the
//! token at the end is the center and the new root.

use crate::engine::{center_step, AsyncProgram, Ctx};
use crate::topo::Port;

pub const CENTER_PAYLOAD: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CenterMsg {
    /// `child subtree depth + 1` reported upward.
    Up { inst: u32, h: u32 },
    /// Height of everything outside the receiver's subtree, plus the token.
    Token { inst: u32, up: u32 },
}

#[derive(Debug, Clone, Default)]
pub struct CenterInst {
    pub in_tree: bool,
    pub father: Option<Port>,
    pub children: Vec<Port>,
    reports: Vec<Option<u32>>,
    /// Set at the node that ends up as center: the recentered height.
    pub center_height: Option<u32>,
}

#[derive(Debug, Clone, Default)]
pub struct CenterFinding {
    pub inst: Vec<CenterInst>,
}

impl CenterFinding {
    pub fn add_instance(&mut self, in_tree: bool, father: Option<Port>, children: Vec<Port>) {
        let reports = vec![None; children.len()];
        self.inst.push(CenterInst { in_tree, father, children, reports, center_height: None });
    }

    fn report_if_ready(&mut self, ctx: &mut Ctx<CenterMsg>, i: usize) {
        let st = &self.inst[i];
        if !st.in_tree || st.reports.iter().any(Option::is_none) {
            return;
        }
        match st.father {
            Some(f) => {
                let h = st.reports.iter().map(|r| r.unwrap()).max().unwrap_or(0) + 1;
                ctx.send(f, CenterMsg::Up { inst: i as u32, h });
            }
            None => self.descend(ctx, i, 0, None),
        }
    }

    fn descend(&mut self, ctx: &mut Ctx<CenterMsg>, i: usize, up: u32, from: Option<Port>) {
        let st = &mut self.inst[i];
        let mut kids: Vec<(u32, Port)> = st.children.iter().zip(&st.reports).map(|(&p, r)| (r.unwrap(), p)).collect();
        kids.sort_by(|a, b| b.0.cmp(&a.0).then(ctx.neighbor(a.1).cmp(&ctx.neighbor(b.1))));
        let h1 = kids.first().map_or(0, |k| k.0);
        let h2 = kids.get(1).map_or(0, |k| k.0);
        // the side the token came from becomes a child of height `up`
        if let Some(p) = from {
            st.children.push(p);
            st.reports.push(Some(up));
        }
        match center_step(up, h1, h2) {
            Some(next) => {
                let c = kids[0].1;
                let slot = st.children.iter().position(|&p| p == c).unwrap();
                st.children.remove(slot);
                st.reports.remove(slot);
                st.father = Some(c);
                ctx.send(c, CenterMsg::Token { inst: i as u32, up: next });
            }
            None => {
                st.father = None;
                st.center_height = Some(up.max(h1));
            }
        }
    }
}

impl AsyncProgram for CenterFinding {
    type Msg = CenterMsg;

    fn payload_bytes(&self, _: &CenterMsg) -> u32 {
        CENTER_PAYLOAD
    }

    fn start(&mut self, ctx: &mut Ctx<CenterMsg>) {
        for i in 0..self.inst.len() {
            if self.inst[i].children.is_empty() {
                self.report_if_ready(ctx, i);
            }
        }
    }

    fn on_message(&mut self, ctx: &mut Ctx<CenterMsg>, port: Port, msg: CenterMsg) {
        match msg {
            CenterMsg::Up { inst, h } => {
                let st = &mut self.inst[inst as usize];
                if let Some(slot) = st.children.iter().position(|&p| p == port) {
                    st.reports[slot] = Some(h);
                }
                self.report_if_ready(ctx, inst as usize);
            }
            CenterMsg::Token { inst, up } => self.descend(ctx, inst as usize, up, Some(port)),
        }
    }
}
