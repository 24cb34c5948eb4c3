//! Luby's maximal independent set, two rounds per step.
//!
//! Even rounds: a node that heard JOIN from a neighbor drops out; every
//! remaining undecided node draws a 16-bit priority and sends it. Odd
//! rounds: an undecided node whose `(priority, id)` beats every priority it
//! received joins the set and tells its neighbors.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::engine::{Ctx, Program};
use crate::topo::Port;

pub const MIS_PAYLOAD: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MisMsg {
    Priority(u16),
    Join,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MisState {
    Undecided,
    In,
    Out,
}

#[derive(Debug, Clone)]
pub struct LubyMis {
    pub state: MisState,
    rng: ChaCha8Rng,
    prio: u16,
}

impl LubyMis {
    pub fn new(rng: ChaCha8Rng) -> Self {
        LubyMis { state: MisState::Undecided, rng, prio: 0 }
    }
}

impl Program for LubyMis {
    type Msg = MisMsg;

    fn payload_bytes(&self, _: &MisMsg) -> u32 {
        MIS_PAYLOAD
    }

    fn round(&mut self, ctx: &mut Ctx<MisMsg>, inbox: &[(Port, MisMsg)]) {
        if self.state != MisState::Undecided {
            return;
        }
        if ctx.round.is_multiple_of(2) {
            if inbox.iter().any(|(_, m)| *m == MisMsg::Join) {
                self.state = MisState::Out;
                return;
            }
            self.prio = self.rng.gen();
            ctx.broadcast(MisMsg::Priority(self.prio));
        } else {
            let me = (self.prio, ctx.node);
            let beaten = inbox.iter().any(|&(p, m)| matches!(m, MisMsg::Priority(q) if (q, ctx.neighbor(p)) > me));
            if !beaten {
                self.state = MisState::In;
                ctx.broadcast(MisMsg::Join);
            }
        }
    }

    fn done(&self) -> bool {
        self.state != MisState::Undecided
    }
}
