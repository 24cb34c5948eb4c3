//! Leader election by minimum advertised key.
//!
//! Candidates start with a key `(metric, id)`; everyone adopts and
//! rebroadcasts any strictly smaller key it hears. With the candidate's own
//! depth 0 as metric this is plain minimum-id election; the clock-sync
//! optimization uses the height of a candidate tree instead.

use crate::engine::{Ctx, Program};
use crate::topo::Port;

pub const LEADER_PAYLOAD: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LeaderKey {
    pub metric: u32,
    pub id: u32,
}

#[derive(Debug, Clone, Default)]
pub struct LeaderElection {
    pub best: Option<LeaderKey>,
    /// Port the best key arrived on; `None` at the winner.
    pub via: Option<Port>,
}

impl LeaderElection {
    pub fn candidate(key: LeaderKey) -> Self {
        LeaderElection { best: Some(key), via: None }
    }
}

impl Program for LeaderElection {
    type Msg = LeaderKey;

    fn payload_bytes(&self, _: &LeaderKey) -> u32 {
        LEADER_PAYLOAD
    }

    fn round(&mut self, ctx: &mut Ctx<LeaderKey>, inbox: &[(Port, LeaderKey)]) {
        if ctx.round == 0 {
            if let Some(k) = self.best {
                ctx.broadcast(k);
            }
            return;
        }
        let Some(&(port, key)) = inbox.iter().min_by_key(|&&(p, k)| (k, ctx.neighbor(p))) else { return };
        if self.best.is_none_or(|b| key < b) {
            self.best = Some(key);
            self.via = Some(port);
            ctx.broadcast(key);
        }
    }

    fn done(&self) -> bool {
        true
    }
}
