//! Weighted vertex cover by local-ratio payments, within `2 + ε` of optimal.
//!
//! Every node keeps a residual weight. In each two-round step an active
//! node offers `residual / uncovered degree` to each neighbor on an
//! uncovered edge, rounded down to a power of `1 + ε/2`; both ends of an
//! edge then pay the smaller of the two offers. A node whose residual falls
//! to `ε/(2+ε)` of its weight joins the cover. Offers travel as bucket
//! exponents, so both ends compute the same payment.

use crate::engine::{Ctx, Program};
use crate::topo::Port;

/// Fixed-point scale of residual weights.
const ONE: u64 = 1 << 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VcMsg {
    Offer(i16),
    Join,
}

#[derive(Debug, Clone, Copy)]
pub struct Buckets {
    base: f64,
}

impl Buckets {
    pub fn new(eps: f64) -> Self {
        Buckets { base: 1.0 + eps / 2.0 }
    }

    pub fn value(&self, k: i16) -> u64 {
        self.base.powi(k as i32).floor() as u64
    }

    /// Largest `k` with `value(k) <= x`.
    pub fn bucket(&self, x: u64) -> i16 {
        let x = x.max(1);
        let mut k = ((x as f64).ln() / self.base.ln()).floor() as i16;
        while self.value(k) > x {
            k -= 1;
        }
        while self.value(k + 1) <= x {
            k += 1;
        }
        k
    }
}

#[derive(Debug, Clone)]
pub struct VertexCover {
    pub weight: u32,
    residual: u64,
    threshold: u64,
    buckets: Buckets,
    uncovered: Vec<bool>,
    offer: i16,
    pub in_cover: bool,
    started: bool,
}

impl VertexCover {
    pub fn new(weight: u32, eps: f64) -> Self {
        let w = weight as u64 * ONE;
        VertexCover {
            weight,
            residual: w,
            threshold: (w as f64 * eps / (2.0 + eps)).floor() as u64,
            buckets: Buckets::new(eps),
            uncovered: Vec::new(),
            offer: 0,
            in_cover: false,
            started: false,
        }
    }

    fn degree(&self) -> u64 {
        self.uncovered.iter().filter(|&&u| u).count() as u64
    }
}

impl Program for VertexCover {
    type Msg = VcMsg;

    /// One byte carries the bucket exponent as long as the buckets are
    /// coarse enough to span the weight range in 256 steps.
    fn payload_bytes(&self, _: &VcMsg) -> u32 {
        if self.buckets.bucket(256 * ONE) < 256 {
            1
        } else {
            2
        }
    }

    fn round(&mut self, ctx: &mut Ctx<VcMsg>, inbox: &[(Port, VcMsg)]) {
        if !self.started {
            self.started = true;
            self.uncovered = vec![false; ctx.port_count()];
            for &p in ctx.live_ports() {
                self.uncovered[p] = true;
            }
        }
        if self.in_cover {
            return;
        }
        if ctx.round.is_multiple_of(2) {
            for &(p, m) in inbox {
                if m == VcMsg::Join {
                    self.uncovered[p] = false;
                }
            }
            let d = self.degree();
            if d == 0 {
                return;
            }
            let share = ctx.arith.div(self.residual, d).max(1);
            self.offer = self.buckets.bucket(share);
            for p in 0..self.uncovered.len() {
                if self.uncovered[p] {
                    ctx.send(p, VcMsg::Offer(self.offer));
                }
            }
        } else {
            let mut paid = 0u64;
            for &(p, m) in inbox {
                if let VcMsg::Offer(k) = m {
                    if self.uncovered[p] {
                        paid += self.buckets.value(k.min(self.offer));
                    }
                }
            }
            self.residual = self.residual.saturating_sub(paid);
            if self.residual <= self.threshold {
                self.in_cover = true;
                for p in 0..self.uncovered.len() {
                    if self.uncovered[p] {
                        ctx.send(p, VcMsg::Join);
                    }
                }
            }
        }
    }

    fn done(&self) -> bool {
        self.in_cover || self.started && self.degree() == 0
    }
}
