//! Arithmetic as a switch pipeline can do it.
//!
//! In [`Arith::Switch`] mode, multiplication and division round one operand
//! to the nearest power of two and become shifts; Bernoulli trials compare a
//! 16-bit draw against a fixed-point threshold. [`Arith::Exact`] uses full
//! precision. Both are deterministic for a given RNG stream.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arith {
    #[default]
    Exact,
    Switch,
}

/// Exponent of the power of two nearest to `x` (`x > 0`); ties round up.
pub fn nearest_pow2_exp(x: u64) -> u32 {
    debug_assert!(x > 0);
    let lo = 63 - x.leading_zeros();
    let lo_v = 1u64 << lo;
    if lo == 63 {
        return lo;
    }
    let hi_v = lo_v << 1;
    if x - lo_v < hi_v - x {
        lo
    } else {
        lo + 1
    }
}

impl Arith {
    pub fn mul(self, a: u64, b: u64) -> u64 {
        match self {
            Arith::Exact => a.saturating_mul(b),
            Arith::Switch => {
                if a == 0 || b == 0 {
                    return 0;
                }
                a.checked_shl(nearest_pow2_exp(b)).unwrap_or(u64::MAX)
            }
        }
    }

    /// Integer quotient `a / b` (`b > 0`).
    pub fn div(self, a: u64, b: u64) -> u64 {
        match self {
            Arith::Exact => a / b,
            Arith::Switch => a >> nearest_pow2_exp(b).min(63),
        }
    }

    /// Real-valued quotient; in switch mode the divisor is rounded to a
    /// power of two first.
    pub fn div_f(self, a: f64, b: f64) -> f64 {
        match self {
            Arith::Exact => a / b,
            Arith::Switch => {
                let e = b.log2().round();
                a / e.exp2()
            }
        }
    }

    pub fn bernoulli<R: Rng + ?Sized>(self, p: f64, rng: &mut R) -> bool {
        match self {
            Arith::Exact => {
                if p <= 0.0 {
                    false
                } else if p >= 1.0 {
                    true
                } else {
                    rng.gen_bool(p)
                }
            }
            Arith::Switch => {
                let threshold = (p.clamp(0.0, 1.0) * 65536.0).round() as u32;
                (rng.gen::<u16>() as u32) < threshold
            }
        }
    }
}
