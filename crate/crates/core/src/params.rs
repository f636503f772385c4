//! Run parameters of the counting algorithm, derived from the enumeration
//! threshold `a`, the tolerance `ε`, the error probability `α` and the
//! number of hashed bits.
//!
//! With `s = √(a+1)`: `g = (s−1)²`, `G = (s+1)²`, `B = G/g`,
//! `q = ⌈(1 + log₂B) / (2·log₂(1+ε))⌉`, `k' = q·bits`, `p = ⌈g^(1/q)⌉`,
//! `m* = ⌊k' − log₂G⌋` and `r = ⌈8·ln(m*/α)⌉`.
//!
//! Everything is computed in `f64`; whenever a value about to be rounded is
//! within `1e-9` of an integer the rounding is decided exactly, using
//! rational enclosures of `√(a+1)` and of `exp`.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rat::{self, Rat};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterSet {
    pub a: u64,
    #[serde(with = "rat")]
    pub eps: Rat,
    #[serde(with = "rat")]
    pub alpha: Rat,
    pub bits_per_copy: u64,
    /// Total hashed bits `k' = q · bits_per_copy`.
    pub k_bits: u64,
    pub g: f64,
    #[serde(rename = "G")]
    pub big_g: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub q: u64,
    pub p: u64,
    pub r: u64,
    pub m_star: i64,
}

const NEAR: f64 = 1e-9;

/// Like [`derive`] but keeps a non-positive `m*` instead of failing; `r` is
/// then 1.
pub fn derive_unchecked(a: u64, eps: &Rat, alpha: &Rat, bits_per_copy: u64) -> Result<ParameterSet> {
    if a < 1 {
        return Err(Error::InvalidParameter("a must be at least 1".into()));
    }
    if !eps.is_positive() {
        return Err(Error::InvalidParameter("eps must be positive".into()));
    }
    if !alpha.is_positive() || *alpha >= Rat::one() {
        return Err(Error::InvalidParameter("alpha must lie in (0, 1)".into()));
    }
    if bits_per_copy < 1 {
        return Err(Error::InvalidParameter("bits per copy must be at least 1".into()));
    }
    let s = ((a + 1) as f64).sqrt();
    let g = (s - 1.0).powi(2);
    let big_g = (s + 1.0).powi(2);
    let b = big_g / g;
    let eps_f = rat::to_f64(eps);
    let alpha_f = rat::to_f64(alpha);

    let q_arg = (1.0 + b.log2()) / (2.0 * (1.0 + eps_f).log2());
    let q = round_up(q_arg, |n| {
        // (1 + log₂B) ≤ 2n·log₂(1+ε)  ⇔  2·B ≤ (1+ε)^(2n)
        let rhs = pow(&(Rat::one() + eps), 2 * n.max(0) as u64);
        decide_sqrt(a + 1, |lo, hi| {
            // B is decreasing in s.
            let b_hi = b_of(lo);
            let b_lo = b_of(hi);
            decided(&(rat::int(2) * b_hi), &(rat::int(2) * b_lo), &rhs)
        })
    })
    .max(1) as u64;

    let k_bits = q * bits_per_copy;

    let p_arg = g.powf(1.0 / q as f64);
    let p = round_up(p_arg, |n| {
        // g^(1/q) ≤ n  ⇔  (s−1)² ≤ n^q
        let rhs = pow(&rat::int(n), q);
        decide_sqrt(a + 1, |lo, hi| {
            let g_lo = sq(&(lo - Rat::one()));
            let g_hi = sq(&(hi - Rat::one()));
            decided(&g_hi, &g_lo, &rhs)
        })
    })
    .max(1) as u64;

    let m_arg = k_bits as f64 - big_g.log2();
    let m_star = round_down(m_arg, |n| {
        // k' − log₂G ≥ n  ⇔  (s+1)² ≤ 2^(k'−n)
        let e = k_bits as i64 - n;
        let rhs = if e >= 0 {
            pow(&rat::int(2), e as u64)
        } else {
            Rat::one() / pow(&rat::int(2), (-e) as u64)
        };
        decide_sqrt(a + 1, |lo, hi| {
            let g_lo = sq(&(lo + Rat::one()));
            let g_hi = sq(&(hi + Rat::one()));
            decided(&g_hi, &g_lo, &rhs)
        })
    });

    let r = if m_star >= 1 {
        let r_arg = 8.0 * (m_star as f64 / alpha_f).ln();
        let ratio = rat::int(m_star) / alpha;
        round_up(r_arg, |n| {
            // 8·ln(m*/α) ≤ n  ⇔  m*/α ≤ e^(n/8)
            exp_le(&ratio, &rat::frac(n, 8))
        })
        .max(1) as u64
    } else {
        1
    };

    Ok(ParameterSet {
        a,
        eps: eps.clone(),
        alpha: alpha.clone(),
        bits_per_copy,
        k_bits,
        g,
        big_g,
        b,
        q,
        p,
        r,
        m_star,
    })
}

pub fn derive(a: u64, eps: &Rat, alpha: &Rat, bits_per_copy: u64) -> Result<ParameterSet> {
    let p = derive_unchecked(a, eps, alpha, bits_per_copy)?;
    if p.m_star < 1 {
        return Err(Error::DegenerateInstance { m_star: p.m_star });
    }
    Ok(p)
}

/// Fails when enumerating `p + 1` models would exceed `cap`.
pub fn check_enum_cap(p: &ParameterSet, cap: u64) -> Result<()> {
    if p.p + 1 > cap {
        return Err(Error::EnumerationCap { needed: p.p + 1, cap });
    }
    Ok(())
}

/// `(a · 2^(m−0.5))^(1/q)`.
pub fn return_value(a: u64, m: i64, q: u64) -> f64 {
    (((a as f64).log2() + m as f64 - 0.5) / q as f64).exp2()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Interval {
    /// Bounds on the count of the q-fold product.
    pub lo: f64,
    pub hi: f64,
    /// The same bounds after taking q-th roots.
    pub lo_root: f64,
    pub hi_root: f64,
}

/// `(g/2 · 2^m, G · 2^m)` and its q-th roots.
pub fn certified_interval(p: &ParameterSet, m: i64) -> Interval {
    let lo_log = (p.g / 2.0).log2() + m as f64;
    let hi_log = p.big_g.log2() + m as f64;
    Interval {
        lo: lo_log.exp2(),
        hi: hi_log.exp2(),
        lo_root: (lo_log / p.q as f64).exp2(),
        hi_root: (hi_log / p.q as f64).exp2(),
    }
}

/// `⌈x⌉`, where `le(n)` decides `x ≤ n` exactly when `x` is close to `n`.
fn round_up(x: f64, le: impl Fn(i64) -> Option<bool>) -> i64 {
    let n = x.round();
    if (x - n).abs() < NEAR {
        match le(n as i64) {
            Some(true) => n as i64,
            Some(false) => n as i64 + 1,
            None => x.ceil() as i64,
        }
    } else {
        x.ceil() as i64
    }
}

/// `⌊x⌋`, where `ge(n)` decides `x ≥ n` exactly when `x` is close to `n`.
fn round_down(x: f64, ge: impl Fn(i64) -> Option<bool>) -> i64 {
    let n = x.round();
    if (x - n).abs() < NEAR {
        match ge(n as i64) {
            Some(true) => n as i64,
            Some(false) => n as i64 - 1,
            None => x.floor() as i64,
        }
    } else {
        x.floor() as i64
    }
}

/// Given `lo ≤ v ≤ hi`, decide `v ≤ rhs` if the enclosure allows it.
fn decided(hi: &Rat, lo: &Rat, rhs: &Rat) -> Option<bool> {
    if hi <= rhs {
        Some(true)
    } else if lo > rhs {
        Some(false)
    } else {
        None
    }
}

fn sq(x: &Rat) -> Rat {
    x * x
}

fn pow(x: &Rat, e: u64) -> Rat {
    num_traits::pow(x.clone(), e as usize)
}

fn b_of(s: &Rat) -> Rat {
    sq(&((s + Rat::one()) / (s - Rat::one())))
}

/// Runs `test` on rational enclosures `[lo, hi]` of `√n` of increasing
/// precision until it returns an answer.
fn decide_sqrt(n: u64, test: impl Fn(&Rat, &Rat) -> Option<bool>) -> Option<bool> {
    let n = BigInt::from(n);
    let mut bits = 64u32;
    while bits <= 1 << 14 {
        let scale = BigInt::one() << bits;
        let scaled = &n * &scale * &scale;
        let root = scaled.sqrt();
        let exact = &root * &root == scaled;
        let lo = Rat::new(root.clone(), scale.clone());
        let hi = if exact {
            lo.clone()
        } else {
            Rat::new(root + 1, scale)
        };
        if let Some(ans) = test(&lo, &hi) {
            return Some(ans);
        }
        if exact {
            return None;
        }
        bits *= 2;
    }
    None
}

/// Decides `x ≤ e^y` for rational `x` and `y ≥ 0` from Taylor enclosures.
fn exp_le(x: &Rat, y: &Rat) -> Option<bool> {
    if y.is_negative() {
        return None;
    }
    if y.is_zero() {
        return Some(*x <= Rat::one());
    }
    let y_ceil = rat::ceil(y).to_u64().unwrap_or(u64::MAX);
    let mut sum = Rat::one();
    let mut term = Rat::one();
    for k in 1..4000u64 {
        term = term * y / rat::int(k as i64);
        sum += &term;
        if k + 2 > y_ceil + 1 {
            // Remainder after the k-th term is at most
            // term·y/(k+1) · 1/(1 − y/(k+2)).
            let next = &term * y / rat::int(k as i64 + 1);
            let ratio = y / rat::int(k as i64 + 2);
            if ratio < Rat::one() {
                let tail = next / (Rat::one() - ratio);
                let upper = &sum + tail;
                if *x <= sum {
                    return Some(true);
                }
                if *x > upper {
                    return Some(false);
                }
            }
        }
    }
    None
}
