//! Helpers around exact rationals.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serializer};

pub type Rat = BigRational;

pub fn int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn frac(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn big(n: &BigInt) -> Rat {
    Rat::from_integer(n.clone())
}

pub fn to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Huge numerators or denominators: scale down by shifting both.
        let n = r.numer().bits() as i64;
        let d = r.denom().bits() as i64;
        let shift = (n.max(d) - 900).max(0) as u32;
        let nn = (r.numer() >> shift).to_f64().unwrap_or(f64::NAN);
        let dd = (r.denom() >> shift).to_f64().unwrap_or(f64::NAN);
        nn / dd
    })
}

/// Exact rational of a finite f64.
pub fn from_f64(x: f64) -> Option<Rat> {
    Rat::from_float(x)
}

/// Parses `3`, `-3`, `1.25`, `3/4`, `-3/4`.
pub fn parse(s: &str) -> Option<Rat> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    if body.is_empty() {
        return None;
    }
    let value = if let Some((n, d)) = body.split_once('/') {
        let n: BigInt = digits(n)?;
        let d: BigInt = digits(d)?;
        if d.is_zero() {
            return None;
        }
        Rat::new(n, d)
    } else if let Some((w, f)) = body.split_once('.') {
        let w: BigInt = if w.is_empty() { BigInt::zero() } else { digits(w)? };
        if f.is_empty() {
            return None;
        }
        let frac_digits: BigInt = digits(f)?;
        let scale = num_traits::pow(BigInt::from(10), f.len());
        Rat::new(w * &scale + frac_digits, scale)
    } else {
        Rat::from_integer(digits(body)?)
    };
    Some(if neg { -value } else { value })
}

fn digits(s: &str) -> Option<BigInt> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

/// `3`, `-3/4`: the form read back by [`parse`].
pub fn display(r: &Rat) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn floor(r: &Rat) -> BigInt {
    r.numer().div_floor(r.denom())
}

pub fn ceil(r: &Rat) -> BigInt {
    -((-r.numer()).div_floor(r.denom()))
}

pub fn is_int(r: &Rat) -> bool {
    r.denom().is_one()
}

pub fn abs(r: &Rat) -> Rat {
    r.abs()
}

pub fn serialize<S: Serializer>(r: &Rat, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&display(r))
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rat, D::Error> {
    let s = String::deserialize(d)?;
    parse(&s).ok_or_else(|| serde::de::Error::custom(format!("bad rational `{s}`")))
}

pub mod opt {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Option<Rat>, s: S) -> Result<S::Ok, S::Error> {
        match r {
            Some(r) => s.serialize_some(&display(r)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rat>, D::Error> {
        let s = Option::<String>::deserialize(d)?;
        s.map(|s| parse(&s).ok_or_else(|| serde::de::Error::custom(format!("bad rational `{s}`"))))
            .transpose()
    }
}
