//! Exact rational values. All closed-form predictions flow through this type;
//! floating point appears only in the empirical estimators.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};

pub type Rat = BigRational;

pub fn rat(numer: i64, denom: i64) -> Rat {
    assert!(denom != 0, "zero denominator");
    Rat::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn rat_u(numer: u64, denom: u64) -> Rat {
    assert!(denom != 0, "zero denominator");
    Rat::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn rat_zero() -> Rat {
    Rat::zero()
}

pub fn rat_one() -> Rat {
    Rat::one()
}

pub fn rat_is_integer(r: &Rat) -> bool {
    r.denom().is_one()
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    // Good to ~1 ulp for the magnitudes used here (densities and small counts).
    let n = r.numer();
    let d = r.denom();
    let nf = n.to_string().parse::<f64>().unwrap_or(f64::NAN);
    let df = d.to_string().parse::<f64>().unwrap_or(f64::NAN);
    nf / df
}

/// Renders as "numer/denom", denominator always explicit: 1/2, 0/1, -3/4.
pub fn rat_fmt(r: &Rat) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Accepts "a/b" or a bare integer "a".
pub fn rat_parse(s: &str) -> Option<Rat> {
    let s = s.trim();
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: BigInt = n.parse().ok()?;
    let d: BigInt = d.parse().ok()?;
    if d.is_zero() {
        return None;
    }
    Some(Rat::new(n, d))
}

pub fn rat_in_unit_interval(r: &Rat) -> bool {
    !r.is_negative() && *r <= rat_one()
}
