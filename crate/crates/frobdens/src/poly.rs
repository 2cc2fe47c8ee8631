//! Integer polynomials and their reductions modulo a prime.
//!
//! Two jobs only: exact discriminants over Z (to detect ramified primes)
//! and the multiset of irreducible-factor degrees of a squarefree reduction
//! mod p (the cycle type of the Frobenius permutation on the roots).

use num::bigint::BigInt;
use num::{One, Signed, Zero};
use thiserror::Error;

use crate::util::{inv_mod, mul_mod};

#[derive(Debug, Error, PartialEq)]
pub enum PolyError {
    #[error("polynomial is not squarefree modulo the prime")]
    NotSquarefreeModP,
    #[error("malformed polynomial: {0}")]
    Malformed(String),
}

/// Monic integer polynomial, coefficients ascending (coeffs[i] is the
/// coefficient of x^i).
#[derive(Clone, Debug, PartialEq)]
pub struct IntPoly {
    coeffs: Vec<BigInt>,
}

impl IntPoly {
    pub fn monic_from_i64(coeffs: &[i64]) -> Result<Self, PolyError> {
        let coeffs: Vec<BigInt> = coeffs.iter().map(|&c| BigInt::from(c)).collect();
        if coeffs.len() < 2 {
            return Err(PolyError::Malformed("degree must be at least 1".into()));
        }
        if coeffs.last().map(|c| !c.is_one()).unwrap_or(true) {
            return Err(PolyError::Malformed("leading coefficient must be 1".into()));
        }
        Ok(IntPoly { coeffs })
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn derivative(&self) -> Vec<BigInt> {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| c * BigInt::from(i))
            .collect()
    }

    /// disc(f) = (-1)^(n(n-1)/2) * Res(f, f') for monic f of degree n.
    pub fn discriminant(&self) -> BigInt {
        let n = self.degree();
        let res = resultant(&self.coeffs, &self.derivative());
        if (n * (n - 1) / 2) % 2 == 1 {
            -res
        } else {
            res
        }
    }

    /// Coefficients reduced into 0..p, still ascending, degree preserved
    /// (monic, so the leading coefficient stays 1).
    pub fn reduce_mod(&self, p: u64) -> Vec<u64> {
        let pb = BigInt::from(p);
        self.coeffs
            .iter()
            .map(|c| {
                let r = c % &pb;
                let r = if r.is_negative() { r + &pb } else { r };
                u64::try_from(r).expect("residue fits")
            })
            .collect()
    }

    pub fn to_string_pretty(&self) -> String {
        let mut parts = Vec::new();
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let var = match i {
                0 => String::new(),
                1 => "x".into(),
                _ => format!("x^{i}"),
            };
            let coef = if i > 0 && c.is_one() {
                String::new()
            } else if i > 0 && *c == BigInt::from(-1) {
                "-".into()
            } else {
                c.to_string()
            };
            parts.push(format!("{coef}{var}"));
        }
        if parts.is_empty() {
            "0".into()
        } else {
            parts.join(" + ").replace("+ -", "- ")
        }
    }
}

/// Resultant via the Sylvester matrix, evaluated with the Bareiss
/// fraction-free elimination so all intermediate values stay integral.
fn resultant(f: &[BigInt], g: &[BigInt]) -> BigInt {
    let fd = f.len() - 1;
    let gd = match g.iter().rposition(|c| !c.is_zero()) {
        Some(d) => d,
        // Res(f, 0) = 0 for deg f > 0
        None => return BigInt::zero(),
    };
    let g = &g[..=gd];
    let n = fd + gd;
    let mut m = vec![vec![BigInt::zero(); n]; n];
    for (row, mrow) in m.iter_mut().enumerate().take(gd) {
        for (k, c) in f.iter().rev().enumerate() {
            mrow[row + k] = c.clone();
        }
    }
    for (row, mrow) in m.iter_mut().enumerate().skip(gd) {
        let row = row - gd;
        for (k, c) in g.iter().rev().enumerate() {
            mrow[row + k] = c.clone();
        }
    }
    bareiss_det(m)
}

fn bareiss_det(mut m: Vec<Vec<BigInt>>) -> BigInt {
    let n = m.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut sign = false;
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if m[k][k].is_zero() {
            let Some(r) = (k + 1..n).find(|&r| !m[r][k].is_zero()) else {
                return BigInt::zero();
            };
            m.swap(k, r);
            sign = !sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let num = &m[i][j] * &m[k][k] - &m[i][k] * &m[k][j];
                // Bareiss guarantees exact divisibility by the previous pivot
                m[i][j] = num / &prev;
            }
            m[i][k] = BigInt::zero();
        }
        prev = m[k][k].clone();
    }
    let det = m[n - 1][n - 1].clone();
    if sign {
        -det
    } else {
        det
    }
}

// ---- dense arithmetic mod p; Vec<u64> ascending, no trailing zeros ----

fn pnorm(mut v: Vec<u64>) -> Vec<u64> {
    while v.last() == Some(&0) {
        v.pop();
    }
    v
}

fn pis_zero(v: &[u64]) -> bool {
    v.is_empty()
}

fn pdeg(v: &[u64]) -> usize {
    debug_assert!(!v.is_empty());
    v.len() - 1
}

fn pmul(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    if pis_zero(a) || pis_zero(b) {
        return vec![];
    }
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] = (out[i + j] + mul_mod(ai, bj, p)) % p;
        }
    }
    pnorm(out)
}

fn prem(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    debug_assert!(!pis_zero(b));
    let db = pdeg(b);
    let mut r = a.to_vec();
    let lc_inv = inv_mod(b[db], p).expect("prime modulus");
    while !pis_zero(&r) && pdeg(&r) >= db {
        let dr = pdeg(&r);
        let q = mul_mod(r[dr], lc_inv, p);
        let shift = dr - db;
        for (k, &bk) in b.iter().enumerate() {
            let sub = mul_mod(q, bk, p);
            let idx = shift + k;
            r[idx] = (r[idx] + p - sub) % p;
        }
        r = pnorm(r);
    }
    r
}

fn pdiv_exact(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    debug_assert!(!pis_zero(b));
    let db = pdeg(b);
    let mut r = a.to_vec();
    let lc_inv = inv_mod(b[db], p).expect("prime modulus");
    let mut q = vec![0u64; a.len().saturating_sub(db)];
    while !pis_zero(&r) && pdeg(&r) >= db {
        let dr = pdeg(&r);
        let c = mul_mod(r[dr], lc_inv, p);
        let shift = dr - db;
        q[shift] = c;
        for (k, &bk) in b.iter().enumerate() {
            let sub = mul_mod(c, bk, p);
            let idx = shift + k;
            r[idx] = (r[idx] + p - sub) % p;
        }
        r = pnorm(r);
    }
    debug_assert!(pis_zero(&r), "division was not exact");
    pnorm(q)
}

fn pmonic(v: &[u64], p: u64) -> Vec<u64> {
    if pis_zero(v) {
        return vec![];
    }
    let lc = v[pdeg(v)];
    if lc == 1 {
        return v.to_vec();
    }
    let inv = inv_mod(lc, p).expect("prime modulus");
    v.iter().map(|&c| mul_mod(c, inv, p)).collect()
}

fn pgcd(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut x = pnorm(a.to_vec());
    let mut y = pnorm(b.to_vec());
    while !pis_zero(&y) {
        let r = prem(&x, &y, p);
        x = y;
        y = r;
    }
    pmonic(&x, p)
}

fn pderiv(a: &[u64], p: u64) -> Vec<u64> {
    if a.len() < 2 {
        return vec![];
    }
    pnorm(
        a.iter()
            .enumerate()
            .skip(1)
            .map(|(i, &c)| mul_mod(c, i as u64 % p, p))
            .collect(),
    )
}

/// Multiset of irreducible-factor degrees of f mod p, ascending.
///
/// Distinct-degree factorization: x^(p^k) - x accumulates exactly the
/// roots lying in the degree-k subfield, so gcd(x^(p^k) - x, remainder)
/// splits off the product of all irreducible factors of degree k.
pub fn factor_degrees_mod_p(f: &IntPoly, p: u64) -> Result<Vec<u8>, PolyError> {
    let fp = pnorm(f.reduce_mod(p));
    debug_assert_eq!(pdeg(&fp), f.degree(), "monic reduction keeps the degree");
    let d = pderiv(&fp, p);
    if pis_zero(&d) || pdeg(&pgcd(&fp, &d, p)) > 0 {
        return Err(PolyError::NotSquarefreeModP);
    }
    let mut rem = fp;
    let mut h = prem(&[0, 1], &rem, p); // x^(p^0)
    let mut degrees: Vec<u8> = Vec::new();
    let mut k = 0u8;
    while pdeg(&rem) > 0 {
        k += 1;
        if 2 * (k as usize) > pdeg(&rem) {
            // whatever is left is a single irreducible factor
            degrees.push(pdeg(&rem) as u8);
            break;
        }
        // advance h = x^(p^k) mod rem
        h = ppow_composed(&h, &rem, p);
        let mut hx = h.clone();
        // h - x
        if hx.len() < 2 {
            hx.resize(2, 0);
        }
        hx[1] = (hx[1] + p - 1) % p;
        let hx = pnorm(hx);
        let g = if pis_zero(&hx) {
            rem.clone()
        } else {
            pgcd(&hx, &rem, p)
        };
        if !pis_zero(&g) && pdeg(&g) > 0 {
            let cnt = pdeg(&g) / k as usize;
            debug_assert_eq!(pdeg(&g) % k as usize, 0);
            for _ in 0..cnt {
                degrees.push(k);
            }
            rem = pdiv_exact(&rem, &g, p);
            if pdeg(&rem) == 0 {
                break;
            }
            h = prem(&h, &rem, p);
        }
    }
    degrees.sort_unstable();
    Ok(degrees)
}

/// h(x) -> h(x)^p mod f, i.e. one more application of Frobenius.
fn ppow_composed(h: &[u64], f: &[u64], p: u64) -> Vec<u64> {
    // h^p mod f by binary powering of h itself
    let mut base = h.to_vec();
    let mut acc = prem(&[1], f, p);
    let mut e = p;
    while e > 0 {
        if e & 1 == 1 {
            acc = prem(&pmul(&acc, &base, p), f, p);
        }
        e >>= 1;
        if e > 0 {
            base = prem(&pmul(&base, &base, p), f, p);
        }
    }
    acc
}

/// Count of roots of f in Z/p by direct evaluation; test oracle only.
pub fn root_count_naive(f: &IntPoly, p: u64) -> usize {
    let fp = f.reduce_mod(p);
    (0..p)
        .filter(|&x| {
            let mut acc = 0u64;
            for &c in fp.iter().rev() {
                acc = (mul_mod(acc, x, p) + c) % p;
            }
            acc == 0
        })
        .count()
}
