//! Small numeric helpers shared across modules.

/// Neumaier-compensated accumulator. Adding the same terms in the same order
/// always reproduces the same bits, which the estimator's determinism
/// guarantees lean on.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, term: f64) {
        let t = self.sum + term;
        if self.sum.abs() >= term.abs() {
            self.comp += (self.sum - t) + term;
        } else {
            self.comp += (term - t) + self.sum;
        }
        self.sum = t;
    }

    /// Folds another accumulator in, treating its total as one term.
    /// Window merges use this so that the merge order, not the thread
    /// schedule, determines the result.
    pub fn merge(&mut self, other: &KahanSum) {
        self.add(other.value());
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// SplitMix64; used only for sampled spot-checks on groups too large for
/// exhaustive verification. Fixed-seed, so those checks are deterministic.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in 0..bound. Bias is irrelevant at the sample sizes used.
    pub fn below(&mut self, bound: usize) -> usize {
        (self.next_u64() % bound as u64) as usize
    }
}

pub fn gcd_u64(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn lcm_u64(a: u64, b: u64) -> Option<u64> {
    if a == 0 || b == 0 {
        return Some(0);
    }
    (a / gcd_u64(a, b)).checked_mul(b)
}

pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    debug_assert!(m > 0);
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Inverse of a modulo m for gcd(a, m) = 1; m = 1 maps everything to 0.
pub fn inv_mod(a: u64, m: u64) -> Option<u64> {
    if m == 1 {
        return Some(0);
    }
    let (mut r0, mut r1) = (m as i128, (a % m) as i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 != 1 {
        return None;
    }
    Some(t0.rem_euclid(m as i128) as u64)
}

/// Multiplicative order of a modulo m; requires gcd(a, m) = 1.
pub fn order_mod(a: u64, m: u64) -> u64 {
    debug_assert_eq!(gcd_u64(a % m.max(1), m), 1);
    if m == 1 {
        return 1;
    }
    let mut k = 1u64;
    let mut acc = a % m;
    while acc != 1 {
        acc = mul_mod(acc, a, m);
        k += 1;
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_recovers_small_terms() {
        let mut k = KahanSum::new();
        k.add(1e16);
        for _ in 0..10 {
            k.add(1.0);
        }
        k.add(-1e16);
        assert_eq!(k.value(), 10.0);
    }

    #[test]
    fn kahan_merge_matches_term_order() {
        let terms: Vec<f64> = (1..1000).map(|i| 1.0 / i as f64).collect();
        let mut whole = KahanSum::new();
        let (mut a, mut b) = (KahanSum::new(), KahanSum::new());
        for (i, t) in terms.iter().enumerate() {
            if i < 500 {
                a.add(*t);
            } else {
                b.add(*t);
            }
        }
        for t in &terms {
            whole.add(*t);
        }
        let mut merged = KahanSum::new();
        merged.merge(&a);
        merged.merge(&b);
        // Merge folds block totals, not raw terms, so only near-equality holds.
        assert!((merged.value() - whole.value()).abs() < 1e-12);
    }

    #[test]
    fn modular_helpers() {
        assert_eq!(gcd_u64(12, 18), 6);
        assert_eq!(lcm_u64(4, 6), Some(12));
        assert_eq!(pow_mod(2, 10, 1000), 24);
        assert_eq!(inv_mod(3, 7), Some(5));
        assert_eq!(inv_mod(2, 4), None);
        assert_eq!(order_mod(2, 5), 4);
        assert_eq!(order_mod(1, 5), 1);
        assert_eq!(order_mod(2, 15), 4);
        assert_eq!(order_mod(14, 15), 2);
    }
}
