//! Prime generation: a segmented sieve with a fixed segment size, plus an
//! optional on-disk cache of the full prime list up to a bound.
//!
//! The sieve never materializes more than one segment, so streaming to the
//! hard bound costs memory proportional to the segment, not the range.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

/// Hard upper bound on any prime enumeration.
pub const MAX_BOUND: u64 = 1_000_000_000;

/// Segment length; windows handed to worker threads use the same alignment
/// so that parallel runs sum identical partial results in identical order.
pub const SEGMENT: usize = 1 << 20;

const CACHE_MAGIC: [u8; 6] = *b"FDNS1\0";
const CACHE_FILE: &str = "primes.bin";

#[derive(Debug, Error, PartialEq)]
pub enum PrimeError {
    #[error("bound {0} exceeds the supported maximum {MAX_BOUND}")]
    BoundTooLarge(u64),
    #[error("window is empty or inverted: [{0}, {1}]")]
    BadWindow(u64, u64),
}

/// Inclusive prime window [lo, hi].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrimeWindow {
    pub lo: u64,
    pub hi: u64,
}

impl PrimeWindow {
    pub fn new(lo: u64, hi: u64) -> Result<Self, PrimeError> {
        if hi > MAX_BOUND {
            return Err(PrimeError::BoundTooLarge(hi));
        }
        if lo > hi {
            return Err(PrimeError::BadWindow(lo, hi));
        }
        Ok(PrimeWindow { lo, hi })
    }

    /// Split into segment-aligned sub-windows, in ascending order.
    pub fn aligned_chunks(&self) -> Vec<PrimeWindow> {
        let seg = SEGMENT as u64;
        let mut out = Vec::new();
        let mut lo = self.lo;
        while lo <= self.hi {
            let block_end = (lo / seg + 1) * seg - 1;
            let hi = block_end.min(self.hi);
            out.push(PrimeWindow { lo, hi });
            lo = hi + 1;
        }
        out
    }
}

fn simple_sieve(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return vec![];
    }
    let n = limit as usize;
    let mut composite = vec![false; n + 1];
    let mut primes = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            primes.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    primes
}

/// Visit every prime p with lo <= p <= hi, ascending.
pub fn for_each_prime(lo: u64, hi: u64, mut visit: impl FnMut(u64)) -> Result<(), PrimeError> {
    if hi > MAX_BOUND {
        return Err(PrimeError::BoundTooLarge(hi));
    }
    let lo = lo.max(2);
    if lo > hi {
        return Ok(());
    }
    let root = (hi as f64).sqrt() as u64 + 2;
    let base = simple_sieve(root);
    let mut buf = vec![true; SEGMENT];
    let mut seg_lo = lo;
    while seg_lo <= hi {
        let seg_hi = (seg_lo + SEGMENT as u64 - 1).min(hi);
        let len = (seg_hi - seg_lo + 1) as usize;
        buf[..len].fill(true);
        for &p in &base {
            if p * p > seg_hi {
                break;
            }
            // first multiple of p in the segment, but never below p^2
            let mut m = if p * p >= seg_lo {
                p * p
            } else {
                seg_lo + (p - seg_lo % p) % p
            };
            while m <= seg_hi {
                buf[(m - seg_lo) as usize] = false;
                m += p;
            }
        }
        for (i, &is_prime) in buf[..len].iter().enumerate() {
            if is_prime {
                visit(seg_lo + i as u64);
            }
        }
        seg_lo = seg_hi + 1;
    }
    Ok(())
}

/// All primes up to `bound`, ascending.
pub fn primes_up_to(bound: u64) -> Result<Vec<u64>, PrimeError> {
    let mut v = Vec::new();
    for_each_prime(2, bound, |p| v.push(p))?;
    Ok(v)
}

/// Cache file layout, all little endian:
///   bytes 0..6   magic "FDNS1\0"
///   bytes 6..8   zero padding
///   bytes 8..16  u64 count
///   then count u64 primes, ascending.
fn write_cache(path: &Path, primes: &[u64]) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(16 + primes.len() * 8);
    buf.extend_from_slice(&CACHE_MAGIC);
    buf.extend_from_slice(&[0u8; 2]);
    buf.extend_from_slice(&(primes.len() as u64).to_le_bytes());
    for &p in primes {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&buf)?;
    }
    fs::rename(&tmp, path)
}

/// None on any malformation; a bad cache is treated as absent.
fn read_cache(path: &Path) -> Option<Vec<u64>> {
    let mut f = fs::File::open(path).ok()?;
    let mut header = [0u8; 16];
    f.read_exact(&mut header).ok()?;
    if header[0..6] != CACHE_MAGIC || header[6..8] != [0, 0] {
        return None;
    }
    let count = u64::from_le_bytes(header[8..16].try_into().ok()?) as usize;
    let mut body = Vec::new();
    f.read_to_end(&mut body).ok()?;
    if body.len() != count * 8 {
        return None;
    }
    let mut primes = Vec::with_capacity(count);
    let mut last = 0u64;
    for chunk in body.chunks_exact(8) {
        let p = u64::from_le_bytes(chunk.try_into().ok()?);
        if p <= last {
            return None;
        }
        last = p;
        primes.push(p);
    }
    Some(primes)
}

/// Read-through cache: reuse the stored list when its largest prime reaches
/// the requested bound, otherwise sieve afresh and rewrite the file.
/// Write failures are swallowed; the cache is an accelerator, not a source
/// of truth.
pub fn cached_primes_up_to(dir: &Path, bound: u64) -> Result<Vec<u64>, PrimeError> {
    if bound > MAX_BOUND {
        return Err(PrimeError::BoundTooLarge(bound));
    }
    let file = dir.join(CACHE_FILE);
    if let Some(list) = read_cache(&file) {
        if list.last().is_some_and(|&largest| largest >= bound) {
            let cut = list.partition_point(|&p| p <= bound);
            return Ok(list[..cut].to_vec());
        }
    }
    let fresh = primes_up_to(bound)?;
    if fs::create_dir_all(dir).is_ok() {
        let _ = write_cache(&file, &fresh);
    }
    Ok(fresh)
}
