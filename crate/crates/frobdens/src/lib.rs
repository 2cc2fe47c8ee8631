//! Exact and empirical Dirichlet-type densities attached to Frobenius
//! elements of explicit number fields.
//!
//! The library has two halves that are kept deliberately independent and
//! meet only in the verification layer:
//!
//! * an exact half ([`group`], [`density`]) that computes closed-form
//!   rational densities from finite group data, and
//! * an empirical half ([`fields`], [`primes`], [`estimate`]) that streams
//!   real primes of explicit fields, computes their Frobenius data, and
//!   estimates the same densities from truncated Dirichlet sums.

#![forbid(unsafe_code)]

pub mod density;
pub mod estimate;
pub mod fields;
pub mod group;
pub mod poly;
pub mod primes;
pub mod rat;
pub mod scenario;
pub mod util;
