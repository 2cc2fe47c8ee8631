//! Splitting-field levels: Gal(L/Q) is the full symmetric group on the roots
//! of a monic integer polynomial, and the cycle type of f mod p reads off the
//! Frobenius class of every unramified prime. Quotients by a normal subgroup
//! give the Galois closure's subfields cut out by parity or by an explicit
//! normal part.

use std::collections::HashMap;
use std::sync::Arc;

use num::BigInt;

use super::{ClassTable, FieldError, FieldLevel};
use crate::group::{quotient, Elem, FiniteGroup, GroupMorphism};
use crate::poly::{factor_degrees_mod_p, IntPoly};

/// Cycle type of a permutation in one-line form, sorted ascending.
pub fn cycle_type_of_perm(p: &[u8]) -> Vec<u8> {
    let mut seen = vec![false; p.len()];
    let mut t = Vec::new();
    for s in 0..p.len() {
        if seen[s] {
            continue;
        }
        let mut len = 0u8;
        let mut cur = s;
        while !seen[cur] {
            seen[cur] = true;
            len += 1;
            cur = p[cur] as usize;
        }
        t.push(len);
    }
    t.sort_unstable();
    t
}

/// True for even permutations.
pub fn perm_parity(p: &[u8]) -> bool {
    let swaps: u32 = cycle_type_of_perm(p).iter().map(|&l| (l - 1) as u32).sum();
    swaps % 2 == 0
}

/// Normal subgroup of S_n selecting the level: the full splitting field,
/// its quadratic subfield, or the fixed field of an explicit normal part.
#[derive(Debug, Clone)]
pub enum NormalPart {
    Trivial,
    Alternating,
    Generated(Vec<Vec<u8>>),
}

/// Galois level attached to a degree-n polynomial f whose splitting field
/// has group S_n, quotiented by a normal subgroup H. The per-prime path is
/// distinct-degree factorization followed by a table lookup.
///
/// The full-symmetric-group hypothesis is the caller's responsibility; it
/// holds for the bundled scenarios and is what makes the cycle type of
/// f mod p determine the Frobenius class.
pub struct SplittingLevel {
    f: IntPoly,
    n: usize,
    disc: BigInt,
    sn: Arc<FiniteGroup>,
    h: Vec<usize>,
    group: Arc<FiniteGroup>,
    pi: GroupMorphism,
    table: ClassTable,
    type_to_class: HashMap<Vec<u8>, usize>,
}

impl SplittingLevel {
    pub fn new(f: IntPoly, part: NormalPart) -> Result<Self, FieldError> {
        let n = f.degree();
        if !(2..=7).contains(&n) {
            return Err(FieldError::DegreeMismatch { got: n, lo: 2, hi: 7 });
        }
        let disc = f.discriminant();
        if disc == BigInt::from(0) {
            return Err(FieldError::BadField(
                "polynomial has a repeated root".into(),
            ));
        }
        let sn = FiniteGroup::symmetric(n)?;
        let h: Vec<usize> = match &part {
            NormalPart::Trivial => vec![sn.identity()],
            NormalPart::Alternating => (0..sn.order())
                .filter(|&i| match sn.elem(i) {
                    Elem::Perm(p) => perm_parity(p),
                    _ => unreachable!(),
                })
                .collect(),
            NormalPart::Generated(gens) => {
                let mut seed = Vec::with_capacity(gens.len());
                for g in gens {
                    let idx = sn.index_of(&Elem::Perm(g.clone())).ok_or_else(|| {
                        FieldError::BadField(format!(
                            "generator {g:?} is not a permutation of degree {n}"
                        ))
                    })?;
                    seed.push(idx);
                }
                sn.subgroup_closure(&seed)?
            }
        };
        let (group, pi) = quotient(&sn, &h)?;
        let table = ClassTable::new(&group);
        let mut type_to_class = HashMap::new();
        for i in 0..sn.order() {
            let t = match sn.elem(i) {
                Elem::Perm(p) => cycle_type_of_perm(p),
                _ => unreachable!(),
            };
            let c = table.class_of(pi.apply_idx(i));
            // cycle type pins the S_n class, and projections respect conjugacy
            debug_assert!(*type_to_class.get(&t).unwrap_or(&c) == c);
            type_to_class.insert(t, c);
        }
        Ok(SplittingLevel { f, n, disc, sn, h, group, pi, table, type_to_class })
    }

    pub fn poly(&self) -> &IntPoly {
        &self.f
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn discriminant(&self) -> &BigInt {
        &self.disc
    }

    pub fn symmetric_group(&self) -> &Arc<FiniteGroup> {
        &self.sn
    }

    pub fn normal_subgroup(&self) -> &[usize] {
        &self.h
    }

    pub fn projection(&self) -> &GroupMorphism {
        &self.pi
    }

    /// Multiset of irreducible-factor degrees of f mod p, ascending.
    pub fn cycle_type(&self, p: u64) -> Result<Vec<u8>, FieldError> {
        Ok(factor_degrees_mod_p(&self.f, p)?)
    }

    pub fn class_of_type(&self, t: &[u8]) -> Option<usize> {
        self.type_to_class.get(t).copied()
    }
}

impl FieldLevel for SplittingLevel {
    fn group(&self) -> &Arc<FiniteGroup> {
        &self.group
    }

    fn table(&self) -> &ClassTable {
        &self.table
    }

    fn label(&self) -> String {
        format!(
            "splitting level of {} mod subgroup of order {}",
            self.f.to_string_pretty(),
            self.h.len()
        )
    }

    fn frob_class(&self, p: u64) -> Option<usize> {
        let t = self.cycle_type(p).ok()?;
        let c = self.type_to_class.get(&t).copied();
        debug_assert!(c.is_some(), "factor degrees always form a partition of n");
        c
    }
}
