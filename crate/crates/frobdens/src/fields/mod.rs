//! Number-field scenarios: explicit Galois levels over Q together with the
//! per-prime splitting data (Frobenius class, residue degree, prime count)
//! that the density estimators consume.
//!
//! Two backends are provided. [`abelian`] realizes subfields of cyclotomic
//! fields Q(zeta_m) through unit groups mod m; [`sn`] realizes splitting
//! fields of monic integer polynomials whose Galois group is the full
//! symmetric group, plus their quotients by a normal subgroup.

use std::sync::Arc;

use crate::group::{FiniteGroup, GroupError, GroupMorphism};
use crate::poly::PolyError;
use crate::primes::{for_each_prime, PrimeError, PrimeWindow};

pub mod abelian;
pub mod sn;

pub use abelian::{abelian_tower, unit_quotient, AbelianTower, CyclotomicLevel};
pub use sn::{cycle_type_of_perm, perm_parity, NormalPart, SplittingLevel};

#[derive(Debug, thiserror::Error)]
pub enum FieldError {
    #[error("prime {0} ramifies in this field")]
    Ramified(u64),
    #[error("polynomial degree {got} outside the supported range {lo}..={hi}")]
    DegreeMismatch { got: usize, lo: usize, hi: usize },
    #[error("malformed field description: {0}")]
    BadField(String),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Prime(#[from] PrimeError),
}

/// Conjugacy data of a finite group, indexed once at construction so the
/// per-prime path is table lookups only.
#[derive(Debug, Clone)]
pub struct ClassTable {
    classes: Vec<Vec<usize>>,
    class_of: Vec<usize>,
    class_order: Vec<u64>,
}

impl ClassTable {
    pub fn new(g: &FiniteGroup) -> Self {
        let classes = g.class_partition();
        let mut class_of = vec![usize::MAX; g.order()];
        let mut class_order = Vec::with_capacity(classes.len());
        for (c, members) in classes.iter().enumerate() {
            for &i in members {
                class_of[i] = c;
            }
            let ord = g.element_order(members[0]).expect("class member index is valid");
            class_order.push(ord);
        }
        ClassTable { classes, class_of, class_order }
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn class_of(&self, elem_idx: usize) -> usize {
        self.class_of[elem_idx]
    }

    pub fn members(&self, class_idx: usize) -> &[usize] {
        &self.classes[class_idx]
    }

    pub fn size(&self, class_idx: usize) -> usize {
        self.classes[class_idx].len()
    }

    /// Common order of the elements in the class.
    pub fn order(&self, class_idx: usize) -> u64 {
        self.class_order[class_idx]
    }
}

/// Splitting data of one unramified rational prime at one field level.
///
/// `p` factors in the level field into `g` primes, each of residue degree
/// `d` and norm p^d, with d*g equal to the field degree. `class` is the
/// conjugacy class of the Frobenius in the level's Galois group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrimeRecord {
    pub p: u64,
    pub class: usize,
    pub d: u64,
    pub g: u64,
    pub ramified: bool,
}

impl PrimeRecord {
    pub fn norm_f64(&self) -> f64 {
        (self.p as f64).powi(self.d as i32)
    }
}

/// One Galois level K/Q: a finite group, its class table, and the Frobenius
/// class of each unramified prime.
pub trait FieldLevel: Sync {
    fn group(&self) -> &Arc<FiniteGroup>;
    fn table(&self) -> &ClassTable;
    fn label(&self) -> String;

    /// Conjugacy class of Frob_p, or None when p ramifies (abelian: p | m;
    /// splitting field: f mod p not squarefree).
    fn frob_class(&self, p: u64) -> Option<usize>;

    fn record(&self, p: u64) -> Option<PrimeRecord> {
        let class = self.frob_class(p)?;
        let d = self.table().order(class);
        let n = self.group().order() as u64;
        // d | #G since Frobenius generates a cyclic subgroup
        Some(PrimeRecord { p, class, d, g: n / d, ramified: false })
    }
}

/// A scenario's two nested Galois levels L/K/Q with the restriction map
/// between their groups. `base` is where densities are predicted and
/// estimated; `top` carries the finer Frobenius data (full residue classes,
/// cycle types) that set expressions may reference.
pub enum PairKind {
    Abelian(AbelianTower),
    Sn {
        top: SplittingLevel,
        base: SplittingLevel,
        pi: GroupMorphism,
    },
}

pub struct FieldPair {
    kind: PairKind,
    /// image of each top-level conjugacy class in the base level
    class_image: Vec<usize>,
}

impl FieldPair {
    pub fn abelian(m: u64, u_gens: &[u64], v_gens: &[u64]) -> Result<Self, FieldError> {
        let tower = abelian_tower(m, u_gens, v_gens)?;
        Ok(Self::from_kind(PairKind::Abelian(tower)))
    }

    pub fn splitting(f: crate::poly::IntPoly, part: NormalPart) -> Result<Self, FieldError> {
        let top = SplittingLevel::new(f.clone(), NormalPart::Trivial)?;
        let base = SplittingLevel::new(f, part)?;
        let map: Vec<usize> = (0..top.group().order())
            .map(|i| {
                let si = base
                    .symmetric_group()
                    .index_of(top.group().elem(i))
                    .expect("both levels enumerate the same permutations");
                base.projection().apply_idx(si)
            })
            .collect();
        let pi = GroupMorphism::new(
            Arc::clone(top.group()),
            Arc::clone(base.group()),
            map,
        )?;
        Ok(Self::from_kind(PairKind::Sn { top, base, pi }))
    }

    fn from_kind(kind: PairKind) -> Self {
        let (top, base, pi): (&dyn FieldLevel, &dyn FieldLevel, &GroupMorphism) = match &kind {
            PairKind::Abelian(t) => (&t.top, &t.base, &t.pi),
            PairKind::Sn { top, base, pi } => (top, base, pi),
        };
        let class_image = (0..top.table().class_count())
            .map(|c| {
                let rep = top.table().members(c)[0];
                base.table().class_of(pi.apply_idx(rep))
            })
            .collect();
        FieldPair { kind, class_image }
    }

    pub fn kind(&self) -> &PairKind {
        &self.kind
    }

    pub fn top(&self) -> &dyn FieldLevel {
        match &self.kind {
            PairKind::Abelian(t) => &t.top,
            PairKind::Sn { top, .. } => top,
        }
    }

    pub fn base(&self) -> &dyn FieldLevel {
        match &self.kind {
            PairKind::Abelian(t) => &t.base,
            PairKind::Sn { base, .. } => base,
        }
    }

    pub fn pi(&self) -> &GroupMorphism {
        match &self.kind {
            PairKind::Abelian(t) => &t.pi,
            PairKind::Sn { pi, .. } => pi,
        }
    }

    pub fn base_class_of_top_class(&self, c: usize) -> usize {
        self.class_image[c]
    }

    /// Frobenius classes of p at both levels, None when p ramifies.
    pub fn classes_of(&self, p: u64) -> Option<(usize, usize)> {
        let ct = self.top().frob_class(p)?;
        Some((ct, self.class_image[ct]))
    }

    pub fn conductor(&self) -> Option<u64> {
        match &self.kind {
            PairKind::Abelian(t) => Some(t.top.modulus()),
            PairKind::Sn { .. } => None,
        }
    }
}

/// Emit the records of all unramified rational primes in `window`, ascending.
/// Ramified primes are skipped; callers that must distinguish ramification
/// use the backend's own per-prime operations.
pub fn stream(level: &dyn FieldLevel, window: PrimeWindow) -> Vec<PrimeRecord> {
    let mut out = Vec::new();
    for_each_prime(window.lo, window.hi, |p| {
        if let Some(r) = level.record(p) {
            out.push(r);
        }
    })
    .expect("window bounds were validated at construction");
    out
}
