//! Abelian levels inside Q(zeta_m): quotients of (Z/m)^* by a subgroup of
//! units, with Frobenius at an unramified p given by the coset of p mod m.

use std::sync::Arc;

use super::{ClassTable, FieldError, FieldLevel};
use crate::group::{Elem, FiniteGroup, GroupMorphism, OpRule, SIZE_CAP};
use crate::util::gcd_u64;

/// Largest accepted conductor. Residue tables are dense, so this bounds
/// memory at a few megabytes.
pub const MAX_CONDUCTOR: u64 = 1_000_000;

const NON_UNIT: u32 = u32::MAX;

/// Quotient of (Z/m)^* by the subgroup generated by `sub_gens`, together
/// with the dense residue -> canonical coset representative table.
///
/// The canonical representative of each coset is its smallest residue;
/// cosets are discovered by an ascending sweep, so group elements come out
/// sorted by representative with the coset of 1 first.
pub fn unit_quotient(
    m: u64,
    sub_gens: &[u64],
) -> Result<(Arc<FiniteGroup>, Arc<Vec<u32>>), FieldError> {
    if !(3..=MAX_CONDUCTOR).contains(&m) {
        return Err(FieldError::BadField(format!(
            "conductor {m} outside 3..={MAX_CONDUCTOR}"
        )));
    }
    for &u in sub_gens {
        if u >= m || gcd_u64(u, m) != 1 {
            return Err(FieldError::BadField(format!(
                "{u} is not a reduced unit mod {m}"
            )));
        }
    }

    // subgroup U = <sub_gens> by closure under multiplication
    let mut in_u = vec![false; m as usize];
    in_u[1] = true;
    let mut stack = vec![1u64];
    while let Some(a) = stack.pop() {
        for &g in sub_gens {
            let b = a * g % m;
            if !in_u[b as usize] {
                in_u[b as usize] = true;
                stack.push(b);
            }
        }
    }
    let u_order: u64 = in_u.iter().filter(|&&b| b).count() as u64;

    let mut rep = vec![NON_UNIT; m as usize];
    let mut reps: Vec<u64> = Vec::new();
    for r in 1..m {
        if gcd_u64(r, m) != 1 || rep[r as usize] != NON_UNIT {
            continue;
        }
        reps.push(r);
        for u in 1..m {
            if in_u[u as usize] {
                rep[(r * u % m) as usize] = r as u32;
            }
        }
    }
    let phi = u_order * reps.len() as u64;
    debug_assert_eq!(phi, (1..m).filter(|&r| gcd_u64(r, m) == 1).count() as u64);
    if reps.len() > SIZE_CAP {
        return Err(FieldError::Group(crate::group::GroupError::SizeCapExceeded));
    }

    let rep = Arc::new(rep);
    let elems: Vec<Elem> = reps.iter().map(|&r| Elem::Unit(r)).collect();
    let group = FiniteGroup::construct(
        format!("units mod {m} / subgroup of order {u_order}"),
        elems,
        OpRule::UnitCoset { m, rep: Arc::clone(&rep) },
        Elem::Unit(1),
        &[],
    )?;
    Ok((group, rep))
}

/// One abelian Galois level K/Q with Gal(K/Q) = (Z/m)^* / U.
pub struct CyclotomicLevel {
    m: u64,
    group: Arc<FiniteGroup>,
    table: ClassTable,
    rep: Arc<Vec<u32>>,
}

impl CyclotomicLevel {
    pub fn new(m: u64, sub_gens: &[u64]) -> Result<Self, FieldError> {
        let (group, rep) = unit_quotient(m, sub_gens)?;
        let table = ClassTable::new(&group);
        Ok(CyclotomicLevel { m, group, table, rep })
    }

    pub fn modulus(&self) -> u64 {
        self.m
    }

    /// Canonical representative of the coset of a unit residue.
    pub fn coset_rep(&self, r: u64) -> Option<u64> {
        let c = self.rep[(r % self.m) as usize];
        (c != NON_UNIT).then_some(c as u64)
    }

    /// Group index of the Frobenius of p, i.e. the coset of p mod m.
    pub fn frobenius(&self, p: u64) -> Result<usize, FieldError> {
        let c = self.rep[(p % self.m) as usize];
        if c == NON_UNIT {
            // p shares a factor with m exactly when p ramifies in Q(zeta_m)
            return Err(FieldError::Ramified(p));
        }
        Ok(self
            .group
            .index_of(&Elem::Unit(c as u64))
            .expect("representative is a group element"))
    }

    /// Index of the coset of an arbitrary unit residue.
    pub fn elem_of_residue(&self, r: u64) -> Result<usize, FieldError> {
        let c = self.rep[(r % self.m) as usize];
        if c == NON_UNIT {
            return Err(FieldError::BadField(format!(
                "{r} is not a unit mod {}",
                self.m
            )));
        }
        Ok(self
            .group
            .index_of(&Elem::Unit(c as u64))
            .expect("representative is a group element"))
    }
}

impl FieldLevel for CyclotomicLevel {
    fn group(&self) -> &Arc<FiniteGroup> {
        &self.group
    }

    fn table(&self) -> &ClassTable {
        &self.table
    }

    fn label(&self) -> String {
        format!("abelian level of conductor {}", self.m)
    }

    fn frob_class(&self, p: u64) -> Option<usize> {
        self.frobenius(p).ok().map(|i| self.table.class_of(i))
    }
}

/// Two nested abelian levels L/K/Q of the same conductor: L is the quotient
/// by V, K the quotient by U, with V <= U, and pi the restriction map
/// Gal(L/Q) -> Gal(K/Q).
pub struct AbelianTower {
    pub top: CyclotomicLevel,
    pub base: CyclotomicLevel,
    pub pi: GroupMorphism,
}

pub fn abelian_tower(
    m: u64,
    u_gens: &[u64],
    v_gens: &[u64],
) -> Result<AbelianTower, FieldError> {
    let top = CyclotomicLevel::new(m, v_gens)?;
    let base = CyclotomicLevel::new(m, u_gens)?;
    for &v in v_gens {
        if base.coset_rep(v) != Some(base.coset_rep(1).unwrap()) {
            return Err(FieldError::BadField(format!(
                "V is not contained in U: generator {v} is nontrivial in the base quotient"
            )));
        }
    }
    let map: Vec<usize> = top
        .group
        .elems()
        .iter()
        .map(|e| match e {
            Elem::Unit(r) => base.elem_of_residue(*r).expect("unit stays a unit"),
            _ => unreachable!("abelian levels hold unit elements"),
        })
        .collect();
    let pi = GroupMorphism::new(Arc::clone(&top.group), Arc::clone(&base.group), map)?;
    Ok(AbelianTower { top, base, pi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{stream, PrimeRecord};
    use crate::primes::PrimeWindow;

    #[test]
    fn full_level_mod_5() {
        let lvl = CyclotomicLevel::new(5, &[]).unwrap();
        assert_eq!(lvl.group().order(), 4);
        // Frobenius of 2 generates: d = 4, a single prime above
        let r = lvl.record(2).unwrap();
        assert_eq!((r.d, r.g), (4, 1));
        assert_eq!(r.norm_f64(), 16.0);
        let r = lvl.record(11).unwrap();
        assert_eq!((r.d, r.g), (1, 4));
        let r = lvl.record(19).unwrap();
        assert_eq!((r.d, r.g), (2, 2));
        assert!(matches!(lvl.frobenius(5), Err(FieldError::Ramified(5))));
        assert_eq!(lvl.frob_class(5), None);
    }

    #[test]
    fn stream_skips_ramified() {
        let lvl = CyclotomicLevel::new(5, &[]).unwrap();
        let recs = stream(&lvl, PrimeWindow::new(2, 20).unwrap());
        let ps: Vec<u64> = recs.iter().map(|r| r.p).collect();
        assert_eq!(ps, vec![2, 3, 7, 11, 13, 17, 19]);
        let ds: Vec<u64> = recs.iter().map(|r| r.d).collect();
        assert_eq!(ds, vec![4, 4, 4, 1, 4, 4, 2]);
        for r in &recs {
            assert_eq!(r.d * r.g, 4);
            assert!(!r.ramified);
        }
    }

    #[test]
    fn quotient_level_mod_15() {
        // U = <11>: the base level has group (Z/15)^*/{1,11} of order 4
        let lvl = CyclotomicLevel::new(15, &[11]).unwrap();
        assert_eq!(lvl.group().order(), 4);
        // cosets {1,11},{2,7},{4,14},{8,13}: smallest residues are canonical
        let reps: Vec<Elem> = lvl.group().elems().to_vec();
        assert_eq!(
            reps,
            vec![Elem::Unit(1), Elem::Unit(2), Elem::Unit(4), Elem::Unit(8)]
        );
        assert_eq!(lvl.coset_rep(7), Some(2));
        assert_eq!(lvl.coset_rep(13), Some(8));
        assert_eq!(lvl.coset_rep(12), None);
        // 2 and 7 share a Frobenius class in the quotient
        assert_eq!(lvl.frob_class(2), lvl.frob_class(7));
        assert_ne!(lvl.frob_class(2), lvl.frob_class(11));
        assert_eq!(lvl.frobenius(11).unwrap(), lvl.group().identity());
    }

    #[test]
    fn tower_mod_15() {
        let t = abelian_tower(15, &[11], &[]).unwrap();
        assert_eq!(t.top.group().order(), 8);
        assert_eq!(t.base.group().order(), 4);
        assert_eq!(t.pi.kernel().len(), 2);
        // the fiber over the coset of 2 consists of the residues 2 and 7
        let x = t.base.elem_of_residue(2).unwrap();
        let fiber: Vec<&Elem> = t
            .pi
            .fiber(x)
            .into_iter()
            .map(|i| t.top.group().elem(i))
            .collect();
        assert_eq!(fiber, vec![&Elem::Unit(2), &Elem::Unit(7)]);
        // p = 2: order 4 mod 15, so two primes above in L, one in K
        let top: PrimeRecord = t.top.record(2).unwrap();
        let base: PrimeRecord = t.base.record(2).unwrap();
        assert_eq!((top.d, top.g), (4, 2));
        assert_eq!((base.d, base.g), (4, 1));
        assert_eq!(t.top.frob_class(3), None);
        assert_eq!(t.top.frob_class(5), None);
    }

    #[test]
    fn tower_requires_nested_subgroups() {
        // U = <4>, V = <11>: 11 is not a power of 4 mod 15
        assert!(matches!(
            abelian_tower(15, &[4], &[11]),
            Err(FieldError::BadField(_))
        ));
    }

    #[test]
    fn rejects_bad_conductors_and_generators() {
        assert!(matches!(
            CyclotomicLevel::new(2, &[]),
            Err(FieldError::BadField(_))
        ));
        assert!(matches!(
            CyclotomicLevel::new(15, &[3]),
            Err(FieldError::BadField(_))
        ));
        assert!(matches!(
            CyclotomicLevel::new(15, &[20]),
            Err(FieldError::BadField(_))
        ));
    }

    #[test]
    fn coset_ops_match_unit_arithmetic() {
        let lvl = CyclotomicLevel::new(15, &[11]).unwrap();
        let g = lvl.group();
        for i in 0..g.order() {
            for j in 0..g.order() {
                let (a, b) = match (g.elem(i), g.elem(j)) {
                    (Elem::Unit(a), Elem::Unit(b)) => (*a, *b),
                    _ => unreachable!(),
                };
                let prod = g.elem(g.op_idx(i, j));
                assert_eq!(prod, &Elem::Unit(lvl.coset_rep(a * b % 15).unwrap()));
            }
        }
    }
}
