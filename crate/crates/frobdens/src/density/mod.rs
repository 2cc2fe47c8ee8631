//! Exact closed-form density predictions in rational arithmetic.
//!
//! Everything here is finite group theory: densities of Frobenius-defined
//! prime sets reduce to counting conjugacy classes, centralizers and fibers
//! of quotient maps. Floating point never enters; the empirical estimators
//! live elsewhere and are checked against these values.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::group::character::{CValue, CharacterFn};
use crate::group::{
    direct_product, fiber_h_classes, fibered_product, normal_closure, semidirect_tower, Elem,
    FiniteGroup, GroupError, GroupMorphism,
};
use crate::rat::{rat, rat_u, Rat};
use crate::util::order_mod;

pub mod predict;
pub mod setexpr;

pub use predict::{
    characteristic_function, inflation_identity_check, predict_conditional, predict_density,
    predict_per_element, predict_per_element_at,
};
pub use setexpr::{CompiledSet, ElemSpec, Level, SetExpr};

#[derive(Debug, thiserror::Error)]
pub enum DensityError {
    #[error("the class is not a kernel-conjugacy class of the fiber over x")]
    ClassNotInFiber,
    #[error("lifted density lands outside [0,1]")]
    OutOfRange,
    #[error("per-element density table does not cover the group")]
    MissingDensity,
    #[error("no exact prediction for this set expression: {0}")]
    NotPredictable(String),
    #[error("outside the lemma's hypothesis: {0}")]
    HypothesisViolated(String),
    #[error("denominator set has no primes with Frobenius x")]
    EmptyDenominator,
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Field(#[from] crate::fields::FieldError),
}

type Result<T> = std::result::Result<T, DensityError>;

/// Density of the primes below a fixed kernel-conjugacy class: for C a class
/// of the kernel acting on the fiber over x, the primes whose Frobenius lies
/// in C make up exactly #C / #fiber of the primes with Frobenius x.
pub fn fiber_class_density(pi: &GroupMorphism, x: usize, class: &[usize]) -> Result<Rat> {
    let part = fiber_h_classes(pi, x)?;
    let mut sorted = class.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if !part.classes.iter().any(|c| *c == sorted) {
        return Err(DensityError::ClassNotInFiber);
    }
    Ok(rat(sorted.len() as i64, part.fiber.len() as i64))
}

/// Same density, with the class given by a representative y in the fiber.
pub fn fiber_class_density_of(pi: &GroupMorphism, x: usize, y: usize) -> Result<Rat> {
    let part = fiber_h_classes(pi, x)?;
    match part.class_of(y) {
        Some(c) => Ok(rat(
            part.classes[c].len() as i64,
            part.fiber.len() as i64,
        )),
        None => Err(DensityError::ClassNotInFiber),
    }
}

fn kernel_membership(pi: &GroupMorphism) -> Vec<bool> {
    let mut in_h = vec![false; pi.source().order()];
    for i in pi.kernel() {
        in_h[i] = true;
    }
    in_h
}

fn centralizer_in_kernel(pi: &GroupMorphism, y: usize) -> Result<usize> {
    let g = pi.source();
    let in_h = kernel_membership(pi);
    Ok(g.centralizer(y)?
        .into_iter()
        .filter(|&z| in_h[z])
        .count())
}

/// Number of primes of the large field over each counted prime of the small
/// one: #Z_H(y) / #<y^d>, where H is the kernel of pi and d the order of
/// pi(y).
pub fn gamma_constant(pi: &GroupMorphism, y: usize) -> Result<Rat> {
    let g = pi.source();
    let d = pi.target().element_order(pi.apply_idx(y))?;
    let zh = centralizer_in_kernel(pi, y)?;
    let mut yd = g.identity();
    for _ in 0..d {
        yd = g.op_idx(yd, y);
    }
    let cyc = g.cyclic_subgroup(yd)?.len();
    Ok(rat(zh as i64, cyc as i64))
}

/// Number of primes with Frobenius exactly x over each rational prime whose
/// Frobenius class is C(x): #Z_G(x) / #<x>.
pub fn multiplicity_constant(g: &Arc<FiniteGroup>, x: usize) -> Result<Rat> {
    let z = g.centralizer(x)?.len();
    let c = g.cyclic_subgroup(x)?.len();
    Ok(rat(z as i64, c as i64))
}

/// Fiber-to-base counting constant #Z_G(y) / (#<x> #Z_H(y)) with x = pi(y).
/// For trivial kernel this collapses to the multiplicity constant.
pub fn beta_constant(pi: &GroupMorphism, y: usize) -> Result<Rat> {
    let g = pi.source();
    let zg = g.centralizer(y)?.len();
    let x = pi.apply_idx(y);
    let cx = pi.target().cyclic_subgroup(x)?.len();
    let zh = centralizer_in_kernel(pi, y)?;
    Ok(rat(zg as i64, (cx * zh) as i64))
}

/// Density at the top of the tower from a density at the bottom: the set of
/// top-field primes with Frobenius in the class C has y-density
/// (#H / #C) * delta, where delta is the x-density of its image set.
pub fn lifted_class_density(delta: &Rat, class_size: usize, h_size: usize) -> Result<Rat> {
    let v = rat_u(h_size as u64, class_size as u64) * delta;
    if v < crate::rat::rat_zero() || v > crate::rat::rat_one() {
        return Err(DensityError::OutOfRange);
    }
    Ok(v)
}

/// Density of the primes of L whose trace in a second extension M has
/// Frobenius class C(sigma), measured among primes of L with Frobenius x.
/// Both extensions project onto the common quotient Q; the answer is zero
/// unless x and sigma agree there, and otherwise is counted in the fibered
/// product.
pub fn chebotarev_pullback(
    pl: &GroupMorphism,
    pm: &GroupMorphism,
    x: usize,
    sigma: usize,
) -> Result<Rat> {
    if !pl.is_surjective() || !pm.is_surjective() {
        return Err(DensityError::Group(GroupError::TargetMismatch));
    }
    if pl.target().as_ref() != pm.target().as_ref() {
        return Err(DensityError::Group(GroupError::TargetMismatch));
    }
    let xb = pl.apply_idx(x);
    let sb = pm.apply_idx(sigma);
    if pl.target().elem(xb) != pm.target().elem(sb) {
        return Ok(crate::rat::rat_zero());
    }
    let prod = fibered_product(pl, pm)?;
    let pair = Elem::Pair(
        Box::new(pl.source().elem(x).clone()),
        Box::new(pm.source().elem(sigma).clone()),
    );
    let idx = prod
        .group
        .index_of(&pair)
        .expect("(x, sigma) has matching images, so it lies in the fibered product");
    let c_pair = prod.group.conjugacy_class(idx)?.len();
    let c_x = pl.source().conjugacy_class(x)?.len();
    // index of the intersection field inside M
    let m_over_common = pm.source().order() / pm.target().order();
    Ok(rat_u(c_pair as u64, (m_over_common * c_x) as u64))
}

/// Weighted density attached to a weight function psi on the group, given
/// the per-element densities of a fixed prime set: the inner product of psi
/// with the characteristic function x -> delta_x(S).
pub fn psi_density_predict(
    psi: &CharacterFn,
    per_x: &BTreeMap<usize, Rat>,
) -> Result<CValue> {
    let g = psi.group();
    let n = g.order();
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        match per_x.get(&i) {
            Some(v) => values.push(v.clone()),
            None => return Err(DensityError::MissingDensity),
        }
    }
    let chi = CharacterFn::exact(Arc::clone(g), values)?;
    Ok(psi.inner_product(&chi)?)
}

/// Density constant of the compositum tower: for GL = Delta x Hi sitting
/// over the common quotient Delta of a second extension M, the y-density of
/// the sigma-trace condition is #C(sigma, GM) / ([M : common] #C(sigma_bar,
/// Delta)), independent of the Hi-component of y. The closed form is checked
/// against the general fibered-product count on every call.
pub fn tower_compositum_density(
    delta: &Arc<FiniteGroup>,
    hi: &Arc<FiniteGroup>,
    gm_proj: &GroupMorphism,
    sigma: usize,
    x: usize,
) -> Result<Rat> {
    if gm_proj.target().as_ref() != delta.as_ref() || !gm_proj.is_surjective() {
        return Err(DensityError::Group(GroupError::TargetMismatch));
    }
    let gm = gm_proj.source();
    let sigma_bar = gm_proj.apply_idx(sigma);
    let c_sigma = gm.conjugacy_class(sigma)?.len();
    let c_bar = delta.conjugacy_class(sigma_bar)?.len();
    let m_over_common = gm.order() / delta.order();
    let closed = rat_u(c_sigma as u64, (m_over_common * c_bar) as u64);

    // independent route: Cor-style pullback through GL = Delta x Hi
    let gl = direct_product(delta, hi)?;
    let y = gl
        .group
        .index_of(&Elem::Pair(
            Box::new(delta.elem(sigma_bar).clone()),
            Box::new(hi.elem(x).clone()),
        ))
        .expect("product contains every pair");
    let general = chebotarev_pullback(&gl.left, gm_proj, y, sigma)?;
    assert_eq!(
        closed, general,
        "compositum closed form disagrees with the fibered-product count"
    );
    Ok(closed)
}

/// Brute-force check that the normal closure of the canonical section of
/// ker(psi) in the tower group equals the full preimage of ker(psi). Holds
/// whenever ord(chi) > ord(psi); other inputs are outside the hypothesis and
/// are reported as such rather than asserted either way.
pub fn tower_kernel_closure_verify(
    d: u32,
    p: u32,
    chi_gen: u32,
    level: usize,
    psi_gen: u32,
) -> Result<bool> {
    if psi_gen == 0 || psi_gen >= p {
        return Err(DensityError::Group(GroupError::MalformedGenerator(
            format!("psi generator image {psi_gen} is not a unit mod {p}"),
        )));
    }
    let ord_psi = order_mod(psi_gen as u64, p as u64);
    if d as u64 % ord_psi != 0 {
        return Err(DensityError::Group(GroupError::MalformedGenerator(
            format!("psi generator image {psi_gen} has order not dividing {d}"),
        )));
    }
    let tower = semidirect_tower(d, p, chi_gen, level)?;
    let ord_chi = order_mod(chi_gen as u64, p as u64);
    if ord_psi >= ord_chi {
        return Err(DensityError::HypothesisViolated(format!(
            "ord(psi) = {ord_psi} is not smaller than ord(chi) = {ord_chi}"
        )));
    }
    // ker(psi) in Z/d: the multiples of ord(psi)
    let base = &tower.base;
    let kernel_base: Vec<usize> = (0..base.order())
        .filter(|&i| match base.elem(i) {
            Elem::Tower(a, _) => *a as u64 % ord_psi == 0,
            _ => unreachable!("tower base holds tower elements"),
        })
        .collect();
    let section_img: Vec<usize> = kernel_base
        .iter()
        .map(|&i| tower.section.apply_idx(i))
        .collect();
    let closure = normal_closure(&tower.group, &section_img)?;
    let mut preimage: Vec<usize> = (0..tower.group.order())
        .filter(|&i| kernel_base.binary_search(&tower.projection.apply_idx(i)).is_ok())
        .collect();
    preimage.sort_unstable();
    Ok(closure == preimage)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::quotient;
    use crate::rat::{rat_one, rat_zero};

    fn s3_mod_a3() -> (Arc<FiniteGroup>, GroupMorphism) {
        let s3 = FiniteGroup::symmetric(3).unwrap();
        let a3: Vec<usize> = (0..6)
            .filter(|&i| match s3.elem(i) {
                Elem::Perm(p) => crate::fields::perm_parity(p),
                _ => unreachable!(),
            })
            .collect();
        let (_q, pi) = quotient(&s3, &a3).unwrap();
        (s3, pi)
    }

    fn idx_of_perm(g: &FiniteGroup, p: &[u8]) -> usize {
        g.index_of(&Elem::Perm(p.to_vec())).unwrap()
    }

    #[test]
    fn fiber_class_densities_in_s3() {
        let (s3, pi) = s3_mod_a3();
        let x = pi.target().identity();
        let three_cycle = idx_of_perm(&s3, &[1, 2, 0]);
        // the kernel A3 is abelian, so {(123)} is a singleton class
        assert_eq!(
            fiber_class_density(&pi, x, &[three_cycle]).unwrap(),
            rat(1, 3)
        );
        assert_eq!(
            fiber_class_density_of(&pi, x, three_cycle).unwrap(),
            rat(1, 3)
        );
        // all three transpositions form one kernel class over the other coset
        let xt = pi.apply_idx(idx_of_perm(&s3, &[1, 0, 2]));
        let transpositions: Vec<usize> = [[1u8, 0, 2], [2, 1, 0], [0, 2, 1]]
            .iter()
            .map(|p| idx_of_perm(&s3, p.as_slice()))
            .collect();
        assert_eq!(
            fiber_class_density(&pi, xt, &transpositions).unwrap(),
            rat_one()
        );
        // a proper subset of that class is rejected
        assert!(matches!(
            fiber_class_density(&pi, xt, &transpositions[..1]),
            Err(DensityError::ClassNotInFiber)
        ));
        // and a class from the wrong fiber as well
        assert!(matches!(
            fiber_class_density_of(&pi, x, transpositions[0]),
            Err(DensityError::ClassNotInFiber)
        ));
    }

    #[test]
    fn trivial_kernel_gives_unit_density() {
        let s3 = FiniteGroup::symmetric(3).unwrap();
        let (_q, pi) = quotient(&s3, &[s3.identity()]).unwrap();
        for x in 0..s3.order() {
            let y = pi
                .fiber(pi.apply_idx(x))
                .into_iter()
                .next()
                .unwrap();
            assert_eq!(fiber_class_density_of(&pi, pi.apply_idx(x), y).unwrap(), rat_one());
        }
    }

    #[test]
    fn gamma_values_in_s3() {
        let (s3, pi) = s3_mod_a3();
        assert_eq!(gamma_constant(&pi, idx_of_perm(&s3, &[1, 0, 2])).unwrap(), rat_one());
        assert_eq!(gamma_constant(&pi, idx_of_perm(&s3, &[1, 2, 0])).unwrap(), rat_one());
        // identity: Z_H = A3 of order 3, <e> trivial
        assert_eq!(gamma_constant(&pi, s3.identity()).unwrap(), rat(3, 1));
    }

    #[test]
    fn gamma_on_order_two_cyclic() {
        // G = H = Z/2 realized as the units mod 3
        let g = FiniteGroup::full_units(3).unwrap();
        let (_q, pi) = quotient(&g, &[0, 1]).unwrap();
        let y = g.index_of(&Elem::Unit(2)).unwrap();
        assert_eq!(gamma_constant(&pi, y).unwrap(), rat_one());
    }

    #[test]
    fn multiplicity_values() {
        let s3 = FiniteGroup::symmetric(3).unwrap();
        assert_eq!(multiplicity_constant(&s3, s3.identity()).unwrap(), rat(6, 1));
        assert_eq!(
            multiplicity_constant(&s3, idx_of_perm(&s3, &[1, 0, 2])).unwrap(),
            rat_one()
        );
        // cyclic group: |G| / |<x>|
        let c = FiniteGroup::full_units(5).unwrap();
        for x in 0..c.order() {
            let expect = rat_u(4, c.element_order(x).unwrap());
            assert_eq!(multiplicity_constant(&c, x).unwrap(), expect);
        }
    }

    #[test]
    fn beta_values_in_s3() {
        let (s3, pi) = s3_mod_a3();
        assert_eq!(beta_constant(&pi, idx_of_perm(&s3, &[1, 2, 0])).unwrap(), rat_one());
        assert_eq!(beta_constant(&pi, idx_of_perm(&s3, &[1, 0, 2])).unwrap(), rat_one());
        // trivial kernel: beta collapses to the multiplicity constant
        let (_q, pid) = quotient(&s3, &[s3.identity()]).unwrap();
        for y in 0..s3.order() {
            assert_eq!(
                beta_constant(&pid, y).unwrap(),
                multiplicity_constant(&s3, y).unwrap()
            );
        }
    }

    #[test]
    fn lifting_scales_by_fiber_over_class() {
        // delta = 1/6 on the base, class of size 1 in a kernel of size 3
        assert_eq!(lifted_class_density(&rat(1, 6), 1, 3).unwrap(), rat(1, 2));
        assert_eq!(lifted_class_density(&rat_zero(), 1, 3).unwrap(), rat_zero());
        assert_eq!(lifted_class_density(&rat(1, 3), 1, 3).unwrap(), rat_one());
        assert!(matches!(
            lifted_class_density(&rat(2, 3), 1, 3),
            Err(DensityError::OutOfRange)
        ));
    }

    #[test]
    fn partition_of_unity_and_lift_consistency() {
        let (_s3, pi) = s3_mod_a3();
        for x in 0..pi.target().order() {
            let part = fiber_h_classes(&pi, x).unwrap();
            let mut total = rat_zero();
            for c in &part.classes {
                let delta = fiber_class_density(&pi, x, c).unwrap();
                total += &delta;
                // lifting the class's own density back up gives exactly 1
                assert_eq!(
                    lifted_class_density(&delta, c.len(), part.fiber.len()).unwrap(),
                    rat_one()
                );
            }
            assert_eq!(total, rat_one());
        }
    }

    #[test]
    fn pullback_same_field_is_indicator() {
        let g = FiniteGroup::full_units(3).unwrap();
        let id_map: Vec<usize> = (0..g.order()).collect();
        let pi = GroupMorphism::new(Arc::clone(&g), Arc::clone(&g), id_map).unwrap();
        let x = g.index_of(&Elem::Unit(2)).unwrap();
        assert_eq!(chebotarev_pullback(&pi, &pi, x, x).unwrap(), rat_one());
        assert_eq!(
            chebotarev_pullback(&pi, &pi, x, g.identity()).unwrap(),
            rat_zero()
        );
    }

    #[test]
    fn pullback_disjoint_quadratic_fields() {
        // Gal over Q of the fourth and third cyclotomic fields, trivial overlap
        let gl = FiniteGroup::full_units(4).unwrap();
        let gm = FiniteGroup::full_units(3).unwrap();
        let t = FiniteGroup::trivial();
        let pl = GroupMorphism::new(Arc::clone(&gl), Arc::clone(&t), vec![0, 0]).unwrap();
        let pm = GroupMorphism::new(Arc::clone(&gm), Arc::clone(&t), vec![0, 0]).unwrap();
        let x = gl.index_of(&Elem::Unit(3)).unwrap();
        let sigma = gm.index_of(&Elem::Unit(2)).unwrap();
        assert_eq!(chebotarev_pullback(&pl, &pm, x, sigma).unwrap(), rat(1, 2));
    }

    #[test]
    fn pullback_mismatched_images_vanishes() {
        // both fields contain the quadratic field cut out by units mod 3
        let gl = FiniteGroup::full_units(12).unwrap();
        let q = FiniteGroup::full_units(3).unwrap();
        let to_q = |g: &Arc<FiniteGroup>| -> GroupMorphism {
            let map: Vec<usize> = (0..g.order())
                .map(|i| match g.elem(i) {
                    Elem::Unit(r) => q.index_of(&Elem::Unit(r % 3)).unwrap(),
                    _ => unreachable!(),
                })
                .collect();
            GroupMorphism::new(Arc::clone(g), Arc::clone(&q), map).unwrap()
        };
        let pl = to_q(&gl);
        let pm = GroupMorphism::new(
            Arc::clone(&q),
            Arc::clone(&q),
            (0..q.order()).collect(),
        )
        .unwrap();
        let x = gl.index_of(&Elem::Unit(5)).unwrap(); // 5 = 2 mod 3
        let sigma = q.identity(); // 1 mod 3
        assert_eq!(chebotarev_pullback(&pl, &pm, x, sigma).unwrap(), rat_zero());
        let sigma2 = q.index_of(&Elem::Unit(2)).unwrap();
        assert_eq!(
            chebotarev_pullback(&pl, &pm, x, sigma2).unwrap(),
            rat(1, 1)
        );
    }

    #[test]
    fn pullback_rejects_distinct_quotients() {
        let gl = FiniteGroup::full_units(4).unwrap();
        let gm = FiniteGroup::full_units(3).unwrap();
        let t = FiniteGroup::trivial();
        let pl = GroupMorphism::new(Arc::clone(&gl), Arc::clone(&t), vec![0, 0]).unwrap();
        let pm_bad =
            GroupMorphism::new(Arc::clone(&gm), Arc::clone(&gm), vec![0, 1]).unwrap();
        assert!(matches!(
            chebotarev_pullback(&pl, &pm_bad, 0, 0),
            Err(DensityError::Group(GroupError::TargetMismatch))
        ));
    }

    #[test]
    fn psi_densities_from_tables() {
        let g = FiniteGroup::full_units(5).unwrap();
        let mut per_x = BTreeMap::new();
        for i in 0..g.order() {
            per_x.insert(i, rat(1, 4));
        }
        // regular weight recovers the density at the identity
        let reg = CharacterFn::regular(Arc::clone(&g));
        assert_eq!(
            psi_density_predict(&reg, &per_x).unwrap().as_exact().unwrap(),
            &rat(1, 4)
        );
        // point mass picks out one element's density
        per_x.insert(1, rat(1, 2));
        let pm = CharacterFn::point_mass(Arc::clone(&g), 1).unwrap();
        assert_eq!(
            psi_density_predict(&pm, &per_x).unwrap().as_exact().unwrap(),
            &rat(1, 2)
        );
        // constant weight averages
        let one = CharacterFn::one(Arc::clone(&g));
        assert_eq!(
            psi_density_predict(&one, &per_x).unwrap().as_exact().unwrap(),
            &rat(5, 16)
        );
        per_x.remove(&2);
        assert!(matches!(
            psi_density_predict(&one, &per_x),
            Err(DensityError::MissingDensity)
        ));
    }

    #[test]
    fn compositum_constant_collapsed_and_split() {
        let delta = FiniteGroup::full_units(3).unwrap();
        let hi = semidirect_tower(2, 3, 2, 1).unwrap().group;
        // collapsed case: M is the mu_p field itself
        let idm = GroupMorphism::new(
            Arc::clone(&delta),
            Arc::clone(&delta),
            (0..delta.order()).collect(),
        )
        .unwrap();
        let sigma = delta.index_of(&Elem::Unit(2)).unwrap();
        for x in 0..hi.order() {
            assert_eq!(
                tower_compositum_density(&delta, &hi, &idm, sigma, x).unwrap(),
                rat_one()
            );
        }
        // split case: GM of order 4 mapping onto Delta of order 2
        let gm = FiniteGroup::full_units(5).unwrap();
        let map: Vec<usize> = (0..gm.order())
            .map(|i| match gm.elem(i) {
                // quadratic residues mod 5 go to 1, the rest to 2
                Elem::Unit(r) => {
                    let is_square = (1..5).any(|a| a * a % 5 == *r);
                    delta
                        .index_of(&Elem::Unit(if is_square { 1 } else { 2 }))
                        .unwrap()
                }
                _ => unreachable!(),
            })
            .collect();
        let proj = GroupMorphism::new(Arc::clone(&gm), Arc::clone(&delta), map).unwrap();
        let sigma = gm.index_of(&Elem::Unit(2)).unwrap();
        let vals: Vec<Rat> = (0..hi.order())
            .map(|x| tower_compositum_density(&delta, &hi, &proj, sigma, x).unwrap())
            .collect();
        for v in &vals {
            assert_eq!(v, &rat(1, 2));
        }
    }

    #[test]
    fn kernel_closure_verdicts() {
        // injective chi on Z/2 inside F_3: psi trivial is the only smaller one
        assert!(tower_kernel_closure_verify(2, 3, 2, 1, 1).unwrap());
        // d = 4 in F_5 with injective chi, psi of order 2
        assert!(tower_kernel_closure_verify(4, 5, 2, 2, 4).unwrap());
        // psi = chi violates the hypothesis
        assert!(matches!(
            tower_kernel_closure_verify(2, 3, 2, 1, 2),
            Err(DensityError::HypothesisViolated(_))
        ));
        // malformed psi: order does not divide d
        assert!(matches!(
            tower_kernel_closure_verify(2, 7, 6, 1, 2),
            Err(DensityError::Group(GroupError::MalformedGenerator(_)))
        ));
    }
}
