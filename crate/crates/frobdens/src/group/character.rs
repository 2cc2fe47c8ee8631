//! Complex- and rational-valued functions on a finite group, with the
//! normalized inner product <f, g> = |G|^-1 * sum_x f(x) conj(g(x)).
//!
//! Values are stored per element (index order of the owning group), not per
//! conjugacy class: the empirical side produces genuine value tables that
//! need not be class functions.

use std::sync::Arc;

use num::complex::Complex64;
use num::{BigRational, FromPrimitive, Signed, Zero};

use super::{FiniteGroup, GroupError};
use crate::rat::{rat_int, rat_to_f64, Rat};

#[derive(Clone, Debug, PartialEq)]
pub enum CharValues {
    Exact(Vec<Rat>),
    Complex(Vec<Complex64>),
}

#[derive(Clone, Debug)]
pub struct CharacterFn {
    group: Arc<FiniteGroup>,
    values: CharValues,
}

/// Result of an inner product: exact when both operands are exact.
#[derive(Clone, Debug, PartialEq)]
pub enum CValue {
    Exact(Rat),
    Float(Complex64),
}

impl CValue {
    pub fn to_complex(&self) -> Complex64 {
        match self {
            CValue::Exact(r) => Complex64::new(rat_to_f64(r), 0.0),
            CValue::Float(z) => *z,
        }
    }

    pub fn as_exact(&self) -> Option<&Rat> {
        match self {
            CValue::Exact(r) => Some(r),
            CValue::Float(_) => None,
        }
    }
}

impl CharacterFn {
    pub fn exact(group: Arc<FiniteGroup>, values: Vec<Rat>) -> Result<Self, GroupError> {
        if values.len() != group.order() {
            return Err(GroupError::GroupMismatch);
        }
        Ok(CharacterFn {
            group,
            values: CharValues::Exact(values),
        })
    }

    pub fn complex(group: Arc<FiniteGroup>, values: Vec<Complex64>) -> Result<Self, GroupError> {
        if values.len() != group.order() {
            return Err(GroupError::GroupMismatch);
        }
        Ok(CharacterFn {
            group,
            values: CharValues::Complex(values),
        })
    }

    /// Character of the regular representation: |G| at the identity, 0
    /// elsewhere.
    pub fn regular(group: Arc<FiniteGroup>) -> Self {
        let n = group.order();
        let mut values = vec![Rat::zero(); n];
        values[group.identity()] = rat_int(n as i64);
        CharacterFn {
            group,
            values: CharValues::Exact(values),
        }
    }

    /// |G| * indicator of one element.
    pub fn point_mass(group: Arc<FiniteGroup>, x: usize) -> Result<Self, GroupError> {
        let n = group.order();
        if x >= n {
            return Err(GroupError::ElementNotInGroup);
        }
        let mut values = vec![Rat::zero(); n];
        values[x] = rat_int(n as i64);
        Ok(CharacterFn {
            group,
            values: CharValues::Exact(values),
        })
    }

    /// The constant function 1.
    pub fn one(group: Arc<FiniteGroup>) -> Self {
        let n = group.order();
        CharacterFn {
            group,
            values: CharValues::Exact(vec![rat_int(1); n]),
        }
    }

    pub fn group(&self) -> &Arc<FiniteGroup> {
        &self.group
    }

    pub fn values(&self) -> &CharValues {
        &self.values
    }

    pub fn value_at(&self, i: usize) -> CValue {
        match &self.values {
            CharValues::Exact(v) => CValue::Exact(v[i].clone()),
            CharValues::Complex(v) => CValue::Float(v[i]),
        }
    }

    /// Pull back through a morphism: (f o pi)(g) = f(pi(g)).
    pub fn pull_back(&self, pi: &super::GroupMorphism) -> Result<Self, GroupError> {
        if pi.target().as_ref() != self.group.as_ref() {
            return Err(GroupError::GroupMismatch);
        }
        let n = pi.source().order();
        let values = match &self.values {
            CharValues::Exact(v) => {
                CharValues::Exact((0..n).map(|i| v[pi.apply_idx(i)].clone()).collect())
            }
            CharValues::Complex(v) => {
                CharValues::Complex((0..n).map(|i| v[pi.apply_idx(i)]).collect())
            }
        };
        Ok(CharacterFn {
            group: Arc::clone(pi.source()),
            values,
        })
    }

    /// Normalized inner product <self, other>; exact iff both sides are.
    pub fn inner_product(&self, other: &CharacterFn) -> Result<CValue, GroupError> {
        if self.group.as_ref() != other.group.as_ref() {
            return Err(GroupError::GroupMismatch);
        }
        let n = self.group.order();
        match (&self.values, &other.values) {
            (CharValues::Exact(a), CharValues::Exact(b)) => {
                let mut acc = Rat::zero();
                for i in 0..n {
                    acc += &a[i] * &b[i];
                }
                let denom = BigRational::from_i64(n as i64).expect("order fits");
                Ok(CValue::Exact(acc / denom))
            }
            _ => {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..n {
                    let a = self.value_at(i).to_complex();
                    let b = other.value_at(i).to_complex();
                    acc += a * b.conj();
                }
                Ok(CValue::Float(acc / n as f64))
            }
        }
    }

    /// A density-shaped function: real values within [0, |G|] and mean
    /// exactly 1 (up to float tolerance for complex tables).
    pub fn is_density_character(&self) -> bool {
        let n = self.group.order();
        match &self.values {
            CharValues::Exact(v) => {
                let cap = rat_int(n as i64);
                if v.iter().any(|x| x.is_negative() || *x > cap) {
                    return false;
                }
                let sum: Rat = v.iter().cloned().sum();
                sum == cap
            }
            CharValues::Complex(v) => {
                const EPS: f64 = 1e-9;
                let cap = n as f64;
                if v.iter().any(|z| {
                    z.im.abs() > EPS || z.re < -EPS || z.re > cap + EPS
                }) {
                    return false;
                }
                let mean: Complex64 = v.iter().sum::<Complex64>() / cap;
                (mean.re - 1.0).abs() <= EPS && mean.im.abs() <= EPS
            }
        }
    }
}

/// Exact mean of a character, i.e. <f, 1>.
pub fn exact_mean(f: &CharacterFn) -> Option<Rat> {
    match &f.values {
        CharValues::Exact(v) => {
            let sum: Rat = v.iter().cloned().sum();
            let n = BigRational::from_usize(f.group.order())?;
            Some(sum / n)
        }
        CharValues::Complex(_) => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{enumerate_group, Elem, GeneratorSpec};
    use crate::rat::rat;

    fn s3() -> Arc<FiniteGroup> {
        enumerate_group(GeneratorSpec::Perms {
            degree: 3,
            gens: vec![vec![1, 0, 2], vec![1, 2, 0]],
        })
        .unwrap()
    }

    #[test]
    fn regular_character_pairs_to_identity_value() {
        let g = s3();
        let reg = CharacterFn::regular(Arc::clone(&g));
        // <reg, f> = f(identity) for any exact f
        let f = CharacterFn::exact(
            Arc::clone(&g),
            (0..6).map(|i| rat(i as i64 + 2, 3)).collect(),
        )
        .unwrap();
        let ip = reg.inner_product(&f).unwrap();
        let expect = f.value_at(g.identity());
        assert_eq!(ip, expect);
    }

    #[test]
    fn point_mass_pairs_to_point_value() {
        let g = s3();
        let x = g.index_of(&Elem::Perm(vec![1, 0, 2])).unwrap();
        let pm = CharacterFn::point_mass(Arc::clone(&g), x).unwrap();
        let f = CharacterFn::exact(
            Arc::clone(&g),
            (0..6).map(|i| rat(1 + i as i64, 7)).collect(),
        )
        .unwrap();
        let ip = pm.inner_product(&f).unwrap();
        assert_eq!(ip, f.value_at(x));
    }

    #[test]
    fn density_character_classification() {
        let g = s3();
        assert!(CharacterFn::regular(Arc::clone(&g)).is_density_character());
        assert!(CharacterFn::one(Arc::clone(&g)).is_density_character());
        let x = g.index_of(&Elem::Perm(vec![1, 2, 0])).unwrap();
        assert!(CharacterFn::point_mass(Arc::clone(&g), x)
            .unwrap()
            .is_density_character());
        // negative value disqualifies
        let mut vals = vec![rat(1, 1); 6];
        vals[0] = rat(7, 1);
        vals[1] = rat(-1, 1);
        let bad = CharacterFn::exact(Arc::clone(&g), vals).unwrap();
        assert!(!bad.is_density_character());
        // mean != 1 disqualifies
        let half = CharacterFn::exact(Arc::clone(&g), vec![rat(1, 2); 6]).unwrap();
        assert!(!half.is_density_character());
    }

    #[test]
    fn complex_density_checks_tolerate_roundoff() {
        let g = s3();
        let vals = vec![Complex64::new(1.0 + 1e-12, -1e-13); 6];
        let f = CharacterFn::complex(Arc::clone(&g), vals).unwrap();
        assert!(f.is_density_character());
        let vals = vec![Complex64::new(1.0, 0.5); 6];
        let f = CharacterFn::complex(Arc::clone(&g), vals).unwrap();
        assert!(!f.is_density_character());
    }

    #[test]
    fn group_mismatch_rejected() {
        let g = s3();
        let h = FiniteGroup::full_units(5).unwrap();
        let a = CharacterFn::one(Arc::clone(&g));
        let b = CharacterFn::one(Arc::clone(&h));
        assert!(matches!(
            a.inner_product(&b),
            Err(GroupError::GroupMismatch)
        ));
    }

    #[test]
    fn mixed_inner_product_is_float_and_close_to_exact() {
        let g = s3();
        let exact_vals: Vec<Rat> = (0..6).map(|i| rat(i as i64, 4)).collect();
        let a = CharacterFn::exact(Arc::clone(&g), exact_vals.clone()).unwrap();
        let b_float = CharacterFn::complex(
            Arc::clone(&g),
            exact_vals
                .iter()
                .map(|r| Complex64::new(rat_to_f64(r), 0.0))
                .collect(),
        )
        .unwrap();
        let exact = a.inner_product(&a).unwrap();
        let float = a.inner_product(&b_float).unwrap();
        let CValue::Exact(e) = &exact else { panic!() };
        let CValue::Float(z) = float else { panic!() };
        assert!((z.re - rat_to_f64(e)).abs() < 1e-12);
        assert!(z.im.abs() < 1e-15);
    }

    #[test]
    fn pull_back_preserves_mean_value_identity() {
        // <f o pi, 1_G> = <f, 1_Q> when pi is surjective with equal fibers
        let g = s3();
        let r = g.index_of(&Elem::Perm(vec![1, 2, 0])).unwrap();
        let a3 = g.subgroup_closure(&[r]).unwrap();
        let (q, pi) = crate::group::quotient(&g, &a3).unwrap();
        let f = CharacterFn::exact(Arc::clone(&q), vec![rat(1, 3), rat(5, 3)]).unwrap();
        let lifted = f.pull_back(&pi).unwrap();
        assert_eq!(exact_mean(&lifted), exact_mean(&f));
    }
}
