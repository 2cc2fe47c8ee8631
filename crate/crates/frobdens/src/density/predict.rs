//! Exact density prediction: evaluate a compiled set expression over all
//! Frobenius configurations of a scenario and read off every element's
//! density as a rational count ratio.
//!
//! Abelian scenarios enumerate unit residues modulo the working modulus
//! (conductor joined with every congruence modulus in the expression);
//! splitting-field scenarios enumerate conjugacy classes with their sizes.
//! Either way the density of S at x is
//!
//!   #(configurations in S lying over the class of x) / #(configurations
//!   over the class of x),
//!
//! which is the equidistribution value of the corresponding prime sets.

use std::sync::Arc;

use super::setexpr::{working_modulus, CompiledSet, Level, SetExpr};
use super::DensityError;
use crate::fields::{FieldPair, PairKind};
use crate::group::character::{CValue, CharacterFn};
use crate::rat::{rat_u, Rat};
use crate::util::gcd_u64;

type Result<T> = std::result::Result<T, DensityError>;

/// Weighted count of scenario configurations, split by a level's classes.
struct ClassCounts {
    numer: Vec<u64>,
    denom: Vec<u64>,
}

fn count_by_class(
    pair: &FieldPair,
    level: Level,
    set: &CompiledSet,
    within: Option<&CompiledSet>,
) -> Result<ClassCounts> {
    let lvl = match level {
        Level::Top => pair.top(),
        Level::Base => pair.base(),
    };
    let classes = lvl.table().class_count();
    let mut numer = vec![0u64; classes];
    let mut denom = vec![0u64; classes];
    match pair.kind() {
        PairKind::Abelian(t) => {
            let lcms = [set.moduli_lcm(), within.and_then(|d| d.moduli_lcm())];
            let w = working_modulus(&lcms, t.top.modulus())?;
            for r in 1..w {
                if gcd_u64(r, w) != 1 {
                    continue;
                }
                let tc = pair
                    .top()
                    .frob_class(r)
                    .expect("units mod the working modulus are unramified configurations");
                let bc = pair.base_class_of_top_class(tc);
                let target = match level {
                    Level::Top => tc,
                    Level::Base => bc,
                };
                let inside = within.map_or(true, |d| d.member_for_density(Some(r), tc, bc));
                if !inside {
                    continue;
                }
                denom[target] += 1;
                if set.member_for_density(Some(r), tc, bc) {
                    numer[target] += 1;
                }
            }
        }
        PairKind::Sn { .. } => {
            if set.has_congruence() || within.is_some_and(|d| d.has_congruence()) {
                return Err(DensityError::NotPredictable(
                    "congruence conditions mix residues with cycle types; \
                     no closed form is implemented"
                        .into(),
                ));
            }
            let top_table = pair.top().table();
            for tc in 0..top_table.class_count() {
                let bc = pair.base_class_of_top_class(tc);
                let target = match level {
                    Level::Top => tc,
                    Level::Base => bc,
                };
                let weight = top_table.size(tc) as u64;
                let inside = within.map_or(true, |d| d.member_for_density(None, tc, bc));
                if !inside {
                    continue;
                }
                denom[target] += weight;
                if set.member_for_density(None, tc, bc) {
                    numer[target] += weight;
                }
            }
        }
    }
    Ok(ClassCounts { numer, denom })
}

/// delta_x(S) for every element x of the chosen level, as exact rationals.
pub fn predict_per_element_at(
    pair: &FieldPair,
    level: Level,
    set: &SetExpr,
) -> Result<Vec<Rat>> {
    let compiled = CompiledSet::compile(set, pair)?;
    let counts = count_by_class(pair, level, &compiled, None)?;
    let lvl = match level {
        Level::Top => pair.top(),
        Level::Base => pair.base(),
    };
    (0..lvl.group().order())
        .map(|i| {
            let c = lvl.table().class_of(i);
            if counts.denom[c] == 0 {
                return Err(DensityError::EmptyDenominator);
            }
            Ok(rat_u(counts.numer[c], counts.denom[c]))
        })
        .collect()
}

/// delta_x(S) for every x of the base level.
pub fn predict_per_element(pair: &FieldPair, set: &SetExpr) -> Result<Vec<Rat>> {
    predict_per_element_at(pair, Level::Base, set)
}

/// delta_x(S) for one base-level element.
pub fn predict_density(pair: &FieldPair, set: &SetExpr, x: usize) -> Result<Rat> {
    let mut per = predict_per_element(pair, set)?;
    if x >= per.len() {
        return Err(DensityError::Group(
            crate::group::GroupError::ElementNotInGroup,
        ));
    }
    Ok(per.swap_remove(x))
}

/// Density of S at x measured inside a denominator set D: the exact value of
/// #(S and D over x) / #(D over x).
pub fn predict_conditional(
    pair: &FieldPair,
    set: &SetExpr,
    denominator: &SetExpr,
    x: usize,
) -> Result<Rat> {
    let base = pair.base();
    if x >= base.group().order() {
        return Err(DensityError::Group(
            crate::group::GroupError::ElementNotInGroup,
        ));
    }
    let compiled = CompiledSet::compile(set, pair)?;
    let within = CompiledSet::compile(denominator, pair)?;
    let counts = count_by_class(pair, Level::Base, &compiled, Some(&within))?;
    let c = base.table().class_of(x);
    if counts.denom[c] == 0 {
        return Err(DensityError::EmptyDenominator);
    }
    Ok(rat_u(counts.numer[c], counts.denom[c]))
}

/// Characteristic function x -> delta_x(S) of one level, as an exact
/// character-table object.
pub fn characteristic_function(
    pair: &FieldPair,
    level: Level,
    set: &SetExpr,
) -> Result<CharacterFn> {
    let values = predict_per_element_at(pair, level, set)?;
    let lvl = match level {
        Level::Top => pair.top(),
        Level::Base => pair.base(),
    };
    Ok(CharacterFn::exact(Arc::clone(lvl.group()), values)?)
}

/// Check exactly that the weighted density of psi computed downstairs equals
/// the weighted density of psi pulled back upstairs, for the same set.
pub fn inflation_identity_check(
    pair: &FieldPair,
    psi: &CharacterFn,
    set: &SetExpr,
) -> Result<bool> {
    let chi_top = characteristic_function(pair, Level::Top, set)?;
    let chi_base = characteristic_function(pair, Level::Base, set)?;
    let lifted = psi.pull_back(pair.pi())?;
    let upstairs = lifted.inner_product(&chi_top)?;
    let downstairs = psi.inner_product(&chi_base)?;
    Ok(match (&upstairs, &downstairs) {
        (CValue::Exact(a), CValue::Exact(b)) => a == b,
        _ => {
            let d = upstairs.to_complex() - downstairs.to_complex();
            d.norm() <= 1e-9
        }
    })
}
