//! Set expressions describing prime sets, and their compilation against a
//! field scenario.
//!
//! A compiled set answers membership for a concrete prime from its residue
//! and its Frobenius classes at the two scenario levels. Exact prediction
//! additionally needs the expression to be measurable in closed form: any
//! boolean combination of congruence conditions (abelian scenarios) and
//! Frobenius-class conditions qualifies; finite exceptions are ignored since
//! they cannot move a density.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::DensityError;
use crate::fields::{FieldError, FieldPair, PairKind};
use crate::util::{gcd_u64, lcm_u64};

/// Scenario level a Frobenius-class condition refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Top,
    Base,
}

/// One conjugacy class, in scenario-appropriate notation: a residue for
/// abelian levels, a cycle type or an explicit permutation for splitting
/// levels.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ElemSpec {
    Residue(u64),
    CycleType(Vec<u8>),
    Perm { perm: Vec<u8> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetExpr {
    All,
    Empty,
    Congruence { modulus: u64, residues: Vec<u64> },
    Chebotarev { level: Level, classes: Vec<ElemSpec> },
    Union(Box<SetExpr>, Box<SetExpr>),
    Intersect(Box<SetExpr>, Box<SetExpr>),
    Complement(Box<SetExpr>),
    MinusFinite { inner: Box<SetExpr>, primes: Vec<u64> },
}

impl SetExpr {
    pub fn all() -> Self {
        SetExpr::All
    }

    pub fn congruence(modulus: u64, residues: &[u64]) -> Self {
        SetExpr::Congruence { modulus, residues: residues.to_vec() }
    }
}

enum Node {
    Const(bool),
    Congruence { modulus: u64, mask: Vec<bool> },
    Classes { level: Level, mask: Vec<bool> },
    Union(Box<Node>, Box<Node>),
    Intersect(Box<Node>, Box<Node>),
    Complement(Box<Node>),
    MinusFinite(Box<Node>, BTreeSet<u64>),
}

/// A set expression resolved against one scenario: class references are
/// indices, congruence conditions dense masks.
pub struct CompiledSet {
    node: Node,
    /// least common multiple of all congruence moduli, if any appear
    moduli_lcm: Option<u64>,
}

/// Working moduli above this are refused rather than enumerated.
pub const MAX_WORKING_MODULUS: u64 = 1_000_000;

fn resolve_classes(
    pair: &FieldPair,
    level: Level,
    specs: &[ElemSpec],
) -> Result<Vec<bool>, DensityError> {
    let lvl = match level {
        Level::Top => pair.top(),
        Level::Base => pair.base(),
    };
    let mut mask = vec![false; lvl.table().class_count()];
    for spec in specs {
        // a permutation stands for its cycle type
        let spec = match spec {
            ElemSpec::Perm { perm } => {
                ElemSpec::CycleType(crate::fields::cycle_type_of_perm(perm))
            }
            other => other.clone(),
        };
        let class = match (pair.kind(), &spec) {
            (PairKind::Abelian(t), ElemSpec::Residue(r)) => {
                let cyc = match level {
                    Level::Top => &t.top,
                    Level::Base => &t.base,
                };
                let idx = cyc.elem_of_residue(*r)?;
                lvl.table().class_of(idx)
            }
            (PairKind::Abelian(_), _) => {
                return Err(DensityError::Field(FieldError::BadField(
                    "abelian classes are given by unit residues".into(),
                )))
            }
            (PairKind::Sn { top, .. }, ElemSpec::CycleType(t)) => {
                let mut t = t.clone();
                t.sort_unstable();
                let c_top = top.class_of_type(&t).ok_or_else(|| {
                    FieldError::BadField(format!(
                        "{t:?} is not a cycle type of degree {}",
                        top.degree()
                    ))
                })?;
                match level {
                    Level::Top => c_top,
                    Level::Base => pair.base_class_of_top_class(c_top),
                }
            }
            (PairKind::Sn { .. }, _) => {
                return Err(DensityError::Field(FieldError::BadField(
                    "splitting-field classes are given by cycle types".into(),
                )))
            }
        };
        mask[class] = true;
    }
    Ok(mask)
}

impl CompiledSet {
    pub fn compile(expr: &SetExpr, pair: &FieldPair) -> Result<CompiledSet, DensityError> {
        let mut lcm: Option<u64> = None;
        let node = build(expr, pair, &mut lcm)?;
        Ok(CompiledSet { node, moduli_lcm: lcm })
    }

    /// lcm of the congruence moduli appearing in the expression, if any.
    pub fn moduli_lcm(&self) -> Option<u64> {
        self.moduli_lcm
    }

    pub fn has_congruence(&self) -> bool {
        self.moduli_lcm.is_some()
    }

    /// Membership of a concrete prime, given its Frobenius classes at both
    /// levels. This is the estimator path: finite exceptions count.
    pub fn member(&self, p: u64, top_class: usize, base_class: usize) -> bool {
        eval(&self.node, Some(p), top_class, base_class, true)
    }

    /// Membership of a whole residue-plus-class configuration, for exact
    /// prediction: finite exceptions are ignored, and `residue` stands for
    /// every prime in its class mod the working modulus.
    pub(crate) fn member_for_density(
        &self,
        residue: Option<u64>,
        top_class: usize,
        base_class: usize,
    ) -> bool {
        eval(&self.node, residue, top_class, base_class, false)
    }
}

fn build(
    expr: &SetExpr,
    pair: &FieldPair,
    lcm: &mut Option<u64>,
) -> Result<Node, DensityError> {
    Ok(match expr {
        SetExpr::All => Node::Const(true),
        SetExpr::Empty => Node::Const(false),
        SetExpr::Congruence { modulus, residues } => {
            let m = *modulus;
            if m == 0 {
                return Err(DensityError::Field(FieldError::BadField(
                    "congruence modulus must be positive".into(),
                )));
            }
            if m > MAX_WORKING_MODULUS {
                return Err(DensityError::NotPredictable(format!(
                    "congruence modulus {m} exceeds {MAX_WORKING_MODULUS}"
                )));
            }
            let acc = lcm.map_or(m, |l| {
                let g = gcd_u64(l, m);
                l / g * m
            });
            if acc > MAX_WORKING_MODULUS {
                return Err(DensityError::NotPredictable(format!(
                    "combined congruence modulus {acc} exceeds {MAX_WORKING_MODULUS}"
                )));
            }
            *lcm = Some(acc);
            let mut mask = vec![false; m as usize];
            for &r in residues {
                mask[(r % m) as usize] = true;
            }
            Node::Congruence { modulus: m, mask }
        }
        SetExpr::Chebotarev { level, classes } => Node::Classes {
            level: *level,
            mask: resolve_classes(pair, *level, classes)?,
        },
        SetExpr::Union(a, b) => Node::Union(
            Box::new(build(a, pair, lcm)?),
            Box::new(build(b, pair, lcm)?),
        ),
        SetExpr::Intersect(a, b) => Node::Intersect(
            Box::new(build(a, pair, lcm)?),
            Box::new(build(b, pair, lcm)?),
        ),
        SetExpr::Complement(a) => Node::Complement(Box::new(build(a, pair, lcm)?)),
        SetExpr::MinusFinite { inner, primes } => Node::MinusFinite(
            Box::new(build(inner, pair, lcm)?),
            primes.iter().copied().collect(),
        ),
    })
}

fn eval(
    node: &Node,
    p_or_residue: Option<u64>,
    top_class: usize,
    base_class: usize,
    finite_counts: bool,
) -> bool {
    match node {
        Node::Const(b) => *b,
        Node::Congruence { modulus, mask } => {
            let r = p_or_residue.expect("congruence nodes need a residue");
            mask[(r % modulus) as usize]
        }
        Node::Classes { level, mask } => match level {
            Level::Top => mask[top_class],
            Level::Base => mask[base_class],
        },
        Node::Union(a, b) => {
            eval(a, p_or_residue, top_class, base_class, finite_counts)
                || eval(b, p_or_residue, top_class, base_class, finite_counts)
        }
        Node::Intersect(a, b) => {
            eval(a, p_or_residue, top_class, base_class, finite_counts)
                && eval(b, p_or_residue, top_class, base_class, finite_counts)
        }
        Node::Complement(a) => !eval(a, p_or_residue, top_class, base_class, finite_counts),
        Node::MinusFinite(a, primes) => {
            let inner = eval(a, p_or_residue, top_class, base_class, finite_counts);
            if finite_counts {
                inner && !primes.contains(&p_or_residue.expect("estimation sees real primes"))
            } else {
                inner
            }
        }
    }
}

pub(crate) fn working_modulus(
    set_lcms: &[Option<u64>],
    conductor: u64,
) -> Result<u64, DensityError> {
    let mut w = conductor;
    for l in set_lcms.iter().copied().flatten() {
        match lcm_u64(w, l) {
            Some(next) if next <= MAX_WORKING_MODULUS => w = next,
            _ => {
                return Err(DensityError::NotPredictable(format!(
                    "working modulus beyond {MAX_WORKING_MODULUS}"
                )))
            }
        }
    }
    Ok(w)
}
