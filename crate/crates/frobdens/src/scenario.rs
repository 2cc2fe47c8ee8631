//! Scenario files: JSON documents binding a field, a prime set, a target
//! Frobenius element and the numeric knobs for one batch run.
//!
//! A scenario names either a single tower (abelian or splitting-field) on
//! which densities are predicted and estimated, or a cross pair of two
//! cyclotomic fields for the joint-condition pullback, which is exact-only.

use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use crate::density::{ElemSpec, SetExpr};
use crate::estimate::{CharSpec, EstimateError, Schedule};
use crate::fields::{cycle_type_of_perm, FieldError, FieldLevel, FieldPair, NormalPart, PairKind};
use crate::group::character::CharacterFn;
use crate::group::{Elem, FiniteGroup, GroupError, GroupMorphism};
use crate::poly::IntPoly;
use crate::rat::{rat_parse, Rat};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {err}")]
    Io {
        path: String,
        err: std::io::Error,
    },
    #[error("malformed scenario json: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("bad scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
}

type Result<T> = std::result::Result<T, ScenarioError>;

/// The raw document. Field names mirror the math: `u` and `v` generate the
/// subgroups whose quotients are the base and top levels, `X` is the prime
/// cutoff, `expected` is an exact rational like "1/2".
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub field: FieldSpec,
    #[serde(default)]
    pub set: Option<SetExpr>,
    #[serde(default)]
    pub x: Option<ElemChoice>,
    #[serde(default)]
    pub psi: Option<PsiSpec>,
    #[serde(default)]
    pub schedule: Option<Vec<(f64, u64)>>,
    #[serde(default, rename = "X")]
    pub cutoff: Option<u64>,
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub expected: Option<String>,
    #[serde(default)]
    pub denominator: Option<SetExpr>,
    #[serde(default)]
    pub chi: Option<ChiJson>,
    #[serde(default)]
    pub s_values: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldSpec {
    /// Cyclotomic tower of conductor m: top level is the quotient of
    /// (Z/m)* by <v>, base level the quotient by <u>, with <v> <= <u>.
    Abelian {
        m: u64,
        #[serde(default)]
        u: Vec<u64>,
        #[serde(default)]
        v: Vec<u64>,
    },
    /// Splitting field of the monic f, coefficients ascending including the
    /// leading 1; base level is the quotient by the named normal subgroup.
    Sn { f: Vec<i64>, h: NormalSpec },
    /// Two cyclotomic fields for the joint-condition pullback; x lives in
    /// (Z/left_modulus)*, sigma in (Z/right_modulus)*.
    Cross {
        left_modulus: u64,
        right_modulus: u64,
        x: u64,
        sigma: u64,
    },
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalSpec {
    Trivial,
    Alternating,
    Generated(Vec<Vec<u8>>),
}

impl NormalSpec {
    fn to_part(&self) -> NormalPart {
        match self {
            NormalSpec::Trivial => NormalPart::Trivial,
            NormalSpec::Alternating => NormalPart::Alternating,
            NormalSpec::Generated(g) => NormalPart::Generated(g.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentityTag {
    Identity,
}

/// An element of the base group: a unit residue, a cycle type, an explicit
/// permutation, or the string "identity".
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ElemChoice {
    Named(IdentityTag),
    Spec(ElemSpec),
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiSpec {
    Regular,
    PointMass(ElemChoice),
    Table(Vec<String>),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChiJson {
    pub modulus: u64,
    pub exponent: u64,
}

/// Two abelian fields glued along their common cyclotomic subfield
/// (Z/gcd)*, with the target elements already resolved to indices.
pub struct CrossScenario {
    pub left: Arc<FiniteGroup>,
    pub right: Arc<FiniteGroup>,
    pub to_common_left: GroupMorphism,
    pub to_common_right: GroupMorphism,
    pub x: usize,
    pub sigma: usize,
}

pub enum ResolvedField {
    Pair(Box<FieldPair>),
    Cross(Box<CrossScenario>),
}

pub struct Scenario {
    pub field: ResolvedField,
    pub set: SetExpr,
    pub x: Option<usize>,
    pub psi: Option<CharacterFn>,
    pub schedule: Schedule,
    pub cutoff: u64,
    pub tolerance: f64,
    pub expected: Option<Rat>,
    pub denominator: Option<SetExpr>,
    pub chi: CharSpec,
    pub s_values: Option<Vec<f64>>,
}

impl Scenario {
    /// The tower, or an error for cross scenarios (which only predict).
    pub fn pair(&self) -> Result<&FieldPair> {
        match &self.field {
            ResolvedField::Pair(p) => Ok(p),
            ResolvedField::Cross(_) => Err(ScenarioError::Invalid(
                "this command needs a tower scenario, not a cross pair".into(),
            )),
        }
    }

    /// The base-level element every estimate and prediction refers to.
    pub fn x(&self) -> Result<usize> {
        self.x
            .ok_or_else(|| ScenarioError::Invalid("scenario names no element x".into()))
    }
}

fn units_with_common(m: u64, g: u64) -> Result<(Arc<FiniteGroup>, GroupMorphism)> {
    let big = FiniteGroup::full_units(m)?;
    let common = FiniteGroup::full_units(g)?;
    let map: Vec<usize> = big
        .elems()
        .iter()
        .map(|e| match e {
            Elem::Unit(r) => common
                .index_of(&Elem::Unit(r % g))
                .expect("reduction mod a divisor stays a unit"),
            _ => unreachable!("unit groups hold unit elements"),
        })
        .collect();
    let pi = GroupMorphism::new(Arc::clone(&big), Arc::clone(&common), map)?;
    Ok((big, pi))
}

fn resolve_cross(lm: u64, rm: u64, x: u64, sigma: u64) -> Result<CrossScenario> {
    let g = crate::util::gcd_u64(lm, rm);
    let (left, to_common_left) = units_with_common(lm, g)?;
    let (right, to_common_right) = units_with_common(rm, g)?;
    let find = |grp: &Arc<FiniteGroup>, m: u64, r: u64, name: &str| -> Result<usize> {
        grp.index_of(&Elem::Unit(r % m)).ok_or_else(|| {
            ScenarioError::Invalid(format!("{name} = {r} is not a unit mod {m}"))
        })
    };
    let x = find(&left, lm, x, "x")?;
    let sigma = find(&right, rm, sigma, "sigma")?;
    Ok(CrossScenario {
        left,
        right,
        to_common_left,
        to_common_right,
        x,
        sigma,
    })
}

fn resolve_x(pair: &FieldPair, choice: &ElemChoice) -> Result<usize> {
    match choice {
        ElemChoice::Named(IdentityTag::Identity) => Ok(pair.base().group().identity()),
        ElemChoice::Spec(spec) => match (pair.kind(), spec) {
            (PairKind::Abelian(t), ElemSpec::Residue(r)) => Ok(t.base.elem_of_residue(*r)?),
            (PairKind::Abelian(_), _) => Err(ScenarioError::Invalid(
                "abelian scenarios name x by a unit residue".into(),
            )),
            (PairKind::Sn { top, .. }, ElemSpec::Perm { perm }) => {
                let idx = top
                    .group()
                    .index_of(&Elem::Perm(perm.clone()))
                    .ok_or_else(|| {
                        ScenarioError::Invalid(format!(
                            "{perm:?} is not a permutation of degree {}",
                            top.degree()
                        ))
                    })?;
                Ok(pair.pi().apply_idx(idx))
            }
            (PairKind::Sn { top, .. }, ElemSpec::CycleType(t)) => {
                let mut t = t.clone();
                t.sort_unstable();
                let c = top.class_of_type(&t).ok_or_else(|| {
                    ScenarioError::Invalid(format!(
                        "{t:?} is not a cycle type of degree {}",
                        top.degree()
                    ))
                })?;
                let rep = pair.top().table().members(c)[0];
                Ok(pair.pi().apply_idx(rep))
            }
            (PairKind::Sn { .. }, ElemSpec::Residue(_)) => Err(ScenarioError::Invalid(
                "splitting-field scenarios name x by a cycle type or permutation".into(),
            )),
        },
    }
}

fn resolve_psi(pair: &FieldPair, spec: &PsiSpec) -> Result<CharacterFn> {
    let base = Arc::clone(pair.base().group());
    match spec {
        PsiSpec::Regular => Ok(CharacterFn::regular(base)),
        PsiSpec::PointMass(choice) => {
            let x = resolve_x(pair, choice)?;
            Ok(CharacterFn::point_mass(base, x)?)
        }
        PsiSpec::Table(vals) => {
            let parsed: Option<Vec<Rat>> = vals.iter().map(|s| rat_parse(s)).collect();
            let parsed = parsed
                .ok_or_else(|| ScenarioError::Invalid("unparsable rational in psi table".into()))?;
            Ok(CharacterFn::exact(base, parsed)?)
        }
    }
}

impl ScenarioFile {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|err| ScenarioError::Io {
            path: path.display().to_string(),
            err,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn resolve(&self) -> Result<Scenario> {
        let field = match &self.field {
            FieldSpec::Abelian { m, u, v } => {
                ResolvedField::Pair(Box::new(FieldPair::abelian(*m, u, v)?))
            }
            FieldSpec::Sn { f, h } => {
                let poly = IntPoly::monic_from_i64(f)
                    .map_err(|e| ScenarioError::Invalid(format!("bad polynomial: {e}")))?;
                ResolvedField::Pair(Box::new(FieldPair::splitting(poly, h.to_part())?))
            }
            FieldSpec::Cross {
                left_modulus,
                right_modulus,
                x,
                sigma,
            } => ResolvedField::Cross(Box::new(resolve_cross(
                *left_modulus,
                *right_modulus,
                *x,
                *sigma,
            )?)),
        };
        let cutoff = self.cutoff.unwrap_or(10_000_000);
        if cutoff < 2 {
            return Err(ScenarioError::Invalid(format!("cutoff {cutoff} below 2")));
        }
        let schedule = match &self.schedule {
            Some(entries) => Schedule::new(entries.clone())?,
            None => Schedule::scaled_to(cutoff)?,
        };
        let tolerance = self.tolerance.unwrap_or(0.02);
        if !(tolerance > 0.0) || !tolerance.is_finite() {
            return Err(ScenarioError::Invalid(format!(
                "tolerance {tolerance} is not a positive finite number"
            )));
        }
        let expected = match &self.expected {
            Some(s) => Some(
                rat_parse(s)
                    .ok_or_else(|| ScenarioError::Invalid(format!("unparsable expected {s:?}")))?,
            ),
            None => None,
        };
        let (x, psi) = match &field {
            ResolvedField::Pair(pair) => {
                let x = self.x.as_ref().map(|c| resolve_x(pair, c)).transpose()?;
                let psi = self.psi.as_ref().map(|p| resolve_psi(pair, p)).transpose()?;
                (x, psi)
            }
            ResolvedField::Cross(_) => {
                if self.x.is_some() || self.psi.is_some() {
                    return Err(ScenarioError::Invalid(
                        "cross scenarios carry x and sigma inside the field spec".into(),
                    ));
                }
                (None, None)
            }
        };
        let chi = match &self.chi {
            Some(c) => CharSpec {
                modulus: c.modulus,
                exponent: c.exponent,
            },
            None => CharSpec::trivial(),
        };
        Ok(Scenario {
            field,
            set: self.set.clone().unwrap_or(SetExpr::All),
            x,
            psi,
            schedule,
            cutoff,
            tolerance,
            expected,
            denominator: self.denominator.clone(),
            chi,
            s_values: self.s_values.clone(),
        })
    }
}

/// Normalize a permutation-or-type x into the ascending cycle type it names.
pub fn cycle_type_of_choice(choice: &ElemChoice) -> Option<Vec<u8>> {
    match choice {
        ElemChoice::Spec(ElemSpec::CycleType(t)) => {
            let mut t = t.clone();
            t.sort_unstable();
            Some(t)
        }
        ElemChoice::Spec(ElemSpec::Perm { perm }) => Some(cycle_type_of_perm(perm)),
        _ => None,
    }
}
