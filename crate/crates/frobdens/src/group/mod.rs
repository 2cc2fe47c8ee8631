//! Finite groups with explicit element encodings.
//!
//! Everything here is exhaustive: groups are capped at [`SIZE_CAP`] elements,
//! stored as an indexed list with a concrete multiplication rule, and all the
//! classical notions (conjugacy classes, centralizers, quotients, fibered
//! products, normal closures) are computed by direct enumeration. No
//! stabilizer-chain machinery; at these sizes it would only add failure modes.
//!
//! Element encodings are canonical and totally ordered, so every construction
//! has a deterministic element order: enumeration from generators is BFS from
//! the identity, direct constructions sort lexicographically.

pub mod character;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::util::{inv_mod, mul_mod, pow_mod, SplitMix64};

/// Hard cap on group order; constructions exceeding it are refused.
pub const SIZE_CAP: usize = 10_000;

/// Above this order, associativity/closure checks sample this many cases
/// instead of running exhaustively.
const EXHAUSTIVE_LIMIT: usize = 64;
const SPOT_CHECKS: usize = 10_000;
const CHECK_SEED: u64 = 0x5eed_cafe_f00d_0001;

#[derive(Debug, Error, PartialEq)]
pub enum GroupError {
    #[error("group size cap of {SIZE_CAP} exceeded")]
    SizeCapExceeded,
    #[error("malformed generator: {0}")]
    MalformedGenerator(String),
    #[error("element not in group")]
    ElementNotInGroup,
    #[error("subset is not a normal subgroup: {0}")]
    NotNormal(String),
    #[error("morphism targets differ")]
    TargetMismatch,
    #[error("map is not a homomorphism: {0}")]
    NotHomomorphism(String),
    #[error("characters defined on different groups")]
    GroupMismatch,
    #[error("group invariant violated: {0}")]
    InvariantViolated(String),
}

type Result<T> = std::result::Result<T, GroupError>;

/// A group element. Which variant is legal is determined by the owning
/// group's operation rule; a group never mixes variants.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Elem {
    /// Residue in 0..m, coprime to the modulus of the owning rule.
    Unit(u64),
    /// Permutation as an images array: p[i] is the image of point i.
    Perm(Vec<u8>),
    /// Tower element (a, v): base exponent a and a translation vector v.
    Tower(u32, Vec<u32>),
    /// Element of a (fibered) product.
    Pair(Box<Elem>, Box<Elem>),
}

impl fmt::Display for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Elem::Unit(u) => write!(f, "{u}"),
            Elem::Perm(p) => {
                write!(f, "[")?;
                for (i, x) in p.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, "]")
            }
            Elem::Tower(a, v) => {
                write!(f, "({a};")?;
                for x in v {
                    write!(f, " {x}")?;
                }
                write!(f, ")")
            }
            Elem::Pair(a, b) => write!(f, "({a}|{b})"),
        }
    }
}

/// Multiplication rule interpreting [`Elem`] encodings.
#[derive(Clone, Debug, PartialEq)]
pub enum OpRule {
    /// Compose image arrays: (a*b)(i) = a[b[i]].
    PermCompose,
    /// Multiply residues modulo m.
    UnitMul(u64),
    /// (a,v)*(b,w) = (a+b mod d, v + chi(a)·w mod p), chi(a) = chi_pows[a].
    Tower {
        d: u32,
        p: u32,
        chi_pows: Arc<Vec<u32>>,
    },
    /// Componentwise.
    PairWise(Box<OpRule>, Box<OpRule>),
    /// Quotient of a unit group: multiply mod m, then canonicalize through
    /// the dense residue→representative table.
    UnitCoset { m: u64, rep: Arc<Vec<u32>> },
    /// Quotient of an arbitrary group: apply the inner rule, then map to the
    /// canonical coset representative.
    Coset {
        inner: Box<OpRule>,
        rep: Arc<HashMap<Elem, Elem>>,
    },
}

impl OpRule {
    pub fn apply(&self, a: &Elem, b: &Elem) -> Elem {
        match (self, a, b) {
            (OpRule::PermCompose, Elem::Perm(x), Elem::Perm(y)) => {
                Elem::Perm(y.iter().map(|&i| x[i as usize]).collect())
            }
            (OpRule::UnitMul(m), Elem::Unit(x), Elem::Unit(y)) => Elem::Unit(mul_mod(*x, *y, *m)),
            (OpRule::Tower { d, p, chi_pows }, Elem::Tower(a, v), Elem::Tower(b, w)) => {
                debug_assert_eq!(v.len(), w.len());
                let c = chi_pows[*a as usize] as u64;
                let vec = v
                    .iter()
                    .zip(w)
                    .map(|(&vi, &wi)| ((vi as u64 + c * wi as u64) % *p as u64) as u32)
                    .collect();
                Elem::Tower((a + b) % d, vec)
            }
            (OpRule::PairWise(r1, r2), Elem::Pair(a1, a2), Elem::Pair(b1, b2)) => {
                Elem::Pair(Box::new(r1.apply(a1, b1)), Box::new(r2.apply(a2, b2)))
            }
            (OpRule::UnitCoset { m, rep }, Elem::Unit(x), Elem::Unit(y)) => {
                Elem::Unit(rep[mul_mod(*x, *y, *m) as usize] as u64)
            }
            (OpRule::Coset { inner, rep }, a, b) => {
                let raw = inner.apply(a, b);
                rep.get(&raw)
                    .cloned()
                    .unwrap_or_else(|| panic!("coset table misses product {raw}"))
            }
            _ => panic!("operation applied to foreign encoding"),
        }
    }

    pub fn invert(&self, a: &Elem) -> Elem {
        match (self, a) {
            (OpRule::PermCompose, Elem::Perm(x)) => {
                let mut inv = vec![0u8; x.len()];
                for (i, &xi) in x.iter().enumerate() {
                    inv[xi as usize] = i as u8;
                }
                Elem::Perm(inv)
            }
            (OpRule::UnitMul(m), Elem::Unit(x)) => {
                Elem::Unit(inv_mod(*x, *m).expect("unit has an inverse"))
            }
            (OpRule::Tower { d, p, chi_pows }, Elem::Tower(a, v)) => {
                // (a,v)^-1 = (-a, -chi(-a)·v)
                let na = (d - a) % d;
                let c = chi_pows[na as usize] as u64;
                let p64 = *p as u64;
                let vec = v
                    .iter()
                    .map(|&vi| ((p64 - c * vi as u64 % p64) % p64) as u32)
                    .collect();
                Elem::Tower(na, vec)
            }
            (OpRule::PairWise(r1, r2), Elem::Pair(a1, a2)) => {
                Elem::Pair(Box::new(r1.invert(a1)), Box::new(r2.invert(a2)))
            }
            (OpRule::UnitCoset { m, rep }, Elem::Unit(x)) => {
                let raw = inv_mod(*x, *m).expect("unit has an inverse");
                Elem::Unit(rep[raw as usize] as u64)
            }
            (OpRule::Coset { inner, rep }, a) => {
                let raw = inner.invert(a);
                rep.get(&raw)
                    .cloned()
                    .unwrap_or_else(|| panic!("coset table misses inverse {raw}"))
            }
            _ => panic!("inverse applied to foreign encoding"),
        }
    }
}

/// Immutable finite group. Cheap to share; all APIs take `&self` and the
/// estimator reads groups from many threads at once.
pub struct FiniteGroup {
    label: String,
    elems: Vec<Elem>,
    index: HashMap<Elem, usize>,
    op: OpRule,
    identity: usize,
    inv: Vec<usize>,
    gens: Vec<usize>,
}

/// Structural equality: same element list in the same order under the same
/// operation rule. Labels are cosmetic and do not participate.
impl PartialEq for FiniteGroup {
    fn eq(&self, other: &Self) -> bool {
        self.elems == other.elems && self.op == other.op
    }
}

impl fmt::Debug for FiniteGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FiniteGroup({}, order {})", self.label, self.elems.len())
    }
}

impl FiniteGroup {
    pub(crate) fn construct(
        label: String,
        elems: Vec<Elem>,
        op: OpRule,
        identity_elem: Elem,
        gen_elems: &[Elem],
    ) -> Result<Arc<Self>> {
        if elems.is_empty() {
            return Err(GroupError::InvariantViolated("empty element list".into()));
        }
        if elems.len() > SIZE_CAP {
            return Err(GroupError::SizeCapExceeded);
        }
        let mut index = HashMap::with_capacity(elems.len());
        for (i, e) in elems.iter().enumerate() {
            if index.insert(e.clone(), i).is_some() {
                return Err(GroupError::InvariantViolated(format!(
                    "duplicate element {e}"
                )));
            }
        }
        let identity = *index
            .get(&identity_elem)
            .ok_or_else(|| GroupError::InvariantViolated("identity not in element list".into()))?;
        let mut inv = Vec::with_capacity(elems.len());
        for e in &elems {
            let ie = op.invert(e);
            let j = *index.get(&ie).ok_or_else(|| {
                GroupError::InvariantViolated(format!("inverse of {e} not in element list"))
            })?;
            inv.push(j);
        }
        let gens = gen_elems
            .iter()
            .map(|g| {
                index
                    .get(g)
                    .copied()
                    .ok_or_else(|| GroupError::InvariantViolated("generator left the set".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        let g = FiniteGroup {
            label,
            elems,
            index,
            op,
            identity,
            inv,
            gens,
        };
        g.check_identity_and_inverses()?;
        g.check_closure()?;
        g.check_associativity()?;
        Ok(Arc::new(g))
    }

    fn check_identity_and_inverses(&self) -> Result<()> {
        let e = &self.elems[self.identity];
        for (i, a) in self.elems.iter().enumerate() {
            if self.op.apply(e, a) != *a || self.op.apply(a, e) != *a {
                return Err(GroupError::InvariantViolated(format!(
                    "identity law fails at {a}"
                )));
            }
            let ia = &self.elems[self.inv[i]];
            if self.op.apply(a, ia) != *e {
                return Err(GroupError::InvariantViolated(format!(
                    "inverse law fails at {a}"
                )));
            }
        }
        Ok(())
    }

    fn check_closure(&self) -> Result<()> {
        let n = self.elems.len();
        let mut pairs: Box<dyn Iterator<Item = (usize, usize)>> = if n <= EXHAUSTIVE_LIMIT {
            Box::new((0..n).flat_map(move |i| (0..n).map(move |j| (i, j))))
        } else {
            let mut rng = SplitMix64::new(CHECK_SEED);
            let mut v = Vec::with_capacity(SPOT_CHECKS);
            for _ in 0..SPOT_CHECKS {
                v.push((rng.below(n), rng.below(n)));
            }
            Box::new(v.into_iter())
        };
        if let Some((i, j)) = pairs.find(|&(i, j)| {
            !self
                .index
                .contains_key(&self.op.apply(&self.elems[i], &self.elems[j]))
        }) {
            return Err(GroupError::InvariantViolated(format!(
                "closure fails: {} * {}",
                self.elems[i], self.elems[j]
            )));
        }
        Ok(())
    }

    fn check_associativity(&self) -> Result<()> {
        let n = self.elems.len();
        let check = |i: usize, j: usize, k: usize| -> bool {
            let ab = self.op.apply(&self.elems[i], &self.elems[j]);
            let bc = self.op.apply(&self.elems[j], &self.elems[k]);
            self.op.apply(&ab, &self.elems[k]) == self.op.apply(&self.elems[i], &bc)
        };
        if n <= EXHAUSTIVE_LIMIT {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        if !check(i, j, k) {
                            return Err(GroupError::InvariantViolated(
                                "associativity fails".into(),
                            ));
                        }
                    }
                }
            }
        } else {
            let mut rng = SplitMix64::new(CHECK_SEED ^ 0xffff);
            for _ in 0..SPOT_CHECKS {
                let (i, j, k) = (rng.below(n), rng.below(n), rng.below(n));
                if !check(i, j, k) {
                    return Err(GroupError::InvariantViolated("associativity fails".into()));
                }
            }
        }
        Ok(())
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn order(&self) -> usize {
        self.elems.len()
    }

    pub fn elems(&self) -> &[Elem] {
        &self.elems
    }

    pub fn elem(&self, i: usize) -> &Elem {
        &self.elems[i]
    }

    pub fn index_of(&self, e: &Elem) -> Option<usize> {
        self.index.get(e).copied()
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn generators(&self) -> &[usize] {
        &self.gens
    }

    pub fn op_idx(&self, i: usize, j: usize) -> usize {
        let prod = self.op.apply(&self.elems[i], &self.elems[j]);
        *self
            .index
            .get(&prod)
            .unwrap_or_else(|| panic!("closure breach: {} * {}", self.elems[i], self.elems[j]))
    }

    pub fn inv_idx(&self, i: usize) -> usize {
        self.inv[i]
    }

    pub fn conjugate_idx(&self, g: usize, x: usize) -> usize {
        // g x g^-1
        self.op_idx(self.op_idx(g, x), self.inv[g])
    }

    fn require(&self, i: usize) -> Result<()> {
        if i < self.elems.len() {
            Ok(())
        } else {
            Err(GroupError::ElementNotInGroup)
        }
    }

    pub fn element_order(&self, i: usize) -> Result<u64> {
        self.require(i)?;
        let mut k = 1u64;
        let mut cur = i;
        while cur != self.identity {
            cur = self.op_idx(cur, i);
            k += 1;
        }
        Ok(k)
    }

    /// Indices of ⟨x⟩, in power order starting at the identity.
    pub fn cyclic_subgroup(&self, i: usize) -> Result<Vec<usize>> {
        self.require(i)?;
        let mut out = vec![self.identity];
        let mut cur = i;
        while cur != self.identity {
            out.push(cur);
            cur = self.op_idx(cur, i);
        }
        Ok(out)
    }

    pub fn conjugacy_class(&self, i: usize) -> Result<Vec<usize>> {
        self.require(i)?;
        let mut seen: HashSet<usize> = HashSet::new();
        for g in 0..self.elems.len() {
            seen.insert(self.conjugate_idx(g, i));
        }
        let mut v: Vec<usize> = seen.into_iter().collect();
        v.sort_unstable();
        Ok(v)
    }

    pub fn centralizer(&self, i: usize) -> Result<Vec<usize>> {
        self.require(i)?;
        Ok((0..self.elems.len())
            .filter(|&g| self.op_idx(g, i) == self.op_idx(i, g))
            .collect())
    }

    pub fn is_abelian(&self) -> bool {
        let n = self.elems.len();
        (0..n).all(|i| (i + 1..n).all(|j| self.op_idx(i, j) == self.op_idx(j, i)))
    }

    /// All conjugacy classes, each sorted, ordered by smallest member.
    pub fn class_partition(&self) -> Vec<Vec<usize>> {
        let n = self.elems.len();
        let mut seen = vec![false; n];
        let mut classes = Vec::new();
        for i in 0..n {
            if seen[i] {
                continue;
            }
            let cls = self.conjugacy_class(i).expect("index in range");
            for &c in &cls {
                seen[c] = true;
            }
            classes.push(cls);
        }
        classes
    }

    /// Closure of a set of element indices under multiplication.
    pub fn subgroup_closure(&self, seed: &[usize]) -> Result<Vec<usize>> {
        for &i in seed {
            self.require(i)?;
        }
        let mut member = vec![false; self.elems.len()];
        member[self.identity] = true;
        let mut queue = vec![self.identity];
        let mut gens: Vec<usize> = seed.to_vec();
        gens.sort_unstable();
        gens.dedup();
        let mut head = 0;
        while head < queue.len() {
            let cur = queue[head];
            head += 1;
            for &g in &gens {
                let nxt = self.op_idx(cur, g);
                if !member[nxt] {
                    member[nxt] = true;
                    queue.push(nxt);
                }
            }
        }
        let mut out: Vec<usize> = (0..self.elems.len()).filter(|&i| member[i]).collect();
        out.sort_unstable();
        Ok(out)
    }

    /// Is the index set (assumed sorted, deduped) a subgroup?
    pub fn is_subgroup(&self, sub: &[usize]) -> Result<bool> {
        for &i in sub {
            self.require(i)?;
        }
        let set: HashSet<usize> = sub.iter().copied().collect();
        if !set.contains(&self.identity) {
            return Ok(false);
        }
        for &a in sub {
            for &b in sub {
                if !set.contains(&self.op_idx(a, b)) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    pub fn is_normal(&self, sub: &[usize]) -> Result<bool> {
        let set: HashSet<usize> = sub.iter().copied().collect();
        let conjugators: Vec<usize> = if self.gens.is_empty() {
            (0..self.elems.len()).collect()
        } else {
            self.gens.clone()
        };
        for &g in &conjugators {
            for &h in sub {
                if !set.contains(&self.conjugate_idx(g, h)) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// Generator input for [`enumerate_group`].
pub enum GeneratorSpec {
    /// Residues generating a subgroup of (Z/m)^*.
    Units { modulus: u64, gens: Vec<u64> },
    /// Permutations (images arrays) generating a subgroup of S_degree.
    Perms { degree: usize, gens: Vec<Vec<u8>> },
}

/// BFS enumeration of the subgroup generated by the given elements.
/// Element order is the BFS discovery order from the identity.
pub fn enumerate_group(spec: GeneratorSpec) -> Result<Arc<FiniteGroup>> {
    let (gens, op, identity, label) = match spec {
        GeneratorSpec::Units { modulus, gens } => {
            if modulus == 0 {
                return Err(GroupError::MalformedGenerator("modulus must be >= 1".into()));
            }
            let mut elems = Vec::new();
            for &u in &gens {
                if u >= modulus || crate::util::gcd_u64(u, modulus) != 1 {
                    return Err(GroupError::MalformedGenerator(format!(
                        "{u} is not a reduced unit mod {modulus}"
                    )));
                }
                elems.push(Elem::Unit(u));
            }
            let identity = if modulus == 1 { 0 } else { 1 };
            (
                elems,
                OpRule::UnitMul(modulus),
                Elem::Unit(identity),
                format!("units mod {modulus} from generators"),
            )
        }
        GeneratorSpec::Perms { degree, gens } => {
            if degree == 0 || degree > 32 {
                return Err(GroupError::MalformedGenerator(
                    "permutation degree must be in 1..=32".into(),
                ));
            }
            let mut elems = Vec::new();
            for g in &gens {
                if g.len() != degree || !is_bijection(g) {
                    return Err(GroupError::MalformedGenerator(format!(
                        "images array {g:?} is not a permutation of degree {degree}"
                    )));
                }
                elems.push(Elem::Perm(g.clone()));
            }
            let identity = Elem::Perm((0..degree as u8).collect());
            (
                elems,
                OpRule::PermCompose,
                identity,
                format!("degree-{degree} permutation group"),
            )
        }
    };
    bfs_enumerate(label, gens, op, identity)
}

fn is_bijection(p: &[u8]) -> bool {
    let mut seen = vec![false; p.len()];
    for &x in p {
        if (x as usize) >= p.len() || seen[x as usize] {
            return false;
        }
        seen[x as usize] = true;
    }
    true
}

fn bfs_enumerate(
    label: String,
    gen_elems: Vec<Elem>,
    op: OpRule,
    identity: Elem,
) -> Result<Arc<FiniteGroup>> {
    let mut order = vec![identity.clone()];
    let mut seen: HashSet<Elem> = order.iter().cloned().collect();
    let mut head = 0;
    while head < order.len() {
        let cur = order[head].clone();
        head += 1;
        for g in &gen_elems {
            let nxt = op.apply(&cur, g);
            if seen.insert(nxt.clone()) {
                if order.len() >= SIZE_CAP {
                    return Err(GroupError::SizeCapExceeded);
                }
                order.push(nxt);
            }
        }
    }
    FiniteGroup::construct(label, order, op, identity, &gen_elems)
}

impl FiniteGroup {
    /// The one-element group.
    pub fn trivial() -> Arc<FiniteGroup> {
        FiniteGroup::construct(
            "trivial".into(),
            vec![Elem::Unit(0)],
            OpRule::UnitMul(1),
            Elem::Unit(0),
            &[],
        )
        .expect("trivial group is valid")
    }

    /// The full unit group (Z/m)^*, elements ascending.
    pub fn full_units(m: u64) -> Result<Arc<FiniteGroup>> {
        if m == 0 {
            return Err(GroupError::MalformedGenerator("modulus must be >= 1".into()));
        }
        if m == 1 {
            return Ok(Self::trivial());
        }
        let elems: Vec<Elem> = (1..m)
            .filter(|&r| crate::util::gcd_u64(r, m) == 1)
            .map(Elem::Unit)
            .collect();
        if elems.len() > SIZE_CAP {
            return Err(GroupError::SizeCapExceeded);
        }
        FiniteGroup::construct(
            format!("units mod {m}"),
            elems,
            OpRule::UnitMul(m),
            Elem::Unit(1),
            &[],
        )
    }

    /// Full symmetric group on `n` points, elements in lexicographic order.
    pub fn symmetric(n: usize) -> Result<Arc<FiniteGroup>> {
        if n == 0 || n > 7 {
            return Err(GroupError::MalformedGenerator(
                "symmetric group degree must be in 1..=7".into(),
            ));
        }
        let mut elems = Vec::new();
        let mut cur: Vec<u8> = (0..n as u8).collect();
        loop {
            elems.push(Elem::Perm(cur.clone()));
            if !next_permutation(&mut cur) {
                break;
            }
        }
        let mut gens = Vec::new();
        if n >= 2 {
            let mut t: Vec<u8> = (0..n as u8).collect();
            t.swap(0, 1);
            // transposition (0 1) plus the n-cycle i -> i+1 generate S_n
            let cyc: Vec<u8> = (0..n).map(|i| ((i + 1) % n) as u8).collect();
            gens.push(Elem::Perm(t));
            gens.push(Elem::Perm(cyc));
        }
        FiniteGroup::construct(
            format!("S{n}"),
            elems,
            OpRule::PermCompose,
            Elem::Perm((0..n as u8).collect()),
            &gens,
        )
    }
}

fn next_permutation(p: &mut [u8]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Total map between groups, validated as a homomorphism on construction
/// (exhaustively for small sources, by fixed-seed sampling above that).
#[derive(Clone, Debug)]
pub struct GroupMorphism {
    source: Arc<FiniteGroup>,
    target: Arc<FiniteGroup>,
    map: Vec<usize>,
}

impl GroupMorphism {
    pub fn new(
        source: Arc<FiniteGroup>,
        target: Arc<FiniteGroup>,
        map: Vec<usize>,
    ) -> Result<Self> {
        if map.len() != source.order() {
            return Err(GroupError::NotHomomorphism(
                "map does not cover the source".into(),
            ));
        }
        for &t in &map {
            if t >= target.order() {
                return Err(GroupError::ElementNotInGroup);
            }
        }
        if map[source.identity()] != target.identity() {
            return Err(GroupError::NotHomomorphism(
                "identity does not map to identity".into(),
            ));
        }
        let n = source.order();
        let check = |i: usize, j: usize| -> bool {
            map[source.op_idx(i, j)] == target.op_idx(map[i], map[j])
        };
        if n <= EXHAUSTIVE_LIMIT {
            for i in 0..n {
                for j in 0..n {
                    if !check(i, j) {
                        return Err(GroupError::NotHomomorphism(format!(
                            "fails at {} * {}",
                            source.elem(i),
                            source.elem(j)
                        )));
                    }
                }
            }
        } else {
            let mut rng = SplitMix64::new(CHECK_SEED ^ 0xbeef);
            for _ in 0..SPOT_CHECKS {
                let (i, j) = (rng.below(n), rng.below(n));
                if !check(i, j) {
                    return Err(GroupError::NotHomomorphism(format!(
                        "fails at {} * {}",
                        source.elem(i),
                        source.elem(j)
                    )));
                }
            }
        }
        Ok(GroupMorphism {
            source,
            target,
            map,
        })
    }

    pub fn source(&self) -> &Arc<FiniteGroup> {
        &self.source
    }

    pub fn target(&self) -> &Arc<FiniteGroup> {
        &self.target
    }

    pub fn apply_idx(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn kernel(&self) -> Vec<usize> {
        let e = self.target.identity();
        (0..self.map.len()).filter(|&i| self.map[i] == e).collect()
    }

    pub fn fiber(&self, x: usize) -> Vec<usize> {
        (0..self.map.len()).filter(|&i| self.map[i] == x).collect()
    }

    pub fn is_surjective(&self) -> bool {
        let hit: HashSet<usize> = self.map.iter().copied().collect();
        hit.len() == self.target.order()
    }
}

/// The fiber of one target element, partitioned into kernel-conjugacy
/// classes. Class order: by smallest member index; members sorted.
#[derive(Clone, Debug)]
pub struct FiberClassPartition {
    pub x: usize,
    pub fiber: Vec<usize>,
    pub classes: Vec<Vec<usize>>,
}

impl FiberClassPartition {
    pub fn kernel_order(&self) -> usize {
        self.fiber.len()
    }

    pub fn class_of(&self, elem_idx: usize) -> Option<usize> {
        self.classes.iter().position(|c| c.binary_search(&elem_idx).is_ok())
    }
}

/// Partition of the fiber over `x` into conjugation orbits of the kernel.
pub fn fiber_h_classes(pi: &GroupMorphism, x: usize) -> Result<FiberClassPartition> {
    if x >= pi.target().order() {
        return Err(GroupError::ElementNotInGroup);
    }
    if !pi.is_surjective() {
        return Err(GroupError::NotHomomorphism("projection not surjective".into()));
    }
    let g = pi.source();
    let kernel = pi.kernel();
    let fiber = pi.fiber(x);
    let fiber_set: HashSet<usize> = fiber.iter().copied().collect();
    let mut assigned: HashSet<usize> = HashSet::new();
    let mut classes = Vec::new();
    for &y in &fiber {
        if assigned.contains(&y) {
            continue;
        }
        let mut orbit: HashSet<usize> = HashSet::new();
        for &h in &kernel {
            let c = g.conjugate_idx(h, y);
            debug_assert!(fiber_set.contains(&c), "kernel conjugation left the fiber");
            orbit.insert(c);
        }
        let mut cls: Vec<usize> = orbit.into_iter().collect();
        cls.sort_unstable();
        for &c in &cls {
            assigned.insert(c);
        }
        classes.push(cls);
    }
    debug_assert_eq!(
        classes.iter().map(Vec::len).sum::<usize>(),
        fiber.len(),
        "classes must partition the fiber"
    );
    Ok(FiberClassPartition { x, fiber, classes })
}

/// Quotient by a normal subgroup. Returns the quotient (elements are
/// canonical coset representatives, sorted) and the projection.
pub fn quotient(
    g: &Arc<FiniteGroup>,
    sub: &[usize],
) -> Result<(Arc<FiniteGroup>, GroupMorphism)> {
    let mut sub: Vec<usize> = sub.to_vec();
    sub.sort_unstable();
    sub.dedup();
    if !g.is_subgroup(&sub)? {
        return Err(GroupError::NotNormal("not closed under the operation".into()));
    }
    if !g.is_normal(&sub)? {
        return Err(GroupError::NotNormal("not stable under conjugation".into()));
    }
    let n = g.order();
    let mut rep_of = vec![usize::MAX; n];
    for i in 0..n {
        if rep_of[i] != usize::MAX {
            continue;
        }
        let coset: Vec<usize> = sub.iter().map(|&h| g.op_idx(i, h)).collect();
        let rep = coset
            .iter()
            .copied()
            .min_by(|&a, &b| g.elem(a).cmp(g.elem(b)))
            .expect("coset nonempty");
        for &c in &coset {
            rep_of[c] = rep;
        }
    }
    let mut reps: Vec<usize> = rep_of.to_vec();
    reps.sort_unstable();
    reps.dedup();
    let mut q_elems: Vec<Elem> = reps.iter().map(|&r| g.elem(r).clone()).collect();
    q_elems.sort();
    let rep_table: HashMap<Elem, Elem> = (0..n)
        .map(|i| (g.elem(i).clone(), g.elem(rep_of[i]).clone()))
        .collect();
    let op = OpRule::Coset {
        inner: Box::new(g_op_clone(g)),
        rep: Arc::new(rep_table),
    };
    let identity = g.elem(rep_of[g.identity()]).clone();
    let gen_elems: Vec<Elem> = g
        .generators()
        .iter()
        .map(|&i| g.elem(rep_of[i]).clone())
        .collect();
    let q = FiniteGroup::construct(
        format!("{} / subgroup of order {}", g.label(), sub.len()),
        q_elems,
        op,
        identity,
        &gen_elems,
    )?;
    let map: Vec<usize> = (0..n)
        .map(|i| q.index_of(g.elem(rep_of[i])).expect("rep is in quotient"))
        .collect();
    let pi = GroupMorphism::new(Arc::clone(g), Arc::clone(&q), map)?;
    Ok((q, pi))
}

fn g_op_clone(g: &FiniteGroup) -> OpRule {
    g.op.clone()
}

/// Fibered product of two morphisms with a common target: pairs whose images
/// agree, with componentwise multiplication.
pub struct FiberedProduct {
    pub group: Arc<FiniteGroup>,
    pub left: GroupMorphism,
    pub right: GroupMorphism,
}

pub fn fibered_product(p1: &GroupMorphism, p2: &GroupMorphism) -> Result<FiberedProduct> {
    if p1.target().as_ref() != p2.target().as_ref() {
        return Err(GroupError::TargetMismatch);
    }
    let (g1, g2) = (p1.source(), p2.source());
    let mut bucket: HashMap<usize, Vec<usize>> = HashMap::new();
    for b in 0..g2.order() {
        bucket.entry(p2.apply_idx(b)).or_default().push(b);
    }
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for a in 0..g1.order() {
        if let Some(bs) = bucket.get(&p1.apply_idx(a)) {
            for &b in bs {
                pairs.push((a, b));
                if pairs.len() > SIZE_CAP {
                    return Err(GroupError::SizeCapExceeded);
                }
            }
        }
    }
    let mut elems: Vec<Elem> = pairs
        .iter()
        .map(|&(a, b)| {
            Elem::Pair(
                Box::new(g1.elem(a).clone()),
                Box::new(g2.elem(b).clone()),
            )
        })
        .collect();
    elems.sort();
    let op = OpRule::PairWise(Box::new(g_op_clone(g1)), Box::new(g_op_clone(g2)));
    let identity = Elem::Pair(
        Box::new(g1.elem(g1.identity()).clone()),
        Box::new(g2.elem(g2.identity()).clone()),
    );
    let group = FiniteGroup::construct(
        format!("{} x_Q {}", g1.label(), g2.label()),
        elems,
        op,
        identity,
        &[],
    )?;
    let mut lmap = Vec::with_capacity(group.order());
    let mut rmap = Vec::with_capacity(group.order());
    for e in group.elems() {
        let Elem::Pair(a, b) = e else {
            unreachable!("fibered product holds pairs")
        };
        lmap.push(g1.index_of(a).expect("component of left factor"));
        rmap.push(g2.index_of(b).expect("component of right factor"));
    }
    let left = GroupMorphism::new(Arc::clone(&group), Arc::clone(g1), lmap)?;
    let right = GroupMorphism::new(Arc::clone(&group), Arc::clone(g2), rmap)?;
    Ok(FiberedProduct { group, left, right })
}

/// Direct product, as the fibered product over the trivial group.
pub fn direct_product(g1: &Arc<FiniteGroup>, g2: &Arc<FiniteGroup>) -> Result<FiberedProduct> {
    let t = FiniteGroup::trivial();
    let m1 = GroupMorphism::new(Arc::clone(g1), Arc::clone(&t), vec![0; g1.order()])?;
    let m2 = GroupMorphism::new(Arc::clone(g2), Arc::clone(&t), vec![0; g2.order()])?;
    fibered_product(&m1, &m2)
}

/// A semidirect tower level: cyclic base of order d acting on i copies of
/// Z/p through a multiplicative character chi, given by the image of the
/// canonical base generator.
pub struct TowerLevel {
    pub group: Arc<FiniteGroup>,
    pub base: Arc<FiniteGroup>,
    pub projection: GroupMorphism,
    pub section: GroupMorphism,
    pub d: u32,
    pub p: u32,
    pub chi_gen: u32,
    pub level: usize,
}

fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

pub fn semidirect_tower(d: u32, p: u32, chi_gen: u32, level: usize) -> Result<TowerLevel> {
    if d == 0 {
        return Err(GroupError::MalformedGenerator("base order must be >= 1".into()));
    }
    if !is_prime_u64(p as u64) {
        return Err(GroupError::MalformedGenerator(format!("{p} is not prime")));
    }
    if chi_gen == 0 || chi_gen >= p {
        return Err(GroupError::MalformedGenerator(format!(
            "character value {chi_gen} outside 1..{p}"
        )));
    }
    if pow_mod(chi_gen as u64, d as u64, p as u64) != 1 {
        return Err(GroupError::NotHomomorphism(format!(
            "{chi_gen}^{d} != 1 mod {p}: not a character of the cyclic base"
        )));
    }
    let mut size: u128 = d as u128;
    for _ in 0..level {
        size *= p as u128;
        if size > SIZE_CAP as u128 {
            return Err(GroupError::SizeCapExceeded);
        }
    }
    let mut chi_pows = Vec::with_capacity(d as usize);
    let mut acc = 1u64;
    for _ in 0..d {
        chi_pows.push(acc as u32);
        acc = mul_mod(acc, chi_gen as u64, p as u64);
    }
    let chi_pows = Arc::new(chi_pows);
    let build = |lvl: usize| -> Result<Arc<FiniteGroup>> {
        let vectors = (p as u64).pow(lvl as u32);
        let mut elems = Vec::new();
        for a in 0..d {
            for code in 0..vectors {
                // decode base-p, most significant digit first
                let mut v = vec![0u32; lvl];
                let mut rem = code;
                for slot in v.iter_mut().rev() {
                    *slot = (rem % p as u64) as u32;
                    rem /= p as u64;
                }
                elems.push(Elem::Tower(a, v));
            }
        }
        let op = OpRule::Tower {
            d,
            p,
            chi_pows: Arc::clone(&chi_pows),
        };
        let mut gens = vec![Elem::Tower(1 % d, vec![0; lvl])];
        if lvl > 0 {
            for j in 0..lvl {
                let mut v = vec![0u32; lvl];
                v[j] = 1;
                gens.push(Elem::Tower(0, v));
            }
        }
        FiniteGroup::construct(
            format!("tower d={d} p={p} level {lvl}"),
            elems,
            op,
            Elem::Tower(0, vec![0; lvl]),
            &gens,
        )
    };
    let group = build(level)?;
    let base = build(0)?;
    let proj_map: Vec<usize> = group
        .elems()
        .iter()
        .map(|e| {
            let Elem::Tower(a, _) = e else {
                unreachable!("tower group holds tower elements")
            };
            base.index_of(&Elem::Tower(*a, vec![])).expect("base element")
        })
        .collect();
    let projection = GroupMorphism::new(Arc::clone(&group), Arc::clone(&base), proj_map)?;
    let sect_map: Vec<usize> = base
        .elems()
        .iter()
        .map(|e| {
            let Elem::Tower(a, _) = e else {
                unreachable!("tower base holds tower elements")
            };
            group
                .index_of(&Elem::Tower(*a, vec![0; level]))
                .expect("section lands in the tower")
        })
        .collect();
    let section = GroupMorphism::new(Arc::clone(&base), Arc::clone(&group), sect_map)?;
    Ok(TowerLevel {
        group,
        base,
        projection,
        section,
        d,
        p,
        chi_gen,
        level,
    })
}

/// Smallest normal subgroup containing the seed: close the full conjugate
/// set under multiplication. Returns sorted indices.
pub fn normal_closure(g: &Arc<FiniteGroup>, seed: &[usize]) -> Result<Vec<usize>> {
    let mut conj: HashSet<usize> = HashSet::new();
    for &s in seed {
        if s >= g.order() {
            return Err(GroupError::ElementNotInGroup);
        }
        for c in 0..g.order() {
            conj.insert(g.conjugate_idx(c, s));
        }
    }
    let gens: Vec<usize> = conj.into_iter().collect();
    g.subgroup_closure(&gens)
}
