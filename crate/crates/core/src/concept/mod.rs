//! Class expressions in negation normal form.
//!
//! Conjunctions and disjunctions are kept flattened, deduplicated and
//! sorted under [`compare_canonical`], so two expressions that differ only
//! in operand order or nesting of the same connective have identical
//! canonical trees, encodings and hashes.

mod codec;
mod render;

use std::cmp::Ordering;
use std::hash::{Hash, Hasher};

use thiserror::Error;

use crate::kb::{ClassId, RoleId};

pub use codec::{decode, encode, encode_into, hash_concept, CanonicalHash, ConceptDecodeError};
pub use render::{parse_concept, render, ConceptParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RoleExpr {
    pub role: RoleId,
    pub inverse: bool,
}

impl RoleExpr {
    pub fn new(role: RoleId) -> Self {
        RoleExpr {
            role,
            inverse: false,
        }
    }

    pub fn inverse(role: RoleId) -> Self {
        RoleExpr {
            role,
            inverse: true,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Concept {
    Top,
    Atomic(ClassId),
    NotAtomic(ClassId),
    Exists(RoleExpr, Box<Concept>),
    Forall(RoleExpr, Box<Concept>),
    /// At least `n >= 1` fillers in the child.
    MinCard(u16, RoleExpr, Box<Concept>),
    /// At most `n` fillers in the child.
    MaxCard(u16, RoleExpr, Box<Concept>),
    BoolEq(RoleId, bool),
    NumGeq(RoleId, f64),
    NumLeq(RoleId, f64),
    /// String role id and value index.
    StrEq(RoleId, u32),
    And(Vec<Concept>),
    Or(Vec<Concept>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConceptError {
    #[error("NaN is not a valid numeric restriction value")]
    NaN,
    #[error("min cardinality must be at least 1")]
    ZeroMinCardinality,
    #[error("empty {0}")]
    EmptyConnective(&'static str),
}

impl Concept {
    pub fn exists(role: RoleExpr, child: Concept) -> Self {
        Concept::Exists(role, Box::new(child))
    }

    pub fn forall(role: RoleExpr, child: Concept) -> Self {
        Concept::Forall(role, Box::new(child))
    }

    pub fn min_card(n: u16, role: RoleExpr, child: Concept) -> Result<Self, ConceptError> {
        if n == 0 {
            return Err(ConceptError::ZeroMinCardinality);
        }
        Ok(Concept::MinCard(n, role, Box::new(child)))
    }

    pub fn max_card(n: u16, role: RoleExpr, child: Concept) -> Self {
        Concept::MaxCard(n, role, Box::new(child))
    }

    pub fn num_geq(role: RoleId, v: f64) -> Result<Self, ConceptError> {
        if v.is_nan() {
            return Err(ConceptError::NaN);
        }
        Ok(Concept::NumGeq(role, v))
    }

    pub fn num_leq(role: RoleId, v: f64) -> Result<Self, ConceptError> {
        if v.is_nan() {
            return Err(ConceptError::NaN);
        }
        Ok(Concept::NumLeq(role, v))
    }

    /// Canonical conjunction of `children`.
    pub fn and(children: Vec<Concept>) -> Result<Self, ConceptError> {
        if children.is_empty() {
            return Err(ConceptError::EmptyConnective("conjunction"));
        }
        Ok(canonicalize(&Concept::And(children)))
    }

    /// Canonical disjunction of `children`.
    pub fn or(children: Vec<Concept>) -> Result<Self, ConceptError> {
        if children.is_empty() {
            return Err(ConceptError::EmptyConnective("disjunction"));
        }
        Ok(canonicalize(&Concept::Or(children)))
    }

    /// Checks the structural constraints that the enum cannot express.
    pub fn validate(&self) -> Result<(), ConceptError> {
        match self {
            Concept::NumGeq(_, v) | Concept::NumLeq(_, v) if v.is_nan() => Err(ConceptError::NaN),
            Concept::MinCard(0, _, _) => Err(ConceptError::ZeroMinCardinality),
            Concept::And(cs) if cs.is_empty() => Err(ConceptError::EmptyConnective("conjunction")),
            Concept::Or(cs) if cs.is_empty() => Err(ConceptError::EmptyConnective("disjunction")),
            _ => self.children().try_for_each(Concept::validate),
        }
    }

    pub fn children(&self) -> impl Iterator<Item = &Concept> {
        let (one, many): (Option<&Concept>, &[Concept]) = match self {
            Concept::Exists(_, c)
            | Concept::Forall(_, c)
            | Concept::MinCard(_, _, c)
            | Concept::MaxCard(_, _, c) => (Some(c), &[]),
            Concept::And(cs) | Concept::Or(cs) => (None, cs),
            _ => (None, &[]),
        };
        one.into_iter().chain(many)
    }

    pub fn is_top(&self) -> bool {
        matches!(self, Concept::Top)
    }

    fn rank(&self) -> u8 {
        match self {
            Concept::Top => 0,
            Concept::Atomic(_) => 1,
            Concept::NotAtomic(_) => 2,
            Concept::Exists(..) => 3,
            Concept::Forall(..) => 4,
            Concept::MinCard(..) => 5,
            Concept::MaxCard(..) => 6,
            Concept::BoolEq(..) => 7,
            Concept::NumGeq(..) => 8,
            Concept::NumLeq(..) => 9,
            Concept::StrEq(..) => 10,
            Concept::And(_) => 11,
            Concept::Or(_) => 12,
        }
    }

    /// Nesting depth; atoms have depth 1.
    pub fn depth(&self) -> usize {
        1 + self.children().map(Concept::depth).max().unwrap_or(0)
    }
}

/// Total order on concepts: constructor rank, then ids and numbers, then
/// children lexicographically. Floats compare by `f64::total_cmp`, which
/// agrees with bitwise equality.
pub fn compare_canonical(a: &Concept, b: &Concept) -> Ordering {
    use Concept::*;
    match (a, b) {
        (Top, Top) => Ordering::Equal,
        (Atomic(x), Atomic(y)) | (NotAtomic(x), NotAtomic(y)) => x.cmp(y),
        (Exists(r, c), Exists(s, d)) | (Forall(r, c), Forall(s, d)) => {
            r.cmp(s).then_with(|| compare_canonical(c, d))
        }
        (MinCard(n, r, c), MinCard(m, s, d)) | (MaxCard(n, r, c), MaxCard(m, s, d)) => n
            .cmp(m)
            .then(r.cmp(s))
            .then_with(|| compare_canonical(c, d)),
        (BoolEq(r, x), BoolEq(s, y)) => r.cmp(s).then(x.cmp(y)),
        (NumGeq(r, x), NumGeq(s, y)) | (NumLeq(r, x), NumLeq(s, y)) => {
            r.cmp(s).then(x.total_cmp(y))
        }
        (StrEq(r, x), StrEq(s, y)) => r.cmp(s).then(x.cmp(y)),
        (And(xs), And(ys)) | (Or(xs), Or(ys)) => {
            for (x, y) in xs.iter().zip(ys) {
                let o = compare_canonical(x, y);
                if o != Ordering::Equal {
                    return o;
                }
            }
            xs.len().cmp(&ys.len())
        }
        _ => a.rank().cmp(&b.rank()),
    }
}

impl PartialEq for Concept {
    fn eq(&self, other: &Self) -> bool {
        compare_canonical(self, other) == Ordering::Equal
    }
}

impl Eq for Concept {}

impl PartialOrd for Concept {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Concept {
    fn cmp(&self, other: &Self) -> Ordering {
        compare_canonical(self, other)
    }
}

impl Hash for Concept {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(hash_concept(self).0);
    }
}

/// Flattens, deduplicates and sorts every conjunction and disjunction.
/// Single-operand connectives collapse to the operand.
pub fn canonicalize(c: &Concept) -> Concept {
    match c {
        Concept::Exists(r, child) => Concept::Exists(*r, Box::new(canonicalize(child))),
        Concept::Forall(r, child) => Concept::Forall(*r, Box::new(canonicalize(child))),
        Concept::MinCard(n, r, child) => Concept::MinCard(*n, *r, Box::new(canonicalize(child))),
        Concept::MaxCard(n, r, child) => Concept::MaxCard(*n, *r, Box::new(canonicalize(child))),
        Concept::And(children) => connective(children, true),
        Concept::Or(children) => connective(children, false),
        atom => atom.clone(),
    }
}

fn connective(children: &[Concept], is_and: bool) -> Concept {
    let mut flat = Vec::with_capacity(children.len());
    for child in children {
        match (canonicalize(child), is_and) {
            (Concept::And(grand), true) | (Concept::Or(grand), false) => flat.extend(grand),
            (other, _) => flat.push(other),
        }
    }
    flat.sort_unstable_by(compare_canonical);
    flat.dedup();
    match flat.len() {
        // An empty conjunction is the top concept; an empty disjunction has
        // no representation and is left for `validate` to reject.
        0 if is_and => Concept::Top,
        1 => flat.pop().unwrap(),
        _ if is_and => Concept::And(flat),
        _ => Concept::Or(flat),
    }
}

/// True when `c` is already in canonical form.
pub fn is_canonical(c: &Concept) -> bool {
    match c {
        Concept::And(cs) | Concept::Or(cs) => {
            let is_and = matches!(c, Concept::And(_));
            cs.len() >= 2
                && cs.windows(2).all(|w| compare_canonical(&w[0], &w[1]) == Ordering::Less)
                && cs.iter().all(|ch| {
                    !matches!((ch, is_and), (Concept::And(_), true) | (Concept::Or(_), false))
                        && is_canonical(ch)
                })
        }
        _ => c.children().all(is_canonical),
    }
}

/// Syntactic length: every constructor and symbol counts one.
pub fn concept_length(c: &Concept) -> usize {
    fn role(r: &RoleExpr) -> usize {
        r.inverse as usize
    }
    match c {
        Concept::Top
        | Concept::Atomic(_)
        | Concept::BoolEq(..)
        | Concept::NumGeq(..)
        | Concept::NumLeq(..)
        | Concept::StrEq(..) => 1,
        Concept::NotAtomic(_) => 2,
        Concept::Exists(r, child) | Concept::Forall(r, child) => 2 + role(r) + concept_length(child),
        Concept::MinCard(_, r, child) | Concept::MaxCard(_, r, child) => {
            3 + role(r) + concept_length(child)
        }
        Concept::And(cs) | Concept::Or(cs) => {
            cs.iter().map(concept_length).sum::<usize>() + cs.len().saturating_sub(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Concept::*;

    fn ex(r: u32, c: Concept) -> Concept {
        Concept::exists(RoleExpr::new(r), c)
    }

    #[test]
    fn conjunction_operands_are_ordered() {
        let c = canonicalize(&And(vec![Atomic(2), Atomic(1)]));
        assert_eq!(c, And(vec![Atomic(1), Atomic(2)]));
    }

    #[test]
    fn idempotent_conjunction_collapses() {
        assert_eq!(canonicalize(&And(vec![Atomic(0), Atomic(0)])), Atomic(0));
    }

    #[test]
    fn nested_disjunction_is_flattened() {
        let c = canonicalize(&Or(vec![Or(vec![Atomic(1), Atomic(0)]), Atomic(2)]));
        assert_eq!(c, Or(vec![Atomic(0), Atomic(1), Atomic(2)]));
        assert!(is_canonical(&c));
        // Different connectives are not merged.
        let mixed = canonicalize(&And(vec![Or(vec![Atomic(1), Atomic(0)]), Atomic(2)]));
        assert_eq!(mixed, And(vec![Atomic(2), Or(vec![Atomic(0), Atomic(1)])]));
    }

    #[test]
    fn tag_rank_order() {
        assert_eq!(compare_canonical(&Atomic(0), &Atomic(1)), Ordering::Less);
        assert_eq!(compare_canonical(&Atomic(5), &ex(0, Top)), Ordering::Less);
        assert_eq!(compare_canonical(&StrEq(0, 0), &And(vec![Top, Top])), Ordering::Less);
        assert_eq!(
            compare_canonical(&And(vec![Top, Atomic(0)]), &Or(vec![Top, Atomic(0)])),
            Ordering::Less
        );
    }

    #[test]
    fn lengths() {
        assert_eq!(concept_length(&Atomic(0)), 1);
        assert_eq!(concept_length(&ex(0, Top)), 3);
        assert_eq!(concept_length(&And(vec![Atomic(0), ex(0, Atomic(1))])), 5);
        assert_eq!(concept_length(&NotAtomic(0)), 2);
        assert_eq!(
            concept_length(&Concept::exists(RoleExpr::inverse(0), Top)),
            4
        );
        assert_eq!(
            concept_length(&Concept::min_card(2, RoleExpr::new(0), Top).unwrap()),
            4
        );
    }

    #[test]
    fn construction_errors() {
        assert_eq!(Concept::num_geq(0, f64::NAN), Err(ConceptError::NaN));
        assert_eq!(
            Concept::min_card(0, RoleExpr::new(0), Top),
            Err(ConceptError::ZeroMinCardinality)
        );
        assert!(Concept::and(vec![]).is_err());
        assert_eq!(Concept::and(vec![Atomic(3)]).unwrap(), Atomic(3));
    }
}
