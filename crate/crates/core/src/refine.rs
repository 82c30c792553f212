//! Downward refinement operator.
//!
//! Rules, applied to a canonical concept `c` under a length bound:
//!
//! * `Thing` → top-level classes, negated leaf classes, `r some Thing`,
//!   `r only Thing` (also for inverse roles), every concrete-role
//!   restriction in the [`MbSet`], `r min 2 Thing` / `r max (m-1) Thing`
//!   when role `r` has up to `m >= 2` fillers, and pairwise disjunctions of
//!   those.
//! * `A` → direct subclasses of `A`, and `A and X` for `X` in ρ(Thing).
//! * `not A` → `not B` for each direct superclass `B` of `A`.
//! * `r some C` → refine `C`, direct subroles of `r`, `r min 2 C`.
//! * `r only C` → refine `C`.
//! * `r min n C` → raise `n` up to the filler bound, refine `C`.
//! * `r max n C` → lower `n` down to 0, refine `C`.
//! * `d >= v` / `d <= v` → move to the next boundary (up / down).
//! * conjunction → refine one operand, or append a conjunct from ρ(Thing).
//! * disjunction → refine one operand.
//!
//! Output is canonical, length-bounded, sorted and duplicate-free.

use crate::concept::{canonicalize, compare_canonical, concept_length, Concept, RoleExpr};
use crate::kb::{KbStatistics, KnowledgeBase};

/// Concrete-role restrictions available to ρ(Thing).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MbSet {
    pub restrictions: Vec<Concept>,
}

pub fn build_mb(kb: &KnowledgeBase, stats: &KbStatistics) -> MbSet {
    let mut restrictions = Vec::new();
    for b in 0..kb.num_boolean_roles() as u32 {
        restrictions.push(Concept::BoolEq(b, true));
        restrictions.push(Concept::BoolEq(b, false));
    }
    for (d, bounds) in stats.numeric_boundaries.iter().enumerate() {
        restrictions.extend(bounds.iter().map(|&v| Concept::NumGeq(d as u32, v)));
        restrictions.extend(bounds.iter().map(|&v| Concept::NumLeq(d as u32, v)));
    }
    for (sr, values) in stats.string_domains.iter().enumerate() {
        restrictions.extend(values.iter().map(|&v| Concept::StrEq(sr as u32, v)));
    }
    MbSet { restrictions }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementConfig {
    /// Per-role cardinality cap; normally `KbStatistics::max_fillers`.
    pub max_cardinality: Vec<u32>,
    pub use_inverse_roles: bool,
    pub use_cardinality: bool,
    pub use_disjunction: bool,
    pub use_negation: bool,
    pub max_length: usize,
}

impl RefinementConfig {
    pub fn new(stats: &KbStatistics, max_length: usize) -> Self {
        RefinementConfig {
            max_cardinality: stats.max_fillers.clone(),
            use_inverse_roles: true,
            use_cardinality: true,
            use_disjunction: true,
            use_negation: true,
            max_length: max_length.max(1),
        }
    }
}

/// The refinement operator bound to one knowledge base.
#[derive(Debug, Clone)]
pub struct Refiner<'a> {
    stats: &'a KbStatistics,
    cfg: &'a RefinementConfig,
    /// Filler bound for inverse roles (max in-degree).
    inverse_max: Vec<u32>,
    /// Non-disjunctive ρ(Thing) candidates with their lengths, canonical order.
    top_atoms: Vec<(Concept, usize)>,
}

impl<'a> Refiner<'a> {
    pub fn new(
        kb: &KnowledgeBase,
        stats: &'a KbStatistics,
        mb: &MbSet,
        cfg: &'a RefinementConfig,
    ) -> Self {
        let inverse_max = (0..kb.num_roles() as u32)
            .map(|r| kb.adjacency(r, true).max_degree() as u32)
            .collect();
        let mut r = Refiner {
            stats,
            cfg,
            inverse_max,
            top_atoms: Vec::new(),
        };
        r.top_atoms = r.build_top_atoms(mb);
        r
    }

    fn card_cap(&self, role: &RoleExpr) -> u32 {
        let caps = if role.inverse {
            &self.inverse_max
        } else {
            &self.cfg.max_cardinality
        };
        caps.get(role.role as usize).copied().unwrap_or(0)
    }

    fn role_exprs(&self) -> Vec<RoleExpr> {
        let n = self.stats.max_fillers.len() as u32;
        let mut out: Vec<RoleExpr> = (0..n).map(RoleExpr::new).collect();
        if self.cfg.use_inverse_roles {
            out.extend((0..n).map(RoleExpr::inverse));
        }
        out
    }

    fn build_top_atoms(&self, mb: &MbSet) -> Vec<(Concept, usize)> {
        let mut out: Vec<Concept> = Vec::new();
        out.extend(self.stats.top_level_classes.iter().map(|&c| Concept::Atomic(c)));
        if self.cfg.use_negation {
            out.extend(self.stats.leaf_classes.iter().map(|&c| Concept::NotAtomic(c)));
        }
        for r in self.role_exprs() {
            out.push(Concept::exists(r, Concept::Top));
            out.push(Concept::forall(r, Concept::Top));
            let cap = self.card_cap(&r);
            if self.cfg.use_cardinality && cap >= 2 {
                out.push(Concept::MinCard(2, r, Box::new(Concept::Top)));
                out.push(Concept::max_card((cap - 1).min(u16::MAX as u32) as u16, r, Concept::Top));
            }
        }
        out.extend(mb.restrictions.iter().cloned());
        out.sort_unstable_by(compare_canonical);
        out.dedup();
        out.into_iter()
            .map(|c| {
                let len = concept_length(&c);
                (c, len)
            })
            .collect()
    }

    /// Pairwise disjunctions of ρ(Thing) members within `bound`.
    pub fn refine_top_levels(&self, bound: usize) -> Vec<Concept> {
        if !self.cfg.use_disjunction {
            return Vec::new();
        }
        let mut out = Vec::new();
        for (i, (a, la)) in self.top_atoms.iter().enumerate() {
            for (b, lb) in &self.top_atoms[i + 1..] {
                if la + lb + 1 <= bound {
                    out.push(Concept::Or(vec![a.clone(), b.clone()]));
                }
            }
        }
        out
    }

    /// ρ(Thing) under `bound`, disjunctions included.
    fn top_refinements(&self, bound: usize, out: &mut Vec<Concept>) {
        out.extend(
            self.top_atoms
                .iter()
                .filter(|(_, len)| *len <= bound)
                .map(|(c, _)| c.clone()),
        );
        out.extend(self.refine_top_levels(bound));
    }

    /// All refinements of canonical `c` with length at most `bound`.
    pub fn refine(&self, c: &Concept, bound: usize) -> Vec<Concept> {
        let mut raw = Vec::new();
        self.refine_raw(c, bound, &mut raw);
        let mut out: Vec<Concept> = raw
            .iter()
            .map(canonicalize)
            .filter(|r| concept_length(r) <= bound && r != c)
            .collect();
        out.sort_unstable_by(compare_canonical);
        out.dedup();
        out
    }

    fn refine_raw(&self, c: &Concept, bound: usize, out: &mut Vec<Concept>) {
        let len = concept_length(c);
        match c {
            Concept::Top => self.top_refinements(bound, out),
            Concept::Atomic(a) => {
                out.extend(self.stats.subclasses[*a as usize].iter().map(|&s| Concept::Atomic(s)));
                if bound > len + 1 {
                    let mut tops = Vec::new();
                    self.top_refinements(bound - len - 1, &mut tops);
                    out.extend(
                        tops.into_iter()
                            .filter(|x| x != c)
                            .map(|x| Concept::And(vec![c.clone(), x])),
                    );
                }
            }
            Concept::NotAtomic(a) => {
                out.extend(
                    self.stats.superclasses[*a as usize]
                        .iter()
                        .map(|&s| Concept::NotAtomic(s)),
                );
            }
            Concept::Exists(r, child) => {
                let overhead = len - concept_length(child);
                for sub in self.refine(child, bound.saturating_sub(overhead)) {
                    out.push(Concept::exists(*r, sub));
                }
                for &sub_role in &self.stats.subroles[r.role as usize] {
                    let r2 = RoleExpr {
                        role: sub_role,
                        inverse: r.inverse,
                    };
                    out.push(Concept::Exists(r2, child.clone()));
                }
                if self.cfg.use_cardinality && self.card_cap(r) >= 2 {
                    out.push(Concept::MinCard(2, *r, child.clone()));
                }
            }
            Concept::Forall(r, child) => {
                let overhead = len - concept_length(child);
                for sub in self.refine(child, bound.saturating_sub(overhead)) {
                    out.push(Concept::forall(*r, sub));
                }
            }
            Concept::MinCard(n, r, child) => {
                if (*n as u32) < self.card_cap(r) {
                    out.push(Concept::MinCard(n + 1, *r, child.clone()));
                }
                let overhead = len - concept_length(child);
                for sub in self.refine(child, bound.saturating_sub(overhead)) {
                    out.push(Concept::MinCard(*n, *r, Box::new(sub)));
                }
            }
            Concept::MaxCard(n, r, child) => {
                if *n > 0 {
                    out.push(Concept::MaxCard(n - 1, *r, child.clone()));
                }
                let overhead = len - concept_length(child);
                for sub in self.refine(child, bound.saturating_sub(overhead)) {
                    out.push(Concept::MaxCard(*n, *r, Box::new(sub)));
                }
            }
            Concept::NumGeq(d, v) => {
                let bounds = &self.stats.numeric_boundaries[*d as usize];
                if let Some(&next) = bounds.iter().find(|&&b| b > *v) {
                    out.push(Concept::NumGeq(*d, next));
                }
            }
            Concept::NumLeq(d, v) => {
                let bounds = &self.stats.numeric_boundaries[*d as usize];
                if let Some(&prev) = bounds.iter().rev().find(|&&b| b < *v) {
                    out.push(Concept::NumLeq(*d, prev));
                }
            }
            Concept::BoolEq(..) | Concept::StrEq(..) => {}
            Concept::And(cs) | Concept::Or(cs) => {
                let is_and = matches!(c, Concept::And(_));
                for (i, child) in cs.iter().enumerate() {
                    let rest = len - concept_length(child);
                    for sub in self.refine(child, bound.saturating_sub(rest)) {
                        let mut next = cs.clone();
                        next[i] = sub;
                        out.push(if is_and {
                            Concept::And(next)
                        } else {
                            Concept::Or(next)
                        });
                    }
                }
                if is_and && bound > len + 1 {
                    let mut tops = Vec::new();
                    self.top_refinements(bound - len - 1, &mut tops);
                    for x in tops {
                        if !cs.contains(&x) {
                            let mut next = cs.clone();
                            next.push(x);
                            out.push(Concept::And(next));
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{compute_statistics, parse_kb};

    fn setup(text: &str) -> (KnowledgeBase, KbStatistics) {
        let (_, kb) = parse_kb(text).unwrap();
        let kb = kb.materialize().unwrap();
        let stats = compute_statistics(&kb);
        (kb, stats)
    }

    #[test]
    fn mb_set_contents() {
        let (kb, stats) = setup(
            "strrole sr\nnumrole d\nindividual x\nindividual y\n\
             strfact sr x \"val1\"\nstrfact sr y \"val2\"\nstrfact sr x \"val3\"\n\
             numfact d x 3.0\nnumfact d y 1.0\n",
        );
        let mb = build_mb(&kb, &stats);
        assert_eq!(
            mb.restrictions,
            vec![
                Concept::NumGeq(0, 1.0),
                Concept::NumGeq(0, 3.0),
                Concept::NumLeq(0, 1.0),
                Concept::NumLeq(0, 3.0),
                Concept::StrEq(0, 0),
                Concept::StrEq(0, 1),
                Concept::StrEq(0, 2),
            ]
        );
        let (kb, stats) = setup("class A\nrole r\nindividual x\n");
        assert!(build_mb(&kb, &stats).restrictions.is_empty());
    }

    #[test]
    fn subclass_descent() {
        let (kb, stats) = setup("class B\nclass C\nsubclass C B\n");
        let mb = build_mb(&kb, &stats);
        let cfg = RefinementConfig::new(&stats, 5);
        let r = Refiner::new(&kb, &stats, &mb, &cfg);
        let out = r.refine(&Concept::Atomic(0), 1);
        assert_eq!(out, vec![Concept::Atomic(1)]);
    }

    #[test]
    fn disjunction_toggle() {
        let (kb, stats) = setup("class A\nclass B\n");
        let mb = build_mb(&kb, &stats);
        let mut cfg = RefinementConfig::new(&stats, 5);
        let with = Refiner::new(&kb, &stats, &mb, &cfg).refine(&Concept::Top, 3);
        assert!(with.contains(&Concept::Or(vec![Concept::Atomic(0), Concept::Atomic(1)])));
        cfg.use_disjunction = false;
        let r = Refiner::new(&kb, &stats, &mb, &cfg);
        let without = r.refine(&Concept::Top, 3);
        assert!(!without.iter().any(|c| matches!(c, Concept::Or(_))));
        assert!(r.refine_top_levels(10).is_empty());
    }

    #[test]
    fn numeric_boundaries_step() {
        let (kb, stats) = setup(
            "numrole d\nindividual x\nindividual y\nindividual z\n\
             numfact d x 1.0\nnumfact d y 2.0\nnumfact d z 3.0\n",
        );
        let mb = build_mb(&kb, &stats);
        let cfg = RefinementConfig::new(&stats, 5);
        let r = Refiner::new(&kb, &stats, &mb, &cfg);
        assert_eq!(r.refine(&Concept::NumGeq(0, 1.0), 1), vec![Concept::NumGeq(0, 2.0)]);
        assert_eq!(r.refine(&Concept::NumLeq(0, 1.0), 1), vec![]);
        assert_eq!(r.refine(&Concept::NumLeq(0, 3.0), 1), vec![Concept::NumLeq(0, 2.0)]);
    }
}
