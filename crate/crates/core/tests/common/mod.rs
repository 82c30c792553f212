//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

use dlpar_core::concept::Concept;
use dlpar_core::kb::KnowledgeBase;

/// Plain relational copy of a KB, evaluated one individual at a time
/// without bitsets or adjacency indexes.
pub struct NaiveModel {
    n: usize,
    members: HashSet<(u32, u32)>,
    roles: Vec<Vec<(u32, u32)>>,
    numeric: Vec<Vec<(u32, f64)>>,
    boolean: Vec<Vec<(u32, bool)>>,
    string: Vec<Vec<(u32, u32)>>,
}

impl NaiveModel {
    pub fn new(kb: &KnowledgeBase) -> Self {
        let mut members = HashSet::new();
        for c in 0..kb.num_classes() as u32 {
            for i in 0..kb.num_individuals() {
                if kb.class_members(c).contains(i) {
                    members.insert((c, i as u32));
                }
            }
        }
        NaiveModel {
            n: kb.num_individuals(),
            members,
            roles: (0..kb.num_roles() as u32).map(|r| kb.role_assertions(r).to_vec()).collect(),
            numeric: (0..kb.num_numeric_roles() as u32).map(|r| kb.numeric_assertions(r).to_vec()).collect(),
            boolean: (0..kb.num_boolean_roles() as u32).map(|r| kb.boolean_assertions(r).to_vec()).collect(),
            string: (0..kb.num_string_roles() as u32).map(|r| kb.string_assertions(r).to_vec()).collect(),
        }
    }

    fn fillers(&self, role: u32, inverse: bool, x: u32) -> Vec<u32> {
        self.roles[role as usize]
            .iter()
            .filter_map(|&(s, o)| {
                if inverse {
                    (o == x).then_some(s)
                } else {
                    (s == x).then_some(o)
                }
            })
            .collect()
    }

    pub fn holds(&self, c: &Concept, x: u32) -> bool {
        match c {
            Concept::Top => true,
            Concept::Atomic(a) => self.members.contains(&(*a, x)),
            Concept::NotAtomic(a) => !self.members.contains(&(*a, x)),
            Concept::Exists(r, ch) => self.fillers(r.role, r.inverse, x).iter().any(|&y| self.holds(ch, y)),
            Concept::Forall(r, ch) => self.fillers(r.role, r.inverse, x).iter().all(|&y| self.holds(ch, y)),
            Concept::MinCard(k, r, ch) => {
                self.fillers(r.role, r.inverse, x).iter().filter(|&&y| self.holds(ch, y)).count() >= *k as usize
            }
            Concept::MaxCard(k, r, ch) => {
                self.fillers(r.role, r.inverse, x).iter().filter(|&&y| self.holds(ch, y)).count() <= *k as usize
            }
            Concept::BoolEq(r, v) => self.boolean[*r as usize].iter().any(|&(s, b)| s == x && b == *v),
            Concept::NumGeq(r, v) => self.numeric[*r as usize].iter().any(|&(s, d)| s == x && d >= *v),
            Concept::NumLeq(r, v) => self.numeric[*r as usize].iter().any(|&(s, d)| s == x && d <= *v),
            Concept::StrEq(r, v) => self.string[*r as usize].iter().any(|&(s, w)| s == x && w == *v),
            Concept::And(cs) => cs.iter().all(|ch| self.holds(ch, x)),
            Concept::Or(cs) => cs.iter().any(|ch| self.holds(ch, x)),
        }
    }

    pub fn extension(&self, c: &Concept) -> Vec<usize> {
        (0..self.n as u32).filter(|&x| self.holds(c, x)).map(|x| x as usize).collect()
    }
}

/// Reflexive-transitive reachability over `n` nodes by Floyd-Warshall.
pub fn reachability(n: usize, edges: &[(u32, u32)]) -> Vec<Vec<bool>> {
    let mut reach = vec![vec![false; n]; n];
    for (i, row) in reach.iter_mut().enumerate() {
        row[i] = true;
    }
    for &(a, b) in edges {
        reach[a as usize][b as usize] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    reach
}

/// Maximum number of assertions sharing a subject.
pub fn max_out_degree(facts: &[(u32, u32)]) -> u32 {
    let mut count: HashMap<u32, u32> = HashMap::new();
    for &(s, _) in facts {
        *count.entry(s).or_default() += 1;
    }
    count.values().copied().max().unwrap_or(0)
}
