//! Knowledge base: symbol interning, the columnar assertion tables,
//! hierarchy-closure materialization and dataset statistics.
//!
//! Class membership is stored as one bitset per class over all individuals;
//! role and concrete-role assertions are sorted `(subject, value)` tables.
//! Once materialized, a [`KnowledgeBase`] is immutable and shared read-only
//! by every evaluator thread.

mod binary;
mod parse;
mod stats;

use std::collections::HashMap;

use thiserror::Error;

use crate::bitset::Bitset;
use crate::codec::DecodeError;

pub use binary::{deserialize_kb, serialize_kb, KB_MAGIC, KB_VERSION};
pub use parse::{parse_examples, parse_kb};
pub use stats::{compute_statistics, KbStatistics};

pub type ClassId = u32;
pub type RoleId = u32;
pub type IndividualId = u32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KbError {
    #[error("line {line}: syntax error at `{token}`: {message}")]
    Syntax {
        line: usize,
        token: String,
        message: String,
    },
    #[error("line {line}: undeclared {kind} `{name}`")]
    Undeclared {
        line: usize,
        kind: SymbolKind,
        name: String,
    },
    #[error("line {line}: `{name}` already declared as {existing}, cannot redeclare as {requested}")]
    TypeClash {
        line: usize,
        name: String,
        existing: SymbolKind,
        requested: SymbolKind,
    },
    #[error("line {line}: unknown individual `{name}`")]
    UnknownIndividual { line: usize, name: String },
    #[error("line {line}: conflicting example `{name}` is listed as both positive and negative")]
    ConflictingExample { line: usize, name: String },
    #[error("no positive examples")]
    NoPositives,
    #[error("no negative examples")]
    NoNegatives,
    #[error("cycle in {kind} hierarchy: {}", render_cycle(.cycle))]
    Cycle { kind: SymbolKind, cycle: Vec<u32> },
    #[error("not a knowledge base image (bad magic)")]
    BadMagic,
    #[error("unsupported knowledge base image version {found} (expected {expected})")]
    VersionMismatch { found: u16, expected: u16 },
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("malformed knowledge base image: {0}")]
    Decode(#[from] DecodeError),
}

fn render_cycle(cycle: &[u32]) -> String {
    cycle
        .iter()
        .map(|id| format!("#{id}"))
        .collect::<Vec<_>>()
        .join(" -> ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SymbolKind {
    Class,
    Role,
    NumericRole,
    BooleanRole,
    StringRole,
    Individual,
}

impl std::fmt::Display for SymbolKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SymbolKind::Class => "class",
            SymbolKind::Role => "role",
            SymbolKind::NumericRole => "numeric role",
            SymbolKind::BooleanRole => "boolean role",
            SymbolKind::StringRole => "string role",
            SymbolKind::Individual => "individual",
        })
    }
}

/// Dense name <-> id interning for one namespace.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Interner {
    names: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Interner {
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_owned());
        self.ids.insert(name.to_owned(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SymbolTable {
    pub classes: Interner,
    pub roles: Interner,
    pub numeric_roles: Interner,
    pub boolean_roles: Interner,
    pub string_roles: Interner,
    pub individuals: Interner,
    /// One value table per string role, indexed by string-role id.
    pub string_values: Vec<Interner>,
}

impl SymbolTable {
    pub fn kind_of(&self, name: &str) -> Option<SymbolKind> {
        [
            (&self.classes, SymbolKind::Class),
            (&self.roles, SymbolKind::Role),
            (&self.numeric_roles, SymbolKind::NumericRole),
            (&self.boolean_roles, SymbolKind::BooleanRole),
            (&self.string_roles, SymbolKind::StringRole),
            (&self.individuals, SymbolKind::Individual),
        ]
        .into_iter()
        .find_map(|(ns, kind)| ns.id(name).map(|_| kind))
    }

    pub fn namespace(&self, kind: SymbolKind) -> &Interner {
        match kind {
            SymbolKind::Class => &self.classes,
            SymbolKind::Role => &self.roles,
            SymbolKind::NumericRole => &self.numeric_roles,
            SymbolKind::BooleanRole => &self.boolean_roles,
            SymbolKind::StringRole => &self.string_roles,
            SymbolKind::Individual => &self.individuals,
        }
    }

    pub fn string_value(&self, role: RoleId, val_index: u32) -> Option<&str> {
        self.string_values.get(role as usize)?.name(val_index)
    }

    /// Renders a hierarchy cycle reported by [`KnowledgeBase::materialize`].
    pub fn describe_cycle(&self, kind: SymbolKind, cycle: &[u32]) -> String {
        let ns = self.namespace(kind);
        cycle
            .iter()
            .map(|&id| ns.name(id).unwrap_or("?").to_owned())
            .collect::<Vec<_>>()
            .join(" -> ")
    }
}

/// Compressed adjacency: `targets[offsets[s]..offsets[s + 1]]` are the
/// fillers of subject `s`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Adjacency {
    offsets: Vec<u32>,
    targets: Vec<u32>,
}

impl Adjacency {
    fn build(num_individuals: usize, pairs: impl Iterator<Item = (u32, u32)> + Clone) -> Self {
        let mut offsets = vec![0u32; num_individuals + 1];
        for (s, _) in pairs.clone() {
            offsets[s as usize + 1] += 1;
        }
        for i in 0..num_individuals {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut targets = vec![0u32; offsets[num_individuals] as usize];
        for (s, o) in pairs {
            targets[fill[s as usize] as usize] = o;
            fill[s as usize] += 1;
        }
        for s in 0..num_individuals {
            targets[offsets[s] as usize..offsets[s + 1] as usize].sort_unstable();
        }
        Adjacency { offsets, targets }
    }

    #[inline]
    pub fn fillers(&self, subject: usize) -> &[u32] {
        &self.targets[self.offsets[subject] as usize..self.offsets[subject + 1] as usize]
    }

    pub fn max_degree(&self) -> usize {
        self.offsets
            .windows(2)
            .map(|w| (w[1] - w[0]) as usize)
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KnowledgeBase {
    num_individuals: usize,
    class_members: Vec<Bitset>,
    subclass_edges: Vec<(ClassId, ClassId)>,
    role_assertions: Vec<Vec<(IndividualId, IndividualId)>>,
    subrole_edges: Vec<(RoleId, RoleId)>,
    numeric_assertions: Vec<Vec<(IndividualId, f64)>>,
    boolean_assertions: Vec<Vec<(IndividualId, bool)>>,
    string_assertions: Vec<Vec<(IndividualId, u32)>>,
    materialized: bool,
    // Derived from role_assertions; rebuilt whenever those change.
    successors: Vec<Adjacency>,
    predecessors: Vec<Adjacency>,
}

/// Raw tables handed to [`KnowledgeBase::from_tables`]; assertion lists may
/// be unsorted and contain duplicates.
#[derive(Debug, Clone, Default)]
pub struct KbTables {
    pub num_individuals: usize,
    pub class_members: Vec<Vec<IndividualId>>,
    pub subclass_edges: Vec<(ClassId, ClassId)>,
    pub role_assertions: Vec<Vec<(IndividualId, IndividualId)>>,
    pub subrole_edges: Vec<(RoleId, RoleId)>,
    pub numeric_assertions: Vec<Vec<(IndividualId, f64)>>,
    pub boolean_assertions: Vec<Vec<(IndividualId, bool)>>,
    pub string_assertions: Vec<Vec<(IndividualId, u32)>>,
    pub materialized: bool,
}

fn dedup_pairs<T: Ord + Copy>(v: &mut Vec<(u32, T)>) {
    v.sort_unstable();
    v.dedup();
}

fn dedup_numeric(v: &mut Vec<(u32, f64)>) {
    v.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    v.dedup_by(|a, b| a.0 == b.0 && a.1.to_bits() == b.1.to_bits());
}

impl KnowledgeBase {
    /// Normalizes the tables (sorted, deduplicated) and builds the role
    /// indexes. Ids are trusted; callers validate them against a symbol table.
    pub fn from_tables(mut t: KbTables) -> Self {
        let n = t.num_individuals;
        let class_members = t
            .class_members
            .iter()
            .map(|ids| Bitset::from_indices(n, ids.iter().map(|&i| i as usize)))
            .collect();
        t.subclass_edges.sort_unstable();
        t.subclass_edges.dedup();
        t.subrole_edges.sort_unstable();
        t.subrole_edges.dedup();
        t.role_assertions.iter_mut().for_each(dedup_pairs);
        t.boolean_assertions.iter_mut().for_each(dedup_pairs);
        t.string_assertions.iter_mut().for_each(dedup_pairs);
        t.numeric_assertions.iter_mut().for_each(dedup_numeric);
        let mut kb = KnowledgeBase {
            num_individuals: n,
            class_members,
            subclass_edges: t.subclass_edges,
            role_assertions: t.role_assertions,
            subrole_edges: t.subrole_edges,
            numeric_assertions: t.numeric_assertions,
            boolean_assertions: t.boolean_assertions,
            string_assertions: t.string_assertions,
            materialized: t.materialized,
            successors: Vec::new(),
            predecessors: Vec::new(),
        };
        kb.rebuild_indexes();
        kb
    }

    fn rebuild_indexes(&mut self) {
        let n = self.num_individuals;
        self.successors = self
            .role_assertions
            .iter()
            .map(|a| Adjacency::build(n, a.iter().copied()))
            .collect();
        self.predecessors = self
            .role_assertions
            .iter()
            .map(|a| Adjacency::build(n, a.iter().map(|&(s, o)| (o, s))))
            .collect();
    }

    pub fn num_individuals(&self) -> usize {
        self.num_individuals
    }

    pub fn num_classes(&self) -> usize {
        self.class_members.len()
    }

    pub fn num_roles(&self) -> usize {
        self.role_assertions.len()
    }

    pub fn num_numeric_roles(&self) -> usize {
        self.numeric_assertions.len()
    }

    pub fn num_boolean_roles(&self) -> usize {
        self.boolean_assertions.len()
    }

    pub fn num_string_roles(&self) -> usize {
        self.string_assertions.len()
    }

    pub fn is_materialized(&self) -> bool {
        self.materialized
    }

    pub fn class_members(&self, class: ClassId) -> &Bitset {
        &self.class_members[class as usize]
    }

    pub fn subclass_edges(&self) -> &[(ClassId, ClassId)] {
        &self.subclass_edges
    }

    pub fn subrole_edges(&self) -> &[(RoleId, RoleId)] {
        &self.subrole_edges
    }

    pub fn role_assertions(&self, role: RoleId) -> &[(IndividualId, IndividualId)] {
        &self.role_assertions[role as usize]
    }

    pub fn numeric_assertions(&self, role: RoleId) -> &[(IndividualId, f64)] {
        &self.numeric_assertions[role as usize]
    }

    pub fn boolean_assertions(&self, role: RoleId) -> &[(IndividualId, bool)] {
        &self.boolean_assertions[role as usize]
    }

    pub fn string_assertions(&self, role: RoleId) -> &[(IndividualId, u32)] {
        &self.string_assertions[role as usize]
    }

    /// Forward (`inverse == false`) or backward adjacency of a role.
    pub fn adjacency(&self, role: RoleId, inverse: bool) -> &Adjacency {
        if inverse {
            &self.predecessors[role as usize]
        } else {
            &self.successors[role as usize]
        }
    }

    pub fn class_assertion_count(&self) -> usize {
        self.class_members.iter().map(Bitset::count).sum()
    }

    pub fn role_assertion_count(&self) -> usize {
        self.role_assertions.iter().map(Vec::len).sum()
    }

    pub fn concrete_assertion_count(&self) -> usize {
        self.numeric_assertions.iter().map(Vec::len).sum::<usize>()
            + self.boolean_assertions.iter().map(Vec::len).sum::<usize>()
            + self.string_assertions.iter().map(Vec::len).sum::<usize>()
    }

    /// Propagates class membership up the transitive subclass closure and
    /// role assertions up the transitive subrole closure. A second call is a
    /// no-op.
    pub fn materialize(mut self) -> Result<Self, KbError> {
        if self.materialized {
            return Ok(self);
        }
        let class_order =
            topo_order(self.class_members.len(), &self.subclass_edges, SymbolKind::Class)?;
        let role_order = topo_order(self.role_assertions.len(), &self.subrole_edges, SymbolKind::Role)?;

        // Subs come before their supers in `order`, so a single pass over
        // the order pushes everything all the way up.
        let class_supers = direct_supers(self.class_members.len(), &self.subclass_edges);
        for &c in &class_order {
            let members = self.class_members[c as usize].clone();
            for &sup in &class_supers[c as usize] {
                self.class_members[sup as usize].or_with(&members);
            }
        }

        let role_supers = direct_supers(self.role_assertions.len(), &self.subrole_edges);
        for &r in &role_order {
            if role_supers[r as usize].is_empty() {
                continue;
            }
            let facts = self.role_assertions[r as usize].clone();
            for &sup in &role_supers[r as usize] {
                let target = &mut self.role_assertions[sup as usize];
                target.extend_from_slice(&facts);
                dedup_pairs(target);
            }
        }

        self.materialized = true;
        self.rebuild_indexes();
        Ok(self)
    }
}

fn direct_supers(n: usize, edges: &[(u32, u32)]) -> Vec<Vec<u32>> {
    let mut supers = vec![Vec::new(); n];
    for &(sub, sup) in edges {
        supers[sub as usize].push(sup);
    }
    supers
}

/// Topological order with every sub before its supers, or the first cycle
/// found (closed: first id repeated at the end).
fn topo_order(n: usize, edges: &[(u32, u32)], kind: SymbolKind) -> Result<Vec<u32>, KbError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let supers = direct_supers(n, edges);
    let mut mark = vec![Mark::New; n];
    let mut post = Vec::with_capacity(n);
    for root in 0..n {
        if mark[root] != Mark::New {
            continue;
        }
        // Iterative DFS along sub -> super edges.
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        mark[root] = Mark::Active;
        while let Some(top) = stack.last_mut() {
            let node = top.0;
            if let Some(&sup) = supers[node].get(top.1) {
                top.1 += 1;
                let sup = sup as usize;
                match mark[sup] {
                    Mark::New => {
                        mark[sup] = Mark::Active;
                        stack.push((sup, 0));
                    }
                    Mark::Active => {
                        let start = stack.iter().position(|&(v, _)| v == sup).unwrap();
                        let mut cycle: Vec<u32> =
                            stack[start..].iter().map(|&(v, _)| v as u32).collect();
                        cycle.push(sup as u32);
                        return Err(KbError::Cycle { kind, cycle });
                    }
                    Mark::Done => {}
                }
            } else {
                mark[node] = Mark::Done;
                post.push(node as u32);
                stack.pop();
            }
        }
    }
    // Post-order puts supers first; reverse for subs first.
    post.reverse();
    Ok(post)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExampleSet {
    pub positives: Bitset,
    pub negatives: Bitset,
}

impl ExampleSet {
    pub fn new(positives: Bitset, negatives: Bitset) -> Self {
        debug_assert!(positives.is_disjoint(&negatives));
        ExampleSet {
            positives,
            negatives,
        }
    }

    pub fn num_positives(&self) -> usize {
        self.positives.count()
    }

    pub fn num_negatives(&self) -> usize {
        self.negatives.count()
    }
}
