//! Seeded generators for random knowledge bases and concepts, used by the
//! property tests, the acceptance suite and the demo.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bitset::Bitset;
use crate::concept::{canonicalize, Concept, RoleExpr};
use crate::kb::{ExampleSet, Interner, KbTables, KnowledgeBase, SymbolTable};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy)]
pub struct KbShape {
    pub max_individuals: usize,
    pub max_classes: usize,
    pub max_roles: usize,
    /// Upper bound on numeric + boolean + string roles together.
    pub max_concrete_roles: usize,
    /// Role assertions per individual, on average.
    pub role_density: f64,
}

impl Default for KbShape {
    fn default() -> Self {
        KbShape {
            max_individuals: 30,
            max_classes: 6,
            max_roles: 4,
            max_concrete_roles: 3,
            role_density: 1.5,
        }
    }
}

fn names(prefix: &str, n: usize) -> Interner {
    let mut i = Interner::default();
    for k in 0..n {
        i.intern(&format!("{prefix}{k}"));
    }
    i
}

/// A random, unmaterialized KB with acyclic class and role hierarchies
/// (edges only go from higher to lower ids).
pub fn random_kb<R: Rng>(rng: &mut R, shape: &KbShape) -> (SymbolTable, KnowledgeBase) {
    let n = rng.gen_range(1..=shape.max_individuals.max(1));
    let nc = rng.gen_range(1..=shape.max_classes.max(1));
    let nr = rng.gen_range(0..=shape.max_roles);
    let concrete = rng.gen_range(0..=shape.max_concrete_roles);
    let (mut nn, mut nb, mut ns) = (0, 0, 0);
    for _ in 0..concrete {
        match rng.gen_range(0..3) {
            0 => nn += 1,
            1 => nb += 1,
            _ => ns += 1,
        }
    }

    let mut t = KbTables {
        num_individuals: n,
        class_members: vec![Vec::new(); nc],
        role_assertions: vec![Vec::new(); nr],
        numeric_assertions: vec![Vec::new(); nn],
        boolean_assertions: vec![Vec::new(); nb],
        string_assertions: vec![Vec::new(); ns],
        ..Default::default()
    };
    for c in 1..nc {
        if rng.gen_bool(0.5) {
            t.subclass_edges.push((c as u32, rng.gen_range(0..c) as u32));
        }
    }
    for r in 1..nr {
        if rng.gen_bool(0.3) {
            t.subrole_edges.push((r as u32, rng.gen_range(0..r) as u32));
        }
    }
    let p_member = rng.gen_range(0.1..0.6);
    for members in &mut t.class_members {
        for i in 0..n {
            if rng.gen_bool(p_member) {
                members.push(i as u32);
            }
        }
    }
    for facts in &mut t.role_assertions {
        let k = (n as f64 * shape.role_density * rng.gen_range(0.2..1.0)) as usize;
        for _ in 0..k {
            facts.push((rng.gen_range(0..n) as u32, rng.gen_range(0..n) as u32));
        }
    }
    for facts in &mut t.numeric_assertions {
        for i in 0..n {
            if rng.gen_bool(0.6) {
                facts.push((i as u32, rng.gen_range(0..8) as f64 * 0.5));
            }
        }
    }
    for facts in &mut t.boolean_assertions {
        for i in 0..n {
            if rng.gen_bool(0.6) {
                facts.push((i as u32, rng.gen_bool(0.5)));
            }
        }
    }
    let mut string_values = Vec::new();
    for facts in &mut t.string_assertions {
        let domain = rng.gen_range(1..4usize);
        string_values.push(names("v", domain));
        for i in 0..n {
            if rng.gen_bool(0.6) {
                facts.push((i as u32, rng.gen_range(0..domain) as u32));
            }
        }
    }

    let st = SymbolTable {
        classes: names("C", nc),
        roles: names("r", nr),
        numeric_roles: names("d", nn),
        boolean_roles: names("b", nb),
        string_roles: names("s", ns),
        individuals: names("i", n),
        string_values,
    };
    (st, KnowledgeBase::from_tables(t))
}

/// Random disjoint, non-empty example sets (needs at least two individuals).
pub fn random_examples<R: Rng>(rng: &mut R, n: usize) -> ExampleSet {
    assert!(n >= 2, "need two individuals for examples");
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(rng);
    let np = rng.gen_range(1..n);
    let mut positives = Bitset::new(n);
    let mut negatives = Bitset::new(n);
    for (k, &i) in ids.iter().enumerate() {
        if k < np {
            positives.insert(i);
        } else if rng.gen_bool(0.8) || negatives.is_empty() {
            negatives.insert(i);
        }
    }
    ExampleSet::new(positives, negatives)
}

/// A random (not necessarily canonical) concept over the ids of `kb`.
pub fn random_concept<R: Rng>(rng: &mut R, kb: &KnowledgeBase, depth: usize) -> Concept {
    let leaf = depth <= 1 || rng.gen_bool(0.3);
    let nc = kb.num_classes() as u32;
    let nr = kb.num_roles() as u32;
    let mut choices: Vec<u8> = vec![0];
    if nc > 0 {
        choices.extend([1, 2]);
    }
    if kb.num_boolean_roles() > 0 {
        choices.push(3);
    }
    if kb.num_numeric_roles() > 0 {
        choices.extend([4, 5]);
    }
    if kb.num_string_roles() > 0 {
        choices.push(6);
    }
    if !leaf {
        choices.extend([10, 11, 10, 11]);
        if nr > 0 {
            choices.extend([7, 8, 9, 12, 7]);
        }
    }
    let role = |rng: &mut R| RoleExpr {
        role: rng.gen_range(0..nr),
        inverse: rng.gen_bool(0.25),
    };
    let num_value = |rng: &mut R| rng.gen_range(0..8) as f64 * 0.5;
    match *choices.choose(rng).unwrap() {
        0 => Concept::Top,
        1 => Concept::Atomic(rng.gen_range(0..nc)),
        2 => Concept::NotAtomic(rng.gen_range(0..nc)),
        3 => Concept::BoolEq(rng.gen_range(0..kb.num_boolean_roles() as u32), rng.gen_bool(0.5)),
        4 => Concept::NumGeq(rng.gen_range(0..kb.num_numeric_roles() as u32), num_value(rng)),
        5 => Concept::NumLeq(rng.gen_range(0..kb.num_numeric_roles() as u32), num_value(rng)),
        6 => {
            let sr = rng.gen_range(0..kb.num_string_roles() as u32);
            Concept::StrEq(sr, rng.gen_range(0..3))
        }
        7 => Concept::exists(role(rng), random_concept(rng, kb, depth - 1)),
        8 => Concept::forall(role(rng), random_concept(rng, kb, depth - 1)),
        9 => Concept::MinCard(rng.gen_range(1..4), role(rng), Box::new(random_concept(rng, kb, depth - 1))),
        12 => Concept::MaxCard(rng.gen_range(0..4), role(rng), Box::new(random_concept(rng, kb, depth - 1))),
        op => {
            let k = rng.gen_range(2..=4);
            let cs = (0..k).map(|_| random_concept(rng, kb, depth - 1)).collect();
            if op == 10 {
                Concept::And(cs)
            } else {
                Concept::Or(cs)
            }
        }
    }
}

/// A random canonical concept of depth at most `depth` that is not a
/// degenerate empty disjunction.
pub fn random_canonical<R: Rng>(rng: &mut R, kb: &KnowledgeBase, depth: usize) -> Concept {
    canonicalize(&random_concept(rng, kb, depth))
}

/// Recursively shuffles the operands of every conjunction and disjunction
/// and re-nests some of them, without canonicalizing.
pub fn scramble<R: Rng>(rng: &mut R, c: &Concept) -> Concept {
    match c {
        Concept::Exists(r, ch) => Concept::Exists(*r, Box::new(scramble(rng, ch))),
        Concept::Forall(r, ch) => Concept::Forall(*r, Box::new(scramble(rng, ch))),
        Concept::MinCard(n, r, ch) => Concept::MinCard(*n, *r, Box::new(scramble(rng, ch))),
        Concept::MaxCard(n, r, ch) => Concept::MaxCard(*n, *r, Box::new(scramble(rng, ch))),
        Concept::And(cs) | Concept::Or(cs) => {
            let is_and = matches!(c, Concept::And(_));
            let wrap = |v: Vec<Concept>| if is_and { Concept::And(v) } else { Concept::Or(v) };
            let mut cs: Vec<Concept> = cs.iter().map(|x| scramble(rng, x)).collect();
            cs.shuffle(rng);
            if cs.len() >= 3 && rng.gen_bool(0.5) {
                // Regroup a prefix under the same connective.
                let tail = cs.split_off(2);
                let head = wrap(cs);
                let mut out = vec![head];
                out.extend(tail);
                out.shuffle(rng);
                return wrap(out);
            }
            wrap(cs)
        }
        atom => atom.clone(),
    }
}

/// A large flat KB for throughput checks: `n` individuals, a handful of
/// classes and roles, roughly `degree` role assertions per individual.
pub fn synthetic_kb(seed: u64, n: usize, classes: usize, roles: usize, degree: usize) -> (SymbolTable, KnowledgeBase) {
    let mut rng = rng(seed);
    let mut t = KbTables {
        num_individuals: n,
        class_members: vec![Vec::new(); classes],
        role_assertions: vec![Vec::new(); roles],
        ..Default::default()
    };
    for c in 1..classes {
        if c % 3 != 0 {
            t.subclass_edges.push((c as u32, (c / 3) as u32));
        }
    }
    for (c, members) in t.class_members.iter_mut().enumerate() {
        let p = 0.05 + 0.4 * ((c * 7919) % 10) as f64 / 10.0;
        for i in 0..n {
            if rng.gen_bool(p) {
                members.push(i as u32);
            }
        }
    }
    for facts in &mut t.role_assertions {
        for i in 0..n {
            for _ in 0..rng.gen_range(0..=2 * degree) {
                facts.push((i as u32, rng.gen_range(0..n) as u32));
            }
        }
    }
    let st = SymbolTable {
        classes: names("C", classes),
        roles: names("r", roles),
        individuals: names("i", n),
        ..Default::default()
    };
    (st, KnowledgeBase::from_tables(t))
}
