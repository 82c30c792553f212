mod common;

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use dlpar_core::concept::{
    canonicalize, compare_canonical, concept_length, decode, encode, hash_concept, is_canonical,
    parse_concept, render, Concept,
};
use dlpar_core::eval::covered_set;
use dlpar_core::gen::{self, KbShape};
use dlpar_core::{fixtures, Dataset};
use proptest::prelude::*;

fn random_kb(seed: u64) -> (dlpar_core::SymbolTable, dlpar_core::KnowledgeBase) {
    let mut rng = gen::rng(seed);
    let (st, kb) = gen::random_kb(&mut rng, &KbShape::default());
    (st, kb.materialize().unwrap())
}

#[test]
fn fnv_reference_vectors() {
    // Independent byte-at-a-time FNV-1a 64 reference.
    fn fnv(bytes: &[u8]) -> u64 {
        let mut h: u64 = 14695981039346656037;
        for &b in bytes {
            h ^= u64::from(b);
            h = h.wrapping_mul(1099511628211);
        }
        h
    }
    assert_eq!(fnv(&[0x00]), 0xAF63_BD4C_8601_B7DF);
    assert_eq!(hash_concept(&Concept::Top).0, fnv(&[0x00]));
    let c = canonicalize(&Concept::And(vec![Concept::Atomic(2), Concept::NotAtomic(1)]));
    assert_eq!(hash_concept(&c).0, fnv(&encode(&c)));
}

#[test]
fn commuted_conjunctions_hash_equal() {
    let a = canonicalize(&Concept::And(vec![Concept::Atomic(2), Concept::Atomic(1)]));
    let b = canonicalize(&Concept::And(vec![Concept::Atomic(1), Concept::Atomic(2)]));
    assert_eq!(a, b);
    assert_eq!(hash_concept(&a), hash_concept(&b));
}

#[test]
fn canonicalization_preserves_coverage() {
    for seed in 0..200 {
        let (_, kb) = random_kb(seed);
        let mut rng = gen::rng(seed ^ 0xabc);
        for _ in 0..20 {
            let c = gen::random_concept(&mut rng, &kb, 4);
            let canon = canonicalize(&c);
            if canon.validate().is_err() {
                continue;
            }
            assert_eq!(covered_set(&c, &kb), covered_set(&canon, &kb), "{c:?}");
            assert!(concept_length(&canon) <= concept_length(&c));
            assert_eq!(canonicalize(&canon), canon);
            assert!(is_canonical(&canon));
        }
    }
}

#[test]
fn nested_disjunction_coverage() {
    let ds = Dataset::smoke();
    let nested = Concept::Or(vec![
        Concept::Or(vec![Concept::Atomic(1), Concept::Atomic(2)]),
        Concept::NotAtomic(0),
    ]);
    let flat = canonicalize(&nested);
    assert!(matches!(&flat, Concept::Or(cs) if cs.len() == 3));
    assert_eq!(covered_set(&nested, &ds.kb), covered_set(&flat, &ds.kb));
}

#[test]
fn total_order_properties() {
    let (_, kb) = random_kb(7);
    let mut rng = gen::rng(8);
    let cs: Vec<Concept> = (0..10_000).map(|_| gen::random_canonical(&mut rng, &kb, 4)).collect();
    for w in cs.windows(3) {
        let (a, b, c) = (&w[0], &w[1], &w[2]);
        assert_eq!(compare_canonical(a, b), compare_canonical(b, a).reverse());
        assert_eq!(compare_canonical(a, a), Ordering::Equal);
        if compare_canonical(a, b) != Ordering::Greater && compare_canonical(b, c) != Ordering::Greater {
            assert_ne!(compare_canonical(a, c), Ordering::Greater);
        }
        // Equality under the order is structural equality of encodings.
        assert_eq!(compare_canonical(a, b) == Ordering::Equal, encode(a) == encode(b));
    }
    // Sorting is consistent with pairwise comparison.
    let mut sorted = cs.clone();
    sorted.sort_by(compare_canonical);
    assert!(sorted.windows(2).all(|w| compare_canonical(&w[0], &w[1]) != Ordering::Greater));
}

#[test]
fn hash_collision_rate() {
    let mut distinct: HashMap<Vec<u8>, u64> = HashMap::new();
    let mut rng = gen::rng(99);
    let mut seed = 0;
    while distinct.len() < 100_000 {
        let (_, kb) = random_kb(seed);
        seed += 1;
        for _ in 0..200 {
            let c = gen::random_canonical(&mut rng, &kb, 4);
            if c.validate().is_ok() {
                let bytes = encode(&c);
                let h = hash_concept(&c).0;
                distinct.insert(bytes, h);
            }
        }
    }
    let hashes: HashSet<u64> = distinct.values().copied().collect();
    let collisions = distinct.len() - hashes.len();
    assert!(
        (collisions as f64) / (distinct.len() as f64) <= 1e-5,
        "{collisions} collisions among {} concepts",
        distinct.len()
    );
}

#[test]
fn render_parse_round_trip_on_random_concepts() {
    for seed in 0..100 {
        let (st, kb) = random_kb(seed);
        let mut rng = gen::rng(seed + 1000);
        for _ in 0..50 {
            let c = gen::random_canonical(&mut rng, &kb, 4);
            if c.validate().is_err() {
                continue;
            }
            // Random string value indexes may not exist for the KB.
            let Ok(text) = render(&c, &st) else { continue };
            let back = parse_concept(&text, &st).unwrap_or_else(|e| panic!("{}", e.caret(&text)));
            assert_eq!(back, c, "{text}");
        }
    }
}

#[test]
fn trains_target_parses() {
    let ds = Dataset::trains();
    let c = parse_concept(fixtures::TRAINS_TARGET, &ds.symbols).unwrap();
    assert_eq!(concept_length(&c), 5);
    assert_eq!(render(&c, &ds.symbols).unwrap(), fixtures::TRAINS_TARGET);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn permutations_canonicalize_identically(seed in any::<u64>()) {
        let (_, kb) = random_kb(seed % 64);
        let mut rng = gen::rng(seed);
        for _ in 0..40 {
            let c = gen::random_canonical(&mut rng, &kb, 4);
            let scrambled = gen::scramble(&mut rng, &c);
            let again = canonicalize(&scrambled);
            prop_assert_eq!(encode(&again), encode(&c));
            prop_assert_eq!(hash_concept(&again), hash_concept(&c));
        }
    }

    #[test]
    fn codec_round_trip(seed in any::<u64>()) {
        let (_, kb) = random_kb(seed % 64);
        let mut rng = gen::rng(seed);
        for _ in 0..40 {
            let c = gen::random_canonical(&mut rng, &kb, 4);
            if c.validate().is_err() {
                continue;
            }
            let bytes = encode(&c);
            let back = decode(&bytes).unwrap();
            prop_assert_eq!(encode(&back), bytes);
            prop_assert_eq!(back, c);
        }
    }
}
