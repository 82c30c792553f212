use std::collections::BTreeSet;

use dlpar_core::concept::{concept_length, decode, encode, is_canonical, parse_concept, render, Concept, RoleExpr};
use dlpar_core::eval::covered_set;
use dlpar_core::gen::{self, KbShape};
use dlpar_core::kb::compute_statistics;
use dlpar_core::refine::{build_mb, RefinementConfig, Refiner};
use dlpar_core::Dataset;

fn contains_max_card(c: &Concept) -> bool {
    matches!(c, Concept::MaxCard(..)) || c.children().any(contains_max_card)
}

fn names(ds: &Dataset, cs: &[Concept]) -> BTreeSet<String> {
    cs.iter().map(|c| render(c, &ds.symbols).unwrap()).collect()
}

#[test]
fn top_refinements_on_trains() {
    let ds = Dataset::trains();
    let cfg = RefinementConfig::new(&ds.stats, 10);
    let refiner = Refiner::new(&ds.kb, &ds.stats, &ds.mb, &cfg);
    let out = names(&ds, &refiner.refine(&Concept::Top, 3));
    for &c in &ds.stats.top_level_classes {
        assert!(out.contains(ds.symbols.classes.name(c).unwrap()));
    }
    for r in ds.symbols.roles.names() {
        assert!(out.contains(&format!("({r} some Thing)")), "{r}");
        assert!(out.contains(&format!("({r} only Thing)")), "{r}");
        assert!(!out.contains(&format!("(inverse {r} some Thing)")), "{r}");
    }
    // Inverse restrictions cost one more.
    let wider = names(&ds, &refiner.refine(&Concept::Top, 4));
    for r in ds.symbols.roles.names() {
        assert!(wider.contains(&format!("(inverse {r} some Thing)")), "{r}");
    }
    assert!(out.contains("(Train or Car)") || out.contains("(Car or Train)"));
    assert!(!out.contains("Thing"));
}

#[test]
fn atomic_refines_to_subclasses() {
    let ds = Dataset::trains();
    let cfg = RefinementConfig::new(&ds.stats, 10);
    let refiner = Refiner::new(&ds.kb, &ds.stats, &ds.mb, &cfg);
    let car = parse_concept("Car", &ds.symbols).unwrap();
    let out = refiner.refine(&car, 1);
    let subs: Vec<Concept> = ds.stats.subclasses[ds.symbols.classes.id("Car").unwrap() as usize]
        .iter()
        .map(|&s| Concept::Atomic(s))
        .collect();
    assert!(!subs.is_empty());
    let mut sorted = subs.clone();
    sorted.sort();
    assert_eq!(out, sorted);
}

#[test]
fn target_reachable_by_iterated_refinement() {
    let ds = Dataset::trains();
    let cfg = RefinementConfig::new(&ds.stats, 10);
    let refiner = Refiner::new(&ds.kb, &ds.stats, &ds.mb, &cfg);
    let target = parse_concept(dlpar_core::fixtures::TRAINS_TARGET, &ds.symbols).unwrap();
    let mut frontier: BTreeSet<Concept> = [Concept::Top].into();
    let mut seen = frontier.clone();
    while !frontier.is_empty() && !seen.contains(&target) {
        let mut next = BTreeSet::new();
        for c in &frontier {
            for r in refiner.refine(c, 5) {
                if seen.insert(r.clone()) {
                    next.insert(r);
                }
            }
        }
        frontier = next;
    }
    assert!(seen.contains(&target));
}

#[test]
fn refinements_are_canonical_bounded_and_specializing() {
    for seed in 0..60u64 {
        let mut rng = gen::rng(seed);
        let (_, kb) = gen::random_kb(&mut rng, &KbShape::default());
        let kb = kb.materialize().unwrap();
        let stats = compute_statistics(&kb);
        let mb = build_mb(&kb, &stats);
        let cfg = RefinementConfig::new(&stats, 8);
        let refiner = Refiner::new(&kb, &stats, &mb, &cfg);
        let mut frontier = vec![Concept::Top];
        for bound in 2..=5 {
            let mut next = Vec::new();
            for c in frontier.iter().take(30) {
                let out = refiner.refine(c, bound);
                assert!(out.windows(2).all(|w| w[0] < w[1]), "sorted and unique");
                assert_eq!(out, refiner.refine(c, bound), "deterministic");
                let parent = covered_set(c, &kb);
                for r in &out {
                    assert!(is_canonical(r));
                    assert_ne!(r, c);
                    assert!(concept_length(r) <= bound);
                    assert_eq!(&decode(&encode(r)).unwrap(), r);
                    // MaxCard from Thing tightens as its number falls, which is
                    // still a specialization, but the subset claim is only
                    // checked for the monotone fragment.
                    if !contains_max_card(r) && !contains_max_card(c) {
                        assert!(covered_set(r, &kb).is_subset(&parent), "{c:?} -> {r:?}");
                    }
                }
                next.extend(out);
            }
            frontier = next;
        }
    }
}

#[test]
fn switches_disable_constructs() {
    let ds = Dataset::trains();
    let mut cfg = RefinementConfig::new(&ds.stats, 10);
    cfg.use_inverse_roles = false;
    cfg.use_cardinality = false;
    cfg.use_disjunction = false;
    cfg.use_negation = false;
    let refiner = Refiner::new(&ds.kb, &ds.stats, &ds.mb, &cfg);
    fn banned(c: &Concept) -> bool {
        match c {
            Concept::Or(_) | Concept::NotAtomic(_) | Concept::MinCard(..) | Concept::MaxCard(..) => true,
            Concept::Exists(r, _) | Concept::Forall(r, _) if r.inverse => true,
            _ => c.children().any(banned),
        }
    }
    let mut frontier = vec![Concept::Top];
    for bound in 2..=5 {
        let mut next = Vec::new();
        for c in frontier.iter().take(40) {
            for r in refiner.refine(c, bound) {
                assert!(!banned(&r), "{r:?}");
                next.push(r);
            }
        }
        frontier = next;
    }
}

#[test]
fn cardinality_respects_filler_bound() {
    let ds = Dataset::trains();
    let cfg = RefinementConfig::new(&ds.stats, 10);
    let refiner = Refiner::new(&ds.kb, &ds.stats, &ds.mb, &cfg);
    let has_car = ds.symbols.roles.id("hasCar").unwrap();
    let cap = ds.stats.max_fillers[has_car as usize] as u16;
    assert!(cap >= 2);
    let c = Concept::MinCard(cap, RoleExpr::new(has_car), Box::new(Concept::Top));
    for r in refiner.refine(&c, 6) {
        if let Concept::MinCard(n, role, _) = &r {
            if *role == RoleExpr::new(has_car) {
                assert!(*n <= cap);
            }
        }
    }
}
