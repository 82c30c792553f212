use std::collections::{BTreeSet, HashSet};

use dlpar_core::concept::{hash_concept, render, CanonicalHash, Concept};
use dlpar_core::eval::{evaluate, ScoreConfig};
use dlpar_core::gen;
use dlpar_core::search::{
    expand_nodes, expand_single_node, reduce_redundant, reduce_sequential, ClosedList, Expansion,
    Refinement, SearchConfig, SearchContext, SearchNode, SearchStatus,
};
use dlpar_core::{fixtures, Dataset};
use rand::Rng;

fn trains_config(threads: usize) -> SearchConfig {
    SearchConfig {
        beam_width: 4,
        max_length: 7,
        threads,
        trace: true,
        verify_hashes: true,
        ..SearchConfig::default()
    }
}

fn random_expansions(seed: u64, lists: usize, total: usize) -> Vec<Expansion> {
    let ds = Dataset::trains();
    let mut rng = gen::rng(seed);
    // A small pool forces many cross-list duplicates.
    let pool: Vec<Concept> = (0..total / 3).map(|_| gen::random_canonical(&mut rng, &ds.kb, 3)).collect();
    let mut out = vec![Expansion::default(); lists];
    for _ in 0..total {
        let c = pool[rng.gen_range(0..pool.len())].clone();
        let k = rng.gen_range(0..lists);
        out[k].push(Refinement {
            hash: hash_concept(&c),
            concept: c,
            parent: CanonicalHash(k as u64),
            parent_accuracy: 0.0,
        });
    }
    out
}

#[test]
fn reduction_matches_sequential_reference() {
    for seed in 0..50 {
        let lists = random_expansions(seed, 8, 500);
        let mut rht = ClosedList::default();
        for e in lists.iter().take(1) {
            for r in e.refinements.iter().step_by(3) {
                rht.insert(r.hash);
            }
        }
        let expected = reduce_sequential(&lists, &rht);
        for threads in [1, 2, 4, 8] {
            assert_eq!(reduce_redundant(lists.clone(), &rht, threads), expected);
        }
        // Survivors are unique, absent from the RHT, and come from the lowest list.
        let mut seen = HashSet::new();
        for r in &expected {
            assert!(seen.insert(r.hash));
            assert!(!rht.contains(r.hash));
            let first = lists.iter().position(|e| e.local_closed.contains(&r.hash.0)).unwrap();
            assert_eq!(r.parent, CanonicalHash(first as u64));
        }
        let all: HashSet<u64> = lists.iter().flat_map(|e| e.local_closed.iter().copied()).collect();
        let expected_count = all.iter().filter(|&&h| !rht.contains(CanonicalHash(h))).count();
        assert_eq!(expected.len(), expected_count);
    }
}

#[test]
fn reducing_empty_input() {
    assert!(reduce_redundant(Vec::new(), &ClosedList::default(), 4).is_empty());
    let empty = vec![Expansion::default(); 5];
    assert!(reduce_redundant(empty, &ClosedList::default(), 4).is_empty());
}

fn context_parts(ds: &Dataset, max_length: usize) -> dlpar_core::refine::RefinementConfig {
    let cfg = SearchConfig { max_length, ..SearchConfig::default() };
    cfg.refinement_config(&ds.stats)
}

#[test]
fn single_expansion_bumps_he() {
    let ds = Dataset::trains();
    let rcfg = context_parts(&ds, 4);
    let ctx = SearchContext::new(&ds.kb, &ds.examples, &ds.stats, &ds.mb, &rcfg, ScoreConfig::default(), 0.0);
    let mut root = ctx.root();
    assert_eq!(root.he, 1);
    let before = root.score.value;
    for expected in 2..=4 {
        let mut local = Expansion::default();
        expand_single_node(&mut root, &ctx, &mut local);
        assert_eq!(root.he, expected);
        assert!(local.refinements.iter().all(|r| r.parent == root.hash));
        assert!(!local.refinements.is_empty());
    }
    assert!(!root.expandable);
    assert!(root.score.value < before);
    // Further expansion is a no-op.
    let mut local = Expansion::default();
    expand_single_node(&mut root, &ctx, &mut local);
    assert_eq!(root.he, 4);
    assert!(local.refinements.is_empty());
}

#[test]
fn chunked_expansion_is_thread_invariant() {
    let ds = Dataset::trains();
    let rcfg = context_parts(&ds, 6);
    let ctx = SearchContext::new(&ds.kb, &ds.examples, &ds.stats, &ds.mb, &rcfg, ScoreConfig::default(), 0.0);
    let mut rng = gen::rng(3);
    let nodes: Vec<SearchNode> = (0..12)
        .map(|_| {
            let c = gen::random_canonical(&mut rng, &ds.kb, 2);
            let cov = evaluate(&c, &ds.kb, &ds.examples);
            SearchNode::new(c.clone(), hash_concept(&c), cov, None, &ctx)
        })
        .collect();
    let closed = ClosedList::default();
    let reference = {
        let mut batch = nodes.clone();
        reduce_redundant(expand_nodes(&mut batch, &ctx, 1), &closed, 1)
    };
    for threads in [2, 3, 4, 8] {
        let mut batch = nodes.clone();
        let lists = expand_nodes(&mut batch, &ctx, threads);
        assert_eq!(reduce_redundant(lists, &closed, threads), reference);
    }
}

#[test]
fn trains_search_is_thread_invariant() {
    let ds = Dataset::trains();
    let one = ds.search(&trains_config(1)).unwrap();
    let four = ds.search(&trains_config(4)).unwrap();
    let inserted = |o: &dlpar_core::search::SearchOutcome| -> BTreeSet<(u64, u64)> {
        o.trace.as_ref().unwrap().inserted.iter().copied().collect()
    };
    assert_eq!(inserted(&one), inserted(&four));
    assert_eq!(one.closed, four.closed);
    let (b1, b4) = (one.best().unwrap(), four.best().unwrap());
    assert_eq!(b1.score.value.to_bits(), b4.score.value.to_bits());
    assert_eq!(b1.concept, b4.concept);
    assert_eq!(one.status, SearchStatus::Solved);
    assert_eq!(b1.score.accuracy, 1.0);
    assert_eq!((b1.coverage.pos_covered, b1.coverage.neg_covered), (5, 0));
    assert_eq!(render(&b1.concept, &ds.symbols).unwrap(), fixtures::TRAINS_TARGET);
}

#[test]
fn no_hash_is_evaluated_twice() {
    let ds = Dataset::trains();
    let out = ds.search(&trains_config(4)).unwrap();
    let evaluated = &out.trace.as_ref().unwrap().evaluated;
    let unique: HashSet<u64> = evaluated.iter().copied().collect();
    assert_eq!(unique.len(), evaluated.len());
    assert_eq!(unique.len(), out.closed.len());
}

#[test]
fn quiescent_smoke_runs_agree() {
    // An unreachable target runs the search until nothing is expandable.
    let ds = Dataset::smoke();
    let cfg = |threads| SearchConfig {
        beam_width: 3,
        max_length: 4,
        target_accuracy: 1.5,
        limit: 5,
        threads,
        trace: true,
        ..SearchConfig::default()
    };
    let a = ds.search(&cfg(1)).unwrap();
    assert_eq!(a.status, SearchStatus::Exhausted);
    for threads in [2, 4, 8] {
        let b = ds.search(&cfg(threads)).unwrap();
        assert_eq!(b.closed, a.closed);
        assert_eq!(b.trace.as_ref().unwrap().inserted, a.trace.as_ref().unwrap().inserted);
        let hs = |o: &dlpar_core::search::SearchOutcome| o.hypotheses.iter().map(|h| h.hash).collect::<Vec<_>>();
        assert_eq!(hs(&b), hs(&a));
    }
    assert_eq!(a.hypotheses.len(), 5);
    assert!(a
        .hypotheses
        .windows(2)
        .all(|w| w[0].score.accuracy >= w[1].score.accuracy));
}

#[test]
fn zero_budget_stops_immediately() {
    let ds = Dataset::trains();
    let cfg = SearchConfig {
        max_execution_millis: Some(0),
        threads: 2,
        ..SearchConfig::default()
    };
    let out = ds.search(&cfg).unwrap();
    assert_eq!(out.status, SearchStatus::Budget);
    assert!(out.iterations.is_empty());
    assert_eq!(out.best().unwrap().concept, Concept::Top);
}

#[test]
fn empty_refinement_space_exhausts() {
    let ds = Dataset::parse("class A\nindividual x\nindividual y\ninstance A x\n", "+ x\n- y\n").unwrap();
    let cfg = SearchConfig {
        max_length: 1,
        threads: 1,
        beam_width: 1,
        ..SearchConfig::default()
    };
    let out = ds.search(&cfg).unwrap();
    assert_eq!(out.status, SearchStatus::Exhausted);
    assert_eq!(out.best().unwrap().concept, Concept::Top);
}

#[test]
fn open_list_stays_sorted() {
    let ds = Dataset::smoke();
    let rcfg = context_parts(&ds, 5);
    let ctx = SearchContext::new(&ds.kb, &ds.examples, &ds.stats, &ds.mb, &rcfg, ScoreConfig::default(), 0.0);
    let mut state = dlpar_core::search::SearchState::new(ctx.root(), 4, false);
    let mut rng = gen::rng(21);
    for _ in 0..10 {
        let nodes: Vec<SearchNode> = (0..50)
            .map(|_| {
                let c = gen::random_canonical(&mut rng, &ds.kb, 3);
                let cov = evaluate(&c, &ds.kb, &ds.examples);
                SearchNode::new(c.clone(), hash_concept(&c), cov, Some((CanonicalHash(0), 0.5)), &ctx)
            })
            .collect();
        state.absorb(nodes);
        assert!(state.open.is_sorted());
        let best = state.open.extract_best_nodes(7);
        assert!(best.len() <= 7);
        assert!(best.windows(2).all(|w| w[0] < w[1]));
        assert!(best.iter().all(|&i| state.open.nodes[i].expandable));
        // Every skipped node before the last pick is non-expandable.
        if let Some(&last) = best.last() {
            let picked: HashSet<usize> = best.iter().copied().collect();
            assert!((0..last).all(|i| picked.contains(&i) || !state.open.nodes[i].expandable));
        }
    }
}
