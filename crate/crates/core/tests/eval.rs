mod common;

use dlpar_core::concept::{Concept, RoleExpr};
use dlpar_core::eval::{covered_set, evaluate, evaluate_batch, evaluate_with_set, is_weak, required_positives};
use dlpar_core::gen::{self, KbShape};
use dlpar_core::Dataset;

use common::NaiveModel;

#[test]
fn bitset_evaluation_matches_naive_interpreter() {
    let mut mismatches = 0;
    for seed in 0..1000u64 {
        let mut rng = gen::rng(seed);
        let (_, kb) = gen::random_kb(&mut rng, &KbShape::default());
        let kb = kb.materialize().unwrap();
        let naive = NaiveModel::new(&kb);
        for _ in 0..20 {
            let c = gen::random_canonical(&mut rng, &kb, 4);
            let fast: Vec<usize> = covered_set(&c, &kb).iter().collect();
            if fast != naive.extension(&c) {
                mismatches += 1;
                eprintln!("seed {seed}: {c:?}");
            }
        }
    }
    assert_eq!(mismatches, 0);
}

#[test]
fn set_algebra_identities() {
    for seed in 0..200u64 {
        let mut rng = gen::rng(seed);
        let (_, kb) = gen::random_kb(&mut rng, &KbShape::default());
        let kb = kb.materialize().unwrap();
        let n = kb.num_individuals();
        for _ in 0..10 {
            let a = gen::random_canonical(&mut rng, &kb, 3);
            let b = gen::random_canonical(&mut rng, &kb, 3);
            let (sa, sb) = (covered_set(&a, &kb), covered_set(&b, &kb));
            let and = covered_set(&Concept::And(vec![a.clone(), b.clone()]), &kb);
            let or = covered_set(&Concept::Or(vec![a.clone(), b.clone()]), &kb);
            for i in 0..n {
                assert_eq!(and.contains(i), sa.contains(i) && sb.contains(i));
                assert_eq!(or.contains(i), sa.contains(i) || sb.contains(i));
            }
            assert_eq!(covered_set(&Concept::Top, &kb).count(), n);
        }
        for c in 0..kb.num_classes() as u32 {
            let pos = covered_set(&Concept::Atomic(c), &kb);
            let neg = covered_set(&Concept::NotAtomic(c), &kb);
            assert!(pos.is_disjoint(&neg));
            assert_eq!(pos.count() + neg.count(), n);
        }
        for r in 0..kb.num_roles() as u32 {
            for inverse in [false, true] {
                let role = RoleExpr { role: r, inverse };
                let child = gen::random_canonical(&mut rng, &kb, 2);
                let ex = covered_set(&Concept::exists(role, child.clone()), &kb);
                let min1 = covered_set(&Concept::MinCard(1, role, Box::new(child.clone())), &kb);
                assert_eq!(ex, min1);
                // `r max 0 C` is the complement of `r some C`.
                let max0 = covered_set(&Concept::MaxCard(0, role, Box::new(child)), &kb);
                assert!(ex.is_disjoint(&max0));
                assert_eq!(ex.count() + max0.count(), n);
            }
        }
    }
}

#[test]
fn coverage_counts_agree_with_sets() {
    let ds = Dataset::trains();
    let mut rng = gen::rng(5);
    for _ in 0..200 {
        let c = gen::random_canonical(&mut rng, &ds.kb, 4);
        let a = evaluate(&c, &ds.kb, &ds.examples);
        let b = evaluate_with_set(&c, &ds.kb, &ds.examples);
        assert_eq!((a.pos_covered, a.neg_covered), (b.pos_covered, b.neg_covered));
        let set = b.covered.unwrap();
        assert_eq!(set.intersection_count(&ds.examples.positives), a.pos_covered as usize);
        assert_eq!(set.intersection_count(&ds.examples.negatives), a.neg_covered as usize);
    }
}

#[test]
fn batch_results_are_thread_invariant() {
    let ds = Dataset::trains();
    let mut rng = gen::rng(17);
    let mut batch: Vec<Concept> = (0..500).map(|_| gen::random_canonical(&mut rng, &ds.kb, 4)).collect();
    // Duplicates evaluate independently.
    batch.extend(batch[..20].to_vec());
    let one = evaluate_batch(&batch, &ds.kb, &ds.examples, 1);
    for threads in [2, 4, 8] {
        assert_eq!(evaluate_batch(&batch, &ds.kb, &ds.examples, threads), one);
    }
    for (i, c) in batch.iter().enumerate() {
        assert_eq!(one[i], evaluate(c, &ds.kb, &ds.examples));
    }
    assert_eq!(&one[500..], &one[..20]);
}

#[test]
fn weakness_threshold() {
    assert_eq!(required_positives(10, 0.0), 10);
    assert_eq!(required_positives(10, 0.2), 8);
    assert_eq!(required_positives(5, 0.1), 5);
    assert_eq!(required_positives(5, 1.0), 0);
    let ds = Dataset::trains();
    let top = evaluate(&Concept::Top, &ds.kb, &ds.examples);
    assert!(!is_weak(&top, &ds.examples, 0.0));
    assert_eq!((top.pos_covered, top.neg_covered), (5, 5));
    assert_eq!(top.accuracy(&ds.examples), 0.5);
}
