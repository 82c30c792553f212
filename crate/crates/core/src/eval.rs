//! Closed-world hypothesis evaluation over membership bitsets.
//!
//! The extension of a concept is built bottom-up: atoms read class
//! bitsets, connectives are word-wise AND/OR, and role restrictions walk the
//! role adjacency of each individual against the child's extension.

use crate::bitset::Bitset;
use crate::concept::Concept;
use crate::kb::{ExampleSet, KnowledgeBase};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageResult {
    pub pos_covered: u32,
    pub neg_covered: u32,
    pub covered: Option<Bitset>,
}

impl CoverageResult {
    pub fn new(pos_covered: u32, neg_covered: u32) -> Self {
        CoverageResult {
            pos_covered,
            neg_covered,
            covered: None,
        }
    }

    /// Predictive accuracy over all examples.
    pub fn accuracy(&self, examples: &ExampleSet) -> f64 {
        accuracy(
            self.pos_covered as usize,
            self.neg_covered as usize,
            examples.num_positives(),
            examples.num_negatives(),
        )
    }
}

fn accuracy(pos: usize, neg: usize, total_pos: usize, total_neg: usize) -> f64 {
    let total = total_pos + total_neg;
    if total == 0 {
        return 0.0;
    }
    (pos + (total_neg - neg)) as f64 / total as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub accuracy: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreConfig {
    pub gain_bonus: f64,
    pub expansion_penalty: f64,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            gain_bonus: 0.5,
            expansion_penalty: 0.02,
        }
    }
}

/// The extension of `c` under the closed-world assumption.
pub fn covered_set(c: &Concept, kb: &KnowledgeBase) -> Bitset {
    let n = kb.num_individuals();
    match c {
        Concept::Top => Bitset::full(n),
        Concept::Atomic(a) => kb.class_members(*a).clone(),
        Concept::NotAtomic(a) => {
            let mut b = kb.class_members(*a).clone();
            b.negate();
            b
        }
        Concept::Exists(r, child) => {
            let adj = kb.adjacency(r.role, r.inverse);
            if child.is_top() {
                return filter(n, |x| !adj.fillers(x).is_empty());
            }
            let inner = covered_set(child, kb);
            filter(n, |x| adj.fillers(x).iter().any(|&y| inner.contains(y as usize)))
        }
        Concept::Forall(r, child) => {
            if child.is_top() {
                return Bitset::full(n);
            }
            let adj = kb.adjacency(r.role, r.inverse);
            let inner = covered_set(child, kb);
            filter(n, |x| adj.fillers(x).iter().all(|&y| inner.contains(y as usize)))
        }
        Concept::MinCard(k, r, child) | Concept::MaxCard(k, r, child) => {
            let adj = kb.adjacency(r.role, r.inverse);
            let inner = covered_set(child, kb);
            let k = *k as usize;
            let at_least = matches!(c, Concept::MinCard(..));
            filter(n, |x| {
                let fillers = adj.fillers(x);
                if at_least && fillers.len() < k {
                    return false;
                }
                let count = fillers.iter().filter(|&&y| inner.contains(y as usize)).count();
                if at_least {
                    count >= k
                } else {
                    count <= k
                }
            })
        }
        Concept::BoolEq(r, v) => subjects(n, kb.boolean_assertions(*r).iter().filter(|a| a.1 == *v).map(|a| a.0)),
        Concept::NumGeq(r, v) => subjects(n, kb.numeric_assertions(*r).iter().filter(|a| a.1 >= *v).map(|a| a.0)),
        Concept::NumLeq(r, v) => subjects(n, kb.numeric_assertions(*r).iter().filter(|a| a.1 <= *v).map(|a| a.0)),
        Concept::StrEq(r, v) => subjects(n, kb.string_assertions(*r).iter().filter(|a| a.1 == *v).map(|a| a.0)),
        Concept::And(cs) => {
            let mut it = cs.iter();
            let mut acc = match it.next() {
                Some(first) => covered_set(first, kb),
                None => return Bitset::full(n),
            };
            for child in it {
                if acc.is_empty() {
                    break;
                }
                acc.and_with(&covered_set(child, kb));
            }
            acc
        }
        Concept::Or(cs) => {
            let mut acc = Bitset::new(n);
            for child in cs {
                acc.or_with(&covered_set(child, kb));
            }
            acc
        }
    }
}

fn filter(n: usize, pred: impl Fn(usize) -> bool) -> Bitset {
    let mut b = Bitset::new(n);
    for x in 0..n {
        if pred(x) {
            b.insert(x);
        }
    }
    b
}

fn subjects(n: usize, ids: impl Iterator<Item = u32>) -> Bitset {
    Bitset::from_indices(n, ids.map(|i| i as usize))
}

pub fn evaluate(c: &Concept, kb: &KnowledgeBase, examples: &ExampleSet) -> CoverageResult {
    let covered = covered_set(c, kb);
    CoverageResult::new(
        covered.intersection_count(&examples.positives) as u32,
        covered.intersection_count(&examples.negatives) as u32,
    )
}

/// Like [`evaluate`] but keeps the extension in the result.
pub fn evaluate_with_set(c: &Concept, kb: &KnowledgeBase, examples: &ExampleSet) -> CoverageResult {
    let covered = covered_set(c, kb);
    CoverageResult {
        pos_covered: covered.intersection_count(&examples.positives) as u32,
        neg_covered: covered.intersection_count(&examples.negatives) as u32,
        covered: Some(covered),
    }
}

/// Evaluates every concept, splitting the batch into `threads` contiguous
/// chunks. Output order matches input order for any thread count.
pub fn evaluate_batch(
    concepts: &[Concept],
    kb: &KnowledgeBase,
    examples: &ExampleSet,
    threads: usize,
) -> Vec<CoverageResult> {
    parallel_map(concepts, threads, |c| evaluate(c, kb, examples))
}

/// Order-preserving chunked map over scoped threads. Runs inline when one
/// thread is requested or the input is tiny.
pub fn parallel_map<T: Sync, R: Send>(
    items: &[T],
    threads: usize,
    f: impl Fn(&T) -> R + Sync,
) -> Vec<R> {
    let threads = threads.max(1).min(items.len().max(1));
    if threads == 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    let f = &f;
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(f).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("evaluation worker panicked"))
            .collect()
    })
}

/// `accuracy + gain_bonus * max(0, accuracy - parent) - expansion_penalty * he`.
pub fn score(
    cov: &CoverageResult,
    examples: &ExampleSet,
    parent_accuracy: Option<f64>,
    he: usize,
    cfg: &ScoreConfig,
) -> Score {
    let accuracy = cov.accuracy(examples);
    let gain = parent_accuracy.map_or(0.0, |p| (accuracy - p).max(0.0));
    Score {
        accuracy,
        value: accuracy + cfg.gain_bonus * gain - cfg.expansion_penalty * he as f64,
    }
}

/// A hypothesis is weak when it misses more positives than the noise
/// allowance, i.e. `pos_covered < ceil((1 - noise) * |E+|)`.
pub fn is_weak(cov: &CoverageResult, examples: &ExampleSet, noise: f64) -> bool {
    (cov.pos_covered as usize) < required_positives(examples.num_positives(), noise)
}

pub fn required_positives(num_positives: usize, noise: f64) -> usize {
    // The epsilon absorbs representation error in products like 0.8 * 10.
    ((1.0 - noise) * num_positives as f64 - 1e-9).ceil().max(0.0) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concept::RoleExpr;
    use crate::kb::{parse_examples, parse_kb};

    fn family() -> (KnowledgeBase, ExampleSet) {
        let (st, kb) = parse_kb(
            "class Person\nrole hasChild\nindividual a\nindividual b\nindividual c\n\
             instance Person a\ninstance Person b\nfact hasChild a b\n",
        )
        .unwrap();
        let ex = parse_examples("+ a\n- b\n- c\n", &st).unwrap();
        (kb.materialize().unwrap(), ex)
    }

    #[test]
    fn exists_and_vacuous_forall() {
        let (kb, _) = family();
        let r = RoleExpr::new(0);
        let some = covered_set(&Concept::exists(r, Concept::Atomic(0)), &kb);
        assert_eq!(some.iter().collect::<Vec<_>>(), vec![0]);
        let only = covered_set(&Concept::forall(r, Concept::Atomic(0)), &kb);
        assert_eq!(only.iter().collect::<Vec<_>>(), vec![0, 1, 2]);
        let inv = covered_set(&Concept::exists(RoleExpr::inverse(0), Concept::Top), &kb);
        assert_eq!(inv.iter().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn top_and_empty() {
        let (kb, ex) = family();
        assert_eq!(evaluate(&Concept::Top, &kb, &ex), CoverageResult::new(1, 2));
        let empty = Concept::And(vec![Concept::Atomic(0), Concept::NotAtomic(0)]);
        assert_eq!(evaluate(&empty, &kb, &ex), CoverageResult::new(0, 0));
    }

    #[test]
    fn scores() {
        let (_, ex) = family();
        let cfg = ScoreConfig::default();
        let s = score(&CoverageResult::new(1, 0), &ex, None, 0, &cfg);
        assert_eq!((s.accuracy, s.value), (1.0, 1.0));
        let s1 = score(&CoverageResult::new(1, 2), &ex, Some(0.2), 3, &cfg);
        let s2 = score(&CoverageResult::new(1, 2), &ex, Some(0.2), 4, &cfg);
        assert!((s1.value - s2.value - 0.02).abs() < 1e-12);
    }

    #[test]
    fn weak_threshold() {
        assert_eq!(required_positives(10, 0.0), 10);
        assert_eq!(required_positives(10, 0.2), 8);
        assert_eq!(required_positives(5, 0.1), 5);
        assert_eq!(required_positives(5, 0.5), 3);
    }

    #[test]
    fn batch_preserves_order() {
        let (kb, ex) = family();
        let cs = vec![Concept::Top, Concept::Atomic(0), Concept::NotAtomic(0), Concept::Top];
        let one = evaluate_batch(&cs, &kb, &ex, 1);
        assert_eq!(one, evaluate_batch(&cs, &kb, &ex, 3));
        assert!(evaluate_batch(&[], &kb, &ex, 4).is_empty());
    }
}
