//! Parallel beam search over the refinement graph.
//!
//! Each iteration takes the best `beam_width` expandable nodes from the
//! open list, expands them on `threads` workers (each with its own local
//! closed list), merges the per-worker refinement lists pairwise in
//! `ceil(log2(threads))` stages, drops everything already in the global
//! closed list, evaluates the survivors as a batch, discards weak ones and
//! re-sorts the open list.
//!
//! Results do not depend on `threads`: work is split into contiguous chunks
//! of the score-ordered beam and the reduction keeps the first occurrence
//! in that order.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
#[cfg(not(target_arch = "wasm32"))]
use std::time::{Duration, Instant};
#[cfg(target_arch = "wasm32")]
use web_time::{Duration, Instant};

use rayon::slice::ParallelSliceMut;
use thiserror::Error;

use crate::concept::{compare_canonical, concept_length, hash_concept, CanonicalHash, Concept};
use crate::eval::{
    evaluate, evaluate_batch, is_weak, parallel_map, score, CoverageResult, Score, ScoreConfig,
};
use crate::kb::{ExampleSet, KbStatistics, KnowledgeBase};
use crate::refine::{MbSet, RefinementConfig, Refiner};

#[derive(Debug, Clone)]
pub struct SearchNode {
    pub concept: Concept,
    pub hash: CanonicalHash,
    /// Horizontal expansion: the length bound of the most recent expansion.
    pub he: usize,
    pub coverage: CoverageResult,
    pub score: Score,
    pub parent: Option<CanonicalHash>,
    pub parent_accuracy: Option<f64>,
    pub expandable: bool,
}

impl SearchNode {
    /// A fresh node; `he` starts at the concept length.
    pub fn new(
        concept: Concept,
        hash: CanonicalHash,
        coverage: CoverageResult,
        parent: Option<(CanonicalHash, f64)>,
        ctx: &SearchContext,
    ) -> Self {
        let he = concept_length(&concept);
        let parent_accuracy = parent.map(|p| p.1);
        let score = score(&coverage, ctx.examples, parent_accuracy, he, &ctx.score);
        SearchNode {
            concept,
            hash,
            he,
            coverage,
            score,
            parent: parent.map(|p| p.0),
            parent_accuracy,
            expandable: he < ctx.refinement.max_length,
        }
    }

    /// Records one expansion: `he` grows by one and the score is
    /// recomputed. Returns the bound to refine under, or `None` once the
    /// node has reached the maximum length.
    pub fn mark_expanded(&mut self, ctx: &SearchContext) -> Option<usize> {
        let max_len = ctx.refinement.max_length;
        if self.he >= max_len {
            self.expandable = false;
            return None;
        }
        self.he += 1;
        self.expandable = self.he < max_len;
        self.rescore(ctx);
        Some(self.he)
    }

    fn rescore(&mut self, ctx: &SearchContext) {
        self.score = score(
            &self.coverage,
            ctx.examples,
            self.parent_accuracy,
            self.he,
            &ctx.score,
        );
    }
}

/// Descending score, then ascending canonical order.
pub fn compare_nodes(a: &SearchNode, b: &SearchNode) -> Ordering {
    b.score
        .value
        .total_cmp(&a.score.value)
        .then_with(|| compare_canonical(&a.concept, &b.concept))
}

/// The open list: a plain array, sorted after every batch of insertions.
#[derive(Debug, Clone, Default)]
pub struct OpenList {
    pub nodes: Vec<SearchNode>,
}

impl OpenList {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Indices of the `k` best expandable nodes; nodes stay in the list.
    pub fn extract_best_nodes(&self, k: usize) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.expandable)
            .map(|(i, _)| i)
            .take(k)
            .collect()
    }

    pub fn has_expandable(&self) -> bool {
        self.nodes.iter().any(|n| n.expandable)
    }

    pub fn sort(&mut self, pool: Option<&rayon::ThreadPool>) {
        match pool {
            Some(pool) => pool.install(|| self.nodes.par_sort_unstable_by(compare_nodes)),
            None => self.nodes.sort_unstable_by(compare_nodes),
        }
    }

    pub fn is_sorted(&self) -> bool {
        self.nodes
            .windows(2)
            .all(|w| compare_nodes(&w[0], &w[1]) != Ordering::Greater)
    }
}

/// The global closed list of concept hashes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClosedList {
    hashes: HashSet<u64>,
}

impl ClosedList {
    /// Returns false if the hash was already present.
    pub fn insert(&mut self, h: CanonicalHash) -> bool {
        self.hashes.insert(h.0)
    }

    pub fn contains(&self, h: CanonicalHash) -> bool {
        self.hashes.contains(&h.0)
    }

    pub fn len(&self) -> usize {
        self.hashes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hashes.is_empty()
    }

    pub fn sorted_hashes(&self) -> Vec<u64> {
        let mut v: Vec<u64> = self.hashes.iter().copied().collect();
        v.sort_unstable();
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub concept: Concept,
    pub hash: CanonicalHash,
    pub parent: CanonicalHash,
    pub parent_accuracy: f64,
}

/// One worker's output: refinements in generation order and the local
/// closed list holding their hashes.
#[derive(Debug, Clone, Default)]
pub struct Expansion {
    pub refinements: Vec<Refinement>,
    pub local_closed: HashSet<u64>,
}

impl Expansion {
    pub fn push(&mut self, r: Refinement) -> bool {
        if self.local_closed.insert(r.hash.0) {
            self.refinements.push(r);
            true
        } else {
            false
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub beam_width: usize,
    pub limit: usize,
    pub noise: f64,
    pub max_execution_millis: Option<u64>,
    pub max_length: usize,
    pub target_accuracy: f64,
    pub threads: usize,
    pub score: ScoreConfig,
    pub use_inverse_roles: bool,
    pub use_cardinality: bool,
    pub use_disjunction: bool,
    pub use_negation: bool,
    /// Record every evaluated hash and every open-list insertion.
    pub trace: bool,
    /// Structurally compare concepts whose hashes meet in the reduction.
    pub verify_hashes: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
        SearchConfig {
            beam_width: threads,
            limit: 1,
            noise: 0.0,
            max_execution_millis: None,
            max_length: 10,
            target_accuracy: 1.0,
            threads,
            score: ScoreConfig::default(),
            use_inverse_roles: true,
            use_cardinality: true,
            use_disjunction: true,
            use_negation: true,
            trace: false,
            verify_hashes: false,
        }
    }
}

impl SearchConfig {
    pub fn refinement_config(&self, stats: &KbStatistics) -> RefinementConfig {
        RefinementConfig {
            max_cardinality: stats.max_fillers.clone(),
            use_inverse_roles: self.use_inverse_roles,
            use_cardinality: self.use_cardinality,
            use_disjunction: self.use_disjunction,
            use_negation: self.use_negation,
            max_length: self.max_length.max(1),
        }
    }
}

/// Everything expansion and evaluation need, shared read-only by workers.
pub struct SearchContext<'a> {
    pub kb: &'a KnowledgeBase,
    pub examples: &'a ExampleSet,
    pub stats: &'a KbStatistics,
    pub refinement: &'a RefinementConfig,
    pub score: ScoreConfig,
    pub noise: f64,
    pub refiner: Refiner<'a>,
}

impl<'a> SearchContext<'a> {
    pub fn new(
        kb: &'a KnowledgeBase,
        examples: &'a ExampleSet,
        stats: &'a KbStatistics,
        mb: &MbSet,
        refinement: &'a RefinementConfig,
        score: ScoreConfig,
        noise: f64,
    ) -> Self {
        SearchContext {
            kb,
            examples,
            stats,
            refinement,
            score,
            noise,
            refiner: Refiner::new(kb, stats, mb, refinement),
        }
    }

    pub fn root(&self) -> SearchNode {
        let top = Concept::Top;
        let cov = evaluate(&top, self.kb, self.examples);
        SearchNode::new(top.clone(), hash_concept(&top), cov, None, self)
    }
}

/// Expands one node: refinements up to `he + 1`, deduplicated through
/// `local`. Increments the node's `he` and marks it non-expandable once the
/// bound reaches the maximum length.
pub fn expand_single_node(node: &mut SearchNode, ctx: &SearchContext, local: &mut Expansion) {
    let parent_accuracy = node.score.accuracy;
    let Some(bound) = node.mark_expanded(ctx) else {
        return;
    };
    for concept in ctx.refiner.refine(&node.concept, bound) {
        let hash = hash_concept(&concept);
        local.push(Refinement {
            concept,
            hash,
            parent: node.hash,
            parent_accuracy,
        });
    }
}

/// Expands `nodes` (in order) split into `threads` contiguous chunks; one
/// [`Expansion`] per chunk, in chunk order.
pub fn expand_nodes(nodes: &mut [SearchNode], ctx: &SearchContext, threads: usize) -> Vec<Expansion> {
    if nodes.is_empty() {
        return Vec::new();
    }
    let threads = threads.max(1).min(nodes.len());
    let chunk = nodes.len().div_ceil(threads);
    if threads == 1 {
        let mut e = Expansion::default();
        nodes.iter_mut().for_each(|n| expand_single_node(n, ctx, &mut e));
        return vec![e];
    }
    std::thread::scope(|s| {
        let handles: Vec<_> = nodes
            .chunks_mut(chunk)
            .map(|part| {
                s.spawn(move || {
                    let mut e = Expansion::default();
                    part.iter_mut().for_each(|n| expand_single_node(n, ctx, &mut e));
                    e
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("expansion worker panicked"))
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("hash collision on {hash}: `{first:?}` vs `{second:?}`")]
pub struct HashCollision {
    pub hash: CanonicalHash,
    pub first: Concept,
    pub second: Concept,
}

/// Checks that no two structurally different concepts share a hash.
pub fn verify_hashes(lists: &[Expansion]) -> Result<(), HashCollision> {
    let mut seen: HashMap<u64, &Concept> = HashMap::new();
    for r in lists.iter().flat_map(|e| &e.refinements) {
        if let Some(prev) = seen.insert(r.hash.0, &r.concept) {
            if *prev != r.concept {
                return Err(HashCollision {
                    hash: r.hash,
                    first: prev.clone(),
                    second: r.concept.clone(),
                });
            }
        }
    }
    Ok(())
}

fn merge_pair(mut left: Expansion, right: Expansion) -> Expansion {
    for r in right.refinements {
        left.push(r);
    }
    left
}

/// Multi-stage pairwise reduction: stage `s` merges lists `i` and
/// `i + 2^s`, keeping the lower index's copy of any duplicate. Survivors
/// already in `rht` are dropped. Output is ordered by list index, then by
/// each list's own order.
pub fn reduce_redundant(lists: Vec<Expansion>, rht: &ClosedList, threads: usize) -> Vec<Refinement> {
    let mut level: Vec<Expansion> = lists;
    while level.len() > 1 {
        let mut pairs = Vec::with_capacity(level.len().div_ceil(2));
        let mut it = level.into_iter();
        while let Some(left) = it.next() {
            pairs.push((left, it.next()));
        }
        let merge = |(l, r): (Expansion, Option<Expansion>)| match r {
            Some(r) => merge_pair(l, r),
            None => l,
        };
        level = if threads > 1 && pairs.len() > 1 {
            std::thread::scope(|s| {
                let handles: Vec<_> = pairs.into_iter().map(|p| s.spawn(move || merge(p))).collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("reduction worker panicked"))
                    .collect()
            })
        } else {
            pairs.into_iter().map(merge).collect()
        };
    }
    level
        .pop()
        .map(|e| {
            e.refinements
                .into_iter()
                .filter(|r| !rht.contains(r.hash))
                .collect()
        })
        .unwrap_or_default()
}

/// Single-pass reference for [`reduce_redundant`].
pub fn reduce_sequential(lists: &[Expansion], rht: &ClosedList) -> Vec<Refinement> {
    let mut seen = HashSet::new();
    lists
        .iter()
        .flat_map(|e| &e.refinements)
        .filter(|r| !rht.contains(r.hash) && seen.insert(r.hash.0))
        .cloned()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IterationStats {
    pub expanded: usize,
    pub generated: usize,
    pub redundant_dropped: usize,
    pub weak_dropped: usize,
    pub open_list_size: usize,
    pub elapsed_millis: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchStatus {
    /// A hypothesis reached the target accuracy.
    Solved,
    /// The time budget ran out first.
    Budget,
    /// No expandable nodes remained.
    Exhausted,
}

impl SearchStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SearchStatus::Solved => "solved",
            SearchStatus::Budget => "budget",
            SearchStatus::Exhausted => "exhausted",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Hypothesis {
    pub concept: Concept,
    pub hash: CanonicalHash,
    pub coverage: CoverageResult,
    pub score: Score,
}

#[derive(Debug, Clone, Default)]
pub struct SearchTrace {
    /// Hash of every concept handed to the evaluator, in order.
    pub evaluated: Vec<u64>,
    /// `(hash, score value bits)` of every open-list insertion.
    pub inserted: Vec<(u64, u64)>,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub hypotheses: Vec<Hypothesis>,
    pub status: SearchStatus,
    pub iterations: Vec<IterationStats>,
    pub closed: ClosedList,
    pub trace: Option<SearchTrace>,
    pub elapsed: Duration,
}

impl SearchOutcome {
    pub fn best(&self) -> Option<&Hypothesis> {
        self.hypotheses.first()
    }
}

/// Ranking of the final hypotheses: accuracy, then search score, then
/// canonical order.
pub fn compare_final(a: &SearchNode, b: &SearchNode) -> Ordering {
    b.score
        .accuracy
        .total_cmp(&a.score.accuracy)
        .then_with(|| compare_nodes(a, b))
}

/// Search state owned by a coordinator; shared by the local loop and the
/// cluster master.
pub struct SearchState {
    pub open: OpenList,
    pub closed: ClosedList,
    pub iterations: Vec<IterationStats>,
    pub trace: Option<SearchTrace>,
    pub started: Instant,
    pool: Option<rayon::ThreadPool>,
}

impl SearchState {
    pub fn new(root: SearchNode, threads: usize, trace: bool) -> Self {
        let mut closed = ClosedList::default();
        closed.insert(root.hash);
        let mut trace = trace.then(SearchTrace::default);
        if let Some(t) = trace.as_mut() {
            t.evaluated.push(root.hash.0);
            t.inserted.push((root.hash.0, root.score.value.to_bits()));
        }
        let pool = (threads > 1)
            .then(|| rayon::ThreadPoolBuilder::new().num_threads(threads).build().ok())
            .flatten();
        SearchState {
            open: OpenList { nodes: vec![root] },
            closed,
            iterations: Vec::new(),
            trace,
            started: Instant::now(),
            pool,
        }
    }

    pub fn solved(&self, target: f64) -> bool {
        self.open
            .nodes
            .iter()
            .any(|n| n.score.accuracy >= target - 1e-12)
    }

    pub fn out_of_time(&self, budget: Option<u64>) -> bool {
        budget.is_some_and(|ms| self.started.elapsed() >= Duration::from_millis(ms))
    }

    /// Appends evaluated nodes and re-sorts the open list.
    pub fn absorb(&mut self, nodes: Vec<SearchNode>) {
        if let Some(t) = self.trace.as_mut() {
            t.inserted
                .extend(nodes.iter().map(|n| (n.hash.0, n.score.value.to_bits())));
        }
        self.open.nodes.extend(nodes);
        self.open.sort(self.pool.as_ref());
    }

    pub fn record_evaluated<'r>(&mut self, hashes: impl IntoIterator<Item = &'r CanonicalHash>) {
        if let Some(t) = self.trace.as_mut() {
            t.evaluated.extend(hashes.into_iter().map(|h| h.0));
        }
    }

    pub fn finish(self, limit: usize, status: SearchStatus) -> SearchOutcome {
        let mut best: Vec<&SearchNode> = self.open.nodes.iter().collect();
        best.sort_by(|a, b| compare_final(a, b));
        let hypotheses = best
            .into_iter()
            .take(limit.max(1))
            .map(|n| Hypothesis {
                concept: n.concept.clone(),
                hash: n.hash,
                coverage: n.coverage.clone(),
                score: n.score,
            })
            .collect();
        SearchOutcome {
            hypotheses,
            status,
            iterations: self.iterations,
            closed: self.closed,
            trace: self.trace,
            elapsed: self.started.elapsed(),
        }
    }
}

/// Turns evaluated refinements into open-list nodes, dropping weak ones.
/// Returns the nodes and the number dropped.
pub fn keep_non_weak(
    refinements: Vec<Refinement>,
    coverage: Vec<CoverageResult>,
    ctx: &SearchContext,
) -> (Vec<SearchNode>, usize) {
    let total = refinements.len();
    let nodes: Vec<SearchNode> = refinements
        .into_iter()
        .zip(coverage)
        .filter(|(_, cov)| !is_weak(cov, ctx.examples, ctx.noise))
        .map(|(r, cov)| {
            SearchNode::new(r.concept, r.hash, cov, Some((r.parent, r.parent_accuracy)), ctx)
        })
        .collect();
    let dropped = total - nodes.len();
    (nodes, dropped)
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error(transparent)]
    Collision(#[from] HashCollision),
}

/// Runs the beam search to a solution, exhaustion or the time budget.
pub fn run_search(
    kb: &KnowledgeBase,
    examples: &ExampleSet,
    stats: &KbStatistics,
    mb: &MbSet,
    cfg: &SearchConfig,
) -> Result<SearchOutcome, SearchError> {
    let rcfg = cfg.refinement_config(stats);
    let ctx = SearchContext::new(kb, examples, stats, mb, &rcfg, cfg.score, cfg.noise);
    let threads = cfg.threads.max(1);
    let beam = cfg.beam_width.max(1);
    let mut state = SearchState::new(ctx.root(), threads, cfg.trace);

    let status = loop {
        if state.solved(cfg.target_accuracy) {
            break SearchStatus::Solved;
        }
        if state.out_of_time(cfg.max_execution_millis) {
            break SearchStatus::Budget;
        }
        let picked = state.open.extract_best_nodes(beam);
        if picked.is_empty() {
            break SearchStatus::Exhausted;
        }

        // Expand copies, then write the updated he/score back.
        let mut batch: Vec<SearchNode> = picked.iter().map(|&i| state.open.nodes[i].clone()).collect();
        let lists = expand_nodes(&mut batch, &ctx, threads);
        for (&i, node) in picked.iter().zip(batch) {
            state.open.nodes[i] = node;
        }
        if cfg.verify_hashes {
            verify_hashes(&lists)?;
        }
        let generated: usize = lists.iter().map(|e| e.refinements.len()).sum();
        let fresh = reduce_redundant(lists, &state.closed, threads);
        for r in &fresh {
            state.closed.insert(r.hash);
        }
        state.record_evaluated(fresh.iter().map(|r| &r.hash));

        let concepts: Vec<Concept> = fresh.iter().map(|r| r.concept.clone()).collect();
        let coverage = evaluate_batch(&concepts, kb, examples, threads);
        let kept = fresh.len();
        let (nodes, weak) = keep_non_weak(fresh, coverage, &ctx);
        state.absorb(nodes);

        state.iterations.push(IterationStats {
            expanded: picked.len(),
            generated,
            redundant_dropped: generated - kept,
            weak_dropped: weak,
            open_list_size: state.open.len(),
            elapsed_millis: state.started.elapsed().as_millis() as u64,
        });
    };
    Ok(state.finish(cfg.limit, status))
}

/// Hashes of `concepts` in parallel; used by callers that need them in bulk.
pub fn hash_all(concepts: &[Concept], threads: usize) -> Vec<CanonicalHash> {
    parallel_map(concepts, threads, hash_concept)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn refinement(id: u32) -> Refinement {
        let concept = Concept::Atomic(id);
        Refinement {
            hash: hash_concept(&concept),
            concept,
            parent: CanonicalHash(0),
            parent_accuracy: 0.0,
        }
    }

    fn expansion(ids: &[u32]) -> Expansion {
        let mut e = Expansion::default();
        for &i in ids {
            e.push(refinement(i));
        }
        e
    }

    fn ids(rs: &[Refinement]) -> Vec<u32> {
        rs.iter()
            .map(|r| match r.concept {
                Concept::Atomic(a) => a,
                _ => unreachable!(),
            })
            .collect()
    }

    #[test]
    fn disjoint_lists_concatenate() {
        let out = reduce_redundant(vec![expansion(&[1, 2]), expansion(&[3])], &ClosedList::default(), 2);
        assert_eq!(ids(&out), vec![1, 2, 3]);
    }

    #[test]
    fn lower_index_survives() {
        let mut a = expansion(&[7]);
        a.refinements[0].parent = CanonicalHash(100);
        let mut b = expansion(&[7]);
        b.refinements[0].parent = CanonicalHash(200);
        let out = reduce_redundant(vec![a, b], &ClosedList::default(), 2);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].parent, CanonicalHash(100));
    }

    #[test]
    fn closed_list_filters() {
        let mut rht = ClosedList::default();
        rht.insert(hash_concept(&Concept::Atomic(2)));
        let out = reduce_redundant(vec![expansion(&[1, 2]), expansion(&[2, 3])], &rht, 1);
        assert_eq!(ids(&out), vec![1, 3]);
        assert!(reduce_redundant(Vec::new(), &rht, 4).is_empty());
    }

    #[test]
    fn closed_list_inserts_once() {
        let mut rht = ClosedList::default();
        assert!(rht.insert(CanonicalHash(5)));
        assert!(!rht.insert(CanonicalHash(5)));
        assert!(rht.contains(CanonicalHash(5)));
        assert_eq!(rht.len(), 1);
    }
}
