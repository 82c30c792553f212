//! Parallel description-logic concept learning.
//!
//! The pipeline is: parse a [`kb::KnowledgeBase`], materialize its
//! hierarchies, derive [`kb::KbStatistics`] and the concrete-role
//! restriction set, then run [`search::run_search`], which drives the
//! [`refine`] operator and the bitset [`eval`] engine.

pub mod bitset;
pub mod codec;
pub mod concept;
pub mod eval;
pub mod fixtures;
pub mod gen;
pub mod kb;
pub mod refine;
pub mod search;

pub use bitset::Bitset;
pub use concept::{CanonicalHash, Concept, RoleExpr};
pub use kb::{ExampleSet, KbStatistics, KnowledgeBase, SymbolTable};

/// A parsed, materialized dataset with everything the learner derives from it.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub symbols: SymbolTable,
    pub kb: KnowledgeBase,
    pub examples: ExampleSet,
    pub stats: KbStatistics,
    pub mb: refine::MbSet,
}

impl Dataset {
    pub fn new(symbols: SymbolTable, kb: KnowledgeBase, examples: ExampleSet) -> Result<Self, kb::KbError> {
        let kb = kb.materialize()?;
        let stats = kb::compute_statistics(&kb);
        let mb = refine::build_mb(&kb, &stats);
        Ok(Dataset {
            symbols,
            kb,
            examples,
            stats,
            mb,
        })
    }

    pub fn parse(kb_text: &str, examples_text: &str) -> Result<Self, kb::KbError> {
        let (symbols, kb) = kb::parse_kb(kb_text)?;
        let examples = kb::parse_examples(examples_text, &symbols)?;
        Self::new(symbols, kb, examples)
    }

    pub fn trains() -> Self {
        Self::parse(fixtures::TRAINS_KB, fixtures::TRAINS_EXAMPLES).expect("bundled trains fixture")
    }

    pub fn smoke() -> Self {
        Self::parse(fixtures::SMOKE_KB, fixtures::SMOKE_EXAMPLES).expect("bundled smoke fixture")
    }

    pub fn search(&self, cfg: &search::SearchConfig) -> Result<search::SearchOutcome, search::SearchError> {
        search::run_search(&self.kb, &self.examples, &self.stats, &self.mb, cfg)
    }
}
