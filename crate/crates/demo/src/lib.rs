//! Browser bindings: evaluate, refine and learn over KB text.
//!
//! Every entry point takes the KB and example text and returns a JSON
//! string, either a result object or `{"error": ...}`.

use dlpar_core::concept::{concept_length, parse_concept, render};
use dlpar_core::eval::evaluate;
use dlpar_core::refine::Refiner;
use dlpar_core::search::SearchConfig;
use dlpar_core::{fixtures, Concept, Dataset};
use serde::Serialize;
use serde_json::{json, Value};
use wasm_bindgen::prelude::wasm_bindgen;

/// Refinement lists longer than this are cut.
pub const MAX_REFINEMENTS: usize = 400;

#[derive(Debug, Serialize)]
pub struct Coverage {
    pub concept: String,
    pub length: usize,
    pub pos: u32,
    pub neg: u32,
    pub accuracy: f64,
}

fn dataset(kb: &str, examples: &str) -> Result<Dataset, Value> {
    Dataset::parse(kb, examples).map_err(|e| json!({ "error": e.to_string() }))
}

fn concept(ds: &Dataset, text: &str) -> Result<Concept, Value> {
    parse_concept(text, &ds.symbols).map_err(|e| json!({ "error": e.to_string(), "caret": e.caret(text) }))
}

fn coverage(ds: &Dataset, c: &Concept) -> Coverage {
    let cov = evaluate(c, &ds.kb, &ds.examples);
    Coverage {
        concept: render(c, &ds.symbols).unwrap_or_default(),
        length: concept_length(c),
        pos: cov.pos_covered,
        neg: cov.neg_covered,
        accuracy: cov.accuracy(&ds.examples),
    }
}

pub fn eval_value(kb: &str, examples: &str, text: &str) -> Value {
    let run = || -> Result<Value, Value> {
        let ds = dataset(kb, examples)?;
        let c = concept(&ds, text)?;
        Ok(json!(coverage(&ds, &c)))
    };
    run().unwrap_or_else(|e| e)
}

pub fn refine_value(kb: &str, examples: &str, text: &str, bound: usize) -> Value {
    let run = || -> Result<Value, Value> {
        let ds = dataset(kb, examples)?;
        let c = concept(&ds, text)?;
        let rcfg = SearchConfig {
            max_length: bound.max(1),
            threads: 1,
            ..SearchConfig::default()
        }
        .refinement_config(&ds.stats);
        let refiner = Refiner::new(&ds.kb, &ds.stats, &ds.mb, &rcfg);
        let all = refiner.refine(&c, bound);
        let total = all.len();
        let shown: Vec<Coverage> = all.iter().take(MAX_REFINEMENTS).map(|r| coverage(&ds, r)).collect();
        Ok(json!({ "input": coverage(&ds, &c), "total": total, "refinements": shown }))
    };
    run().unwrap_or_else(|e| e)
}

pub fn learn_value(kb: &str, examples: &str, max_length: usize, beam: usize, limit: usize, max_millis: u64) -> Value {
    let run = || -> Result<Value, Value> {
        let ds = dataset(kb, examples)?;
        let cfg = SearchConfig {
            beam_width: beam.max(1),
            threads: 1,
            limit: limit.max(1),
            max_length: max_length.max(1),
            max_execution_millis: Some(max_millis),
            ..SearchConfig::default()
        };
        let out = ds.search(&cfg).map_err(|e| json!({ "error": e.to_string() }))?;
        let hypotheses: Vec<Coverage> = out.hypotheses.iter().map(|h| coverage(&ds, &h.concept)).collect();
        Ok(json!({
            "status": out.status.as_str(),
            "iterations": out.iterations.len(),
            "closed": out.closed.len(),
            "millis": out.elapsed.as_millis() as u64,
            "hypotheses": hypotheses,
        }))
    };
    run().unwrap_or_else(|e| e)
}

#[wasm_bindgen]
pub fn fixture_kb(name: &str) -> String {
    match name {
        "smoke" => fixtures::SMOKE_KB,
        _ => fixtures::TRAINS_KB,
    }
    .to_string()
}

#[wasm_bindgen]
pub fn fixture_examples(name: &str) -> String {
    match name {
        "smoke" => fixtures::SMOKE_EXAMPLES,
        _ => fixtures::TRAINS_EXAMPLES,
    }
    .to_string()
}

#[wasm_bindgen]
pub fn fixture_target(name: &str) -> String {
    match name {
        "smoke" => fixtures::SMOKE_TARGET,
        _ => fixtures::TRAINS_TARGET,
    }
    .to_string()
}

#[wasm_bindgen]
pub fn eval(kb: &str, examples: &str, concept: &str) -> String {
    eval_value(kb, examples, concept).to_string()
}

#[wasm_bindgen]
pub fn refine(kb: &str, examples: &str, concept: &str, bound: usize) -> String {
    refine_value(kb, examples, concept, bound).to_string()
}

#[wasm_bindgen]
pub fn learn(kb: &str, examples: &str, max_length: usize, beam: usize, limit: usize, max_millis: u32) -> String {
    learn_value(kb, examples, max_length, beam, limit, max_millis as u64).to_string()
}
