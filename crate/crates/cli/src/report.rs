//! Run reports, printed as text or as JSON lines.
//!
//! JSON lines, in order:
//!
//! * `{"type":"iteration","index",...}` once per search iteration,
//! * `{"type":"report","status","wall_millis","hypotheses":[...]}` last.

use std::io::{self, Write};

use dlpar_core::concept::{concept_length, render};
use dlpar_core::search::{IterationStats, SearchOutcome};
use dlpar_core::SymbolTable;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub concept: String,
    pub pos_covered: u32,
    pub neg_covered: u32,
    pub accuracy: f64,
    pub length: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationReport {
    pub index: usize,
    pub expanded: usize,
    pub generated: usize,
    pub redundant_dropped: usize,
    pub weak_dropped: usize,
    pub open_list_size: usize,
    pub elapsed_millis: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub status: &'static str,
    pub wall_millis: u64,
    pub closed_list_size: usize,
    pub hypotheses: Vec<HypothesisReport>,
    #[serde(skip)]
    pub iterations: Vec<IterationReport>,
}

impl RunReport {
    pub fn new(outcome: &SearchOutcome, symbols: &SymbolTable) -> Self {
        let hypotheses = outcome
            .hypotheses
            .iter()
            .map(|h| HypothesisReport {
                concept: render(&h.concept, symbols).unwrap_or_else(|e| format!("<{e}>")),
                pos_covered: h.coverage.pos_covered,
                neg_covered: h.coverage.neg_covered,
                accuracy: h.score.accuracy,
                length: concept_length(&h.concept),
                score: h.score.value,
            })
            .collect();
        let iterations = outcome
            .iterations
            .iter()
            .enumerate()
            .map(|(index, s): (usize, &IterationStats)| IterationReport {
                index,
                expanded: s.expanded,
                generated: s.generated,
                redundant_dropped: s.redundant_dropped,
                weak_dropped: s.weak_dropped,
                open_list_size: s.open_list_size,
                elapsed_millis: s.elapsed_millis,
            })
            .collect();
        RunReport {
            status: outcome.status.as_str(),
            wall_millis: outcome.elapsed.as_millis() as u64,
            closed_list_size: outcome.closed.len(),
            hypotheses,
            iterations,
        }
    }

    pub fn write_json(&self, out: &mut dyn Write) -> io::Result<()> {
        #[derive(Serialize)]
        struct Tagged<'a, T: Serialize> {
            #[serde(rename = "type")]
            kind: &'static str,
            #[serde(flatten)]
            body: &'a T,
        }
        for it in &self.iterations {
            serde_json::to_writer(&mut *out, &Tagged { kind: "iteration", body: it })?;
            writeln!(out)?;
        }
        serde_json::to_writer(&mut *out, &Tagged { kind: "report", body: self })?;
        writeln!(out)
    }

    pub fn write_text(&self, out: &mut dyn Write) -> io::Result<()> {
        writeln!(out, "status: {}", self.status)?;
        writeln!(
            out,
            "iterations: {}  closed list: {}  wall: {} ms",
            self.iterations.len(),
            self.closed_list_size,
            self.wall_millis
        )?;
        for (i, h) in self.hypotheses.iter().enumerate() {
            writeln!(
                out,
                "{}. {}  pos={} neg={} acc={} len={} score={}",
                i + 1,
                h.concept,
                h.pos_covered,
                h.neg_covered,
                h.accuracy,
                h.length,
                h.score
            )?;
        }
        Ok(())
    }
}
