use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    Discovery,
    Probing,
    Learning,
    Terminating,
    Done,
}

impl Phase {
    pub fn next(self) -> Option<Phase> {
        match self {
            Phase::Discovery => Some(Phase::Probing),
            Phase::Probing => Some(Phase::Learning),
            Phase::Learning => Some(Phase::Terminating),
            Phase::Terminating => Some(Phase::Done),
            Phase::Done => None,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Phase::Discovery => "discovery",
            Phase::Probing => "probing",
            Phase::Learning => "learning",
            Phase::Terminating => "terminating",
            Phase::Done => "done",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("illegal phase transition {from} -> {to}")]
pub struct PhaseError {
    pub from: Phase,
    pub to: Phase,
}

/// Tracks the current phase and the path taken; only single forward steps
/// are accepted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseMachine {
    history: Vec<Phase>,
}

impl Default for PhaseMachine {
    fn default() -> Self {
        PhaseMachine {
            history: vec![Phase::Discovery],
        }
    }
}

impl PhaseMachine {
    pub fn current(&self) -> Phase {
        *self.history.last().expect("history starts non-empty")
    }

    pub fn advance(&mut self, to: Phase) -> Result<(), PhaseError> {
        let from = self.current();
        if from.next() != Some(to) {
            return Err(PhaseError { from, to });
        }
        self.history.push(to);
        Ok(())
    }

    pub fn history(&self) -> &[Phase] {
        &self.history
    }
}
