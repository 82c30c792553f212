//! Distributed beam search: a master owning the open and closed lists and
//! any number of workers that expand and evaluate blocks of the beam.
//!
//! Phases run strictly in order: discovery (UDP), probing (KB transfer and
//! a timed expansion of `Thing`), learning, termination.

pub mod block;
pub mod discovery;
pub mod master;
pub mod message;
pub mod phase;
pub mod wire;
pub mod worker;

use std::io;

use thiserror::Error;

pub use block::{deserialize_block, serialize_block, BlockNode};
pub use master::{run_master, ClusterOutcome, MasterConfig, WorkerInfo};
pub use message::Message;
pub use phase::{Phase, PhaseMachine};
pub use wire::{Frame, MessageType};
pub use worker::{Worker, WorkerConfig};

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("no workers answered discovery")]
    NoWorkers,
    #[error("expected {expected} workers, {found} answered")]
    NotEnoughWorkers { expected: usize, found: usize },
    #[error(transparent)]
    Message(#[from] message::MessageError),
    #[error("protocol: {0}")]
    Protocol(String),
    #[error(transparent)]
    Phase(#[from] phase::PhaseError),
    #[error("all workers lost")]
    AllWorkersLost { partial: Box<dlpar_core::search::SearchOutcome> },
}
