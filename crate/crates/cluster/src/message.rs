//! Typed payloads carried by [`Frame`]s.

use dlpar_core::codec::{DecodeError, Reader, Writer};
use dlpar_core::eval::ScoreConfig;
use thiserror::Error;

use crate::block::{deserialize_block, serialize_block, BlockError, BlockNode};
use crate::wire::{Frame, FrameError, MessageType};

/// Search parameters a worker needs to expand and score exactly like the
/// master.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkerParams {
    pub use_inverse_roles: bool,
    pub use_cardinality: bool,
    pub use_disjunction: bool,
    pub use_negation: bool,
    pub max_length: u16,
    pub noise: f64,
    pub score: ScoreConfig,
    /// How many hypotheses to report on termination.
    pub limit: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KbTransfer {
    /// A materialized KB in the binary image format.
    pub image: Vec<u8>,
    pub positives: Vec<u32>,
    pub negatives: Vec<u32>,
    pub params: WorkerParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpandResult {
    /// Evaluated, non-weak, locally deduplicated refinements.
    pub nodes: Vec<BlockNode>,
    /// For each node, the index of its parent in the task block.
    pub parents: Vec<u32>,
    /// Hashes of refinements dropped as weak.
    pub weak: Vec<u64>,
    /// Refinements generated before any deduplication.
    pub generated: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Hello { master_port: u16 },
    HelloAck { cores: u32 },
    KbTransfer(Box<KbTransfer>),
    KbAck { individuals: u32 },
    Probe,
    ProbeResult { cores: u32, elapsed_millis: u32 },
    ExpandTask { nodes: Vec<BlockNode> },
    ExpandResult(ExpandResult),
    Terminate,
    BestHypotheses { nodes: Vec<BlockNode> },
    Error { message: String },
}

#[derive(Debug, Error)]
pub enum MessageError {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("block: {0}")]
    Block(#[from] BlockError),
    #[error("payload: {0}")]
    Payload(#[from] DecodeError),
    #[error("{0} trailing payload bytes")]
    Trailing(usize),
    #[error("expected {expected:?}, got {got:?}")]
    Unexpected {
        expected: MessageType,
        got: MessageType,
    },
    #[error("peer reported: {0}")]
    Remote(String),
}

impl Message {
    pub fn kind(&self) -> MessageType {
        match self {
            Message::Hello { .. } => MessageType::Hello,
            Message::HelloAck { .. } => MessageType::HelloAck,
            Message::KbTransfer(_) => MessageType::KbTransfer,
            Message::KbAck { .. } => MessageType::KbAck,
            Message::Probe => MessageType::Probe,
            Message::ProbeResult { .. } => MessageType::ProbeResult,
            Message::ExpandTask { .. } => MessageType::ExpandTask,
            Message::ExpandResult(_) => MessageType::ExpandResult,
            Message::Terminate => MessageType::Terminate,
            Message::BestHypotheses { .. } => MessageType::BestHypotheses,
            Message::Error { .. } => MessageType::Error,
        }
    }

    /// `threads` parallelizes block serialization; output does not depend on it.
    pub fn to_frame(&self, threads: usize) -> Frame {
        let mut w = Writer::new();
        match self {
            Message::Hello { master_port } => {
                w.u16(*master_port);
            }
            Message::HelloAck { cores } => {
                w.u32(*cores);
            }
            Message::KbTransfer(t) => {
                w.u32(t.image.len() as u32).bytes(&t.image);
                for ids in [&t.positives, &t.negatives] {
                    w.u32(ids.len() as u32);
                    ids.iter().for_each(|&i| {
                        w.u32(i);
                    });
                }
                let p = &t.params;
                let flags = p.use_inverse_roles as u8
                    | (p.use_cardinality as u8) << 1
                    | (p.use_disjunction as u8) << 2
                    | (p.use_negation as u8) << 3;
                w.u8(flags)
                    .u16(p.max_length)
                    .f64(p.noise)
                    .f64(p.score.gain_bonus)
                    .f64(p.score.expansion_penalty)
                    .u32(p.limit);
            }
            Message::KbAck { individuals } => {
                w.u32(*individuals);
            }
            Message::Probe | Message::Terminate => {}
            Message::ProbeResult { cores, elapsed_millis } => {
                w.u32(*cores).u32(*elapsed_millis);
            }
            Message::ExpandTask { nodes } | Message::BestHypotheses { nodes } => {
                return Frame::new(self.kind(), serialize_block(nodes, threads));
            }
            Message::ExpandResult(r) => {
                let block = serialize_block(&r.nodes, threads);
                w.u32(block.len() as u32).bytes(&block);
                w.u32(r.parents.len() as u32);
                r.parents.iter().for_each(|&p| {
                    w.u32(p);
                });
                w.u32(r.weak.len() as u32);
                r.weak.iter().for_each(|&h| {
                    w.u64(h);
                });
                w.u32(r.generated);
            }
            Message::Error { message } => {
                w.str(message);
            }
        }
        Frame::new(self.kind(), w.into_inner())
    }

    pub fn from_frame(frame: &Frame, threads: usize) -> Result<Self, MessageError> {
        let bytes = &frame.payload;
        let mut r = Reader::new(bytes);
        let msg = match frame.kind {
            MessageType::Hello => Message::Hello { master_port: r.u16()? },
            MessageType::HelloAck => Message::HelloAck { cores: r.u32()? },
            MessageType::KbTransfer => {
                let n = r.u32()? as usize;
                let image = r.take(n)?.to_vec();
                let mut ids = || -> Result<Vec<u32>, DecodeError> {
                    let n = r.count(4)?;
                    (0..n).map(|_| r.u32()).collect()
                };
                let positives = ids()?;
                let negatives = ids()?;
                let flags = r.u8()?;
                if flags > 0x0f {
                    return Err(DecodeError::Invalid(format!("flags {flags:#04x}")).into());
                }
                let params = WorkerParams {
                    use_inverse_roles: flags & 1 != 0,
                    use_cardinality: flags & 2 != 0,
                    use_disjunction: flags & 4 != 0,
                    use_negation: flags & 8 != 0,
                    max_length: r.u16()?,
                    noise: r.f64()?,
                    score: ScoreConfig {
                        gain_bonus: r.f64()?,
                        expansion_penalty: r.f64()?,
                    },
                    limit: r.u32()?,
                };
                Message::KbTransfer(Box::new(KbTransfer {
                    image,
                    positives,
                    negatives,
                    params,
                }))
            }
            MessageType::KbAck => Message::KbAck { individuals: r.u32()? },
            MessageType::Probe => Message::Probe,
            MessageType::Terminate => Message::Terminate,
            MessageType::ProbeResult => Message::ProbeResult {
                cores: r.u32()?,
                elapsed_millis: r.u32()?,
            },
            MessageType::ExpandTask => Message::ExpandTask {
                nodes: deserialize_block(bytes, threads)?,
            },
            MessageType::BestHypotheses => Message::BestHypotheses {
                nodes: deserialize_block(bytes, threads)?,
            },
            MessageType::ExpandResult => {
                let n = r.u32()? as usize;
                let nodes = deserialize_block(r.take(n)?, threads)?;
                let np = r.count(4)?;
                let parents = (0..np).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
                let nw = r.count(8)?;
                let weak = (0..nw).map(|_| r.u64()).collect::<Result<Vec<_>, _>>()?;
                let generated = r.u32()?;
                if parents.len() != nodes.len() {
                    return Err(DecodeError::Invalid(format!(
                        "{} parents for {} nodes",
                        parents.len(),
                        nodes.len()
                    ))
                    .into());
                }
                Message::ExpandResult(ExpandResult {
                    nodes,
                    parents,
                    weak,
                    generated,
                })
            }
            MessageType::Error => Message::Error { message: r.str()? },
        };
        // Block payloads were consumed by the block decoder.
        let block_only = matches!(frame.kind, MessageType::ExpandTask | MessageType::BestHypotheses);
        if !block_only && !r.is_at_end() {
            return Err(MessageError::Trailing(r.remaining()));
        }
        Ok(msg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_payload_sizes() {
        assert_eq!(Message::Probe.to_frame(1).payload.len(), 0);
        assert_eq!(Message::Hello { master_port: 7 }.to_frame(1).payload, vec![0, 7]);
        let probe = Message::ProbeResult {
            cores: 8,
            elapsed_millis: 12,
        };
        assert_eq!(probe.to_frame(1).payload, vec![0, 0, 0, 8, 0, 0, 0, 12]);
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut f = Message::HelloAck { cores: 2 }.to_frame(1);
        f.payload.push(0);
        assert!(matches!(Message::from_frame(&f, 1), Err(MessageError::Trailing(1))));
    }

    #[test]
    fn mismatched_parents_rejected() {
        let msg = Message::ExpandResult(ExpandResult {
            nodes: vec![],
            parents: vec![0],
            weak: vec![],
            generated: 0,
        });
        assert!(Message::from_frame(&msg.to_frame(1), 1).is_err());
    }
}
