//! Hypothesis blocks: the unit of work exchanged between master and workers.
//!
//! ```text
//! count u32 | { byteLength u32 | concept | he u16 | pos u32 | neg u32 | score f64 }*
//! ```
//!
//! Encoding and decoding split the block into contiguous chunks handled on
//! separate threads; chunk outputs are joined in node order.

use dlpar_core::codec::{Reader, Writer};
use dlpar_core::concept::{decode, encode, hash_concept, ConceptDecodeError};
use dlpar_core::eval::parallel_map;
use dlpar_core::{CanonicalHash, Concept};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockNode {
    pub concept: Concept,
    pub he: u16,
    pub pos_covered: u32,
    pub neg_covered: u32,
    pub score: f64,
}

impl BlockNode {
    pub fn hash(&self) -> CanonicalHash {
        hash_concept(&self.concept)
    }

    fn encoded_len(concept_len: usize) -> usize {
        4 + concept_len + 2 + 4 + 4 + 8
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum BlockError {
    #[error("block truncated at byte {0}")]
    Truncated(usize),
    #[error("block declares {declared} nodes but holds {found}")]
    Count { declared: u32, found: usize },
    #[error("{0} trailing bytes after block")]
    Trailing(usize),
    #[error("node {index}: {source}")]
    Node {
        index: usize,
        #[source]
        source: ConceptDecodeError,
    },
}

fn encode_node(n: &BlockNode) -> Vec<u8> {
    let concept = encode(&n.concept);
    let mut w = Writer::with_capacity(BlockNode::encoded_len(concept.len()));
    w.u32(concept.len() as u32)
        .bytes(&concept)
        .u16(n.he)
        .u32(n.pos_covered)
        .u32(n.neg_covered)
        .f64(n.score);
    w.into_inner()
}

pub fn serialize_block(nodes: &[BlockNode], threads: usize) -> Vec<u8> {
    let parts = parallel_map(nodes, threads, encode_node);
    let total: usize = parts.iter().map(Vec::len).sum();
    let mut out = Vec::with_capacity(4 + total);
    out.extend_from_slice(&(nodes.len() as u32).to_be_bytes());
    for p in parts {
        out.extend_from_slice(&p);
    }
    out
}

/// Byte span of each node record, found by walking the length prefixes.
fn node_spans(bytes: &[u8]) -> Result<Vec<(usize, usize)>, BlockError> {
    let mut r = Reader::new(bytes);
    let declared = r.u32().map_err(|_| BlockError::Truncated(0))?;
    let mut spans = Vec::with_capacity(declared.min(1 << 20) as usize);
    while spans.len() < declared as usize {
        let start = r.position();
        if r.is_at_end() {
            return Err(BlockError::Count {
                declared,
                found: spans.len(),
            });
        }
        let len = r.u32().map_err(|_| BlockError::Truncated(start))? as usize;
        let rest = BlockNode::encoded_len(len) - 4;
        r.take(rest).map_err(|_| BlockError::Truncated(start))?;
        spans.push((start, r.position()));
    }
    if !r.is_at_end() {
        return Err(BlockError::Trailing(r.remaining()));
    }
    Ok(spans)
}

fn decode_node(record: &[u8]) -> Result<BlockNode, ConceptDecodeError> {
    // Spans were validated, so the fixed-width reads cannot fail.
    let mut r = Reader::new(record);
    let len = r.u32().expect("validated span") as usize;
    let concept = decode(r.take(len).expect("validated span"))?;
    Ok(BlockNode {
        concept,
        he: r.u16().expect("validated span"),
        pos_covered: r.u32().expect("validated span"),
        neg_covered: r.u32().expect("validated span"),
        score: r.f64().expect("validated span"),
    })
}

pub fn deserialize_block(bytes: &[u8], threads: usize) -> Result<Vec<BlockNode>, BlockError> {
    let spans = node_spans(bytes)?;
    let decoded = parallel_map(&spans, threads, |&(a, b)| decode_node(&bytes[a..b]));
    decoded
        .into_iter()
        .enumerate()
        .map(|(index, r)| r.map_err(|source| BlockError::Node { index, source }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(c: Concept, he: u16) -> BlockNode {
        BlockNode {
            concept: c,
            he,
            pos_covered: 3,
            neg_covered: 1,
            score: 0.625,
        }
    }

    #[test]
    fn empty_block_is_a_zero_count() {
        assert_eq!(serialize_block(&[], 4), vec![0, 0, 0, 0]);
        assert_eq!(deserialize_block(&[0, 0, 0, 0], 4).unwrap(), vec![]);
    }

    #[test]
    fn single_node_layout() {
        let bytes = serialize_block(&[node(Concept::Top, 1)], 1);
        let mut expected = vec![0, 0, 0, 1, 0, 0, 0, 1, 0x00, 0, 1, 0, 0, 0, 3, 0, 0, 0, 1];
        expected.extend_from_slice(&0.625f64.to_be_bytes());
        assert_eq!(bytes, expected);
    }

    #[test]
    fn count_and_trailing_errors() {
        let bytes = serialize_block(&[node(Concept::Top, 1), node(Concept::Atomic(2), 1)], 1);
        let mut fewer = bytes.clone();
        fewer[3] = 1;
        assert!(matches!(deserialize_block(&fewer, 1), Err(BlockError::Trailing(_))));
        let mut more = bytes.clone();
        more[3] = 3;
        assert_eq!(
            deserialize_block(&more, 1),
            Err(BlockError::Count { declared: 3, found: 2 })
        );
        assert!(matches!(
            deserialize_block(&bytes[..bytes.len() - 3], 1),
            Err(BlockError::Truncated(_))
        ));
    }

    #[test]
    fn bad_concept_reports_index() {
        let mut bytes = serialize_block(&[node(Concept::Top, 1), node(Concept::Top, 2)], 1);
        // Second node's concept tag.
        let second = 4 + BlockNode::encoded_len(1) + 4;
        bytes[second] = 0x7f;
        match deserialize_block(&bytes, 2) {
            Err(BlockError::Node { index: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
    }
}
