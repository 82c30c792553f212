//! Canonical binary encoding of concepts and the 64-bit FNV-1a hash over it.
//!
//! ```text
//! 0x00 Top
//! 0x01 Atomic     u32 class
//! 0x02 NotAtomic  u32 class
//! 0x03 Exists     role child        0x04 Forall  role child
//! 0x05 MinCard    u16 n role child  0x06 MaxCard u16 n role child
//! 0x07 And        u16 k, k children 0x08 Or      u16 k, k children
//! 0x09 BoolEq     u32 role, u8 value
//! 0x0A NumGeq     u32 role, f64     0x0B NumLeq  u32 role, f64
//! 0x0C StrEq      u32 role, u32 value index
//! role = u8 inverse flag, u32 role id
//! ```

use std::cmp::Ordering;

use thiserror::Error;

use super::{compare_canonical, Concept, RoleExpr};
use crate::codec::{DecodeError, Reader, Writer};

const TAG_TOP: u8 = 0x00;
const TAG_ATOMIC: u8 = 0x01;
const TAG_NOT_ATOMIC: u8 = 0x02;
const TAG_EXISTS: u8 = 0x03;
const TAG_FORALL: u8 = 0x04;
const TAG_MIN: u8 = 0x05;
const TAG_MAX: u8 = 0x06;
const TAG_AND: u8 = 0x07;
const TAG_OR: u8 = 0x08;
const TAG_BOOL: u8 = 0x09;
const TAG_GEQ: u8 = 0x0A;
const TAG_LEQ: u8 = 0x0B;
const TAG_STR: u8 = 0x0C;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Nesting limit for decoding untrusted input.
const MAX_DEPTH: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct CanonicalHash(pub u64);

impl std::fmt::Display for CanonicalHash {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConceptDecodeError {
    #[error(transparent)]
    Bytes(#[from] DecodeError),
    #[error("unknown concept tag {tag:#04x} at offset {offset}")]
    UnknownTag { tag: u8, offset: usize },
    #[error("non-canonical encoding at offset {offset}: {reason}")]
    NonCanonical { offset: usize, reason: &'static str },
    #[error("invalid value at offset {offset}: {reason}")]
    InvalidValue { offset: usize, reason: &'static str },
    #[error("{0} trailing byte(s) after concept")]
    Trailing(usize),
}

pub fn encode(c: &Concept) -> Vec<u8> {
    let mut w = Writer::with_capacity(16);
    encode_into(c, &mut w);
    w.into_inner()
}

fn put_role(w: &mut Writer, r: &RoleExpr) {
    w.u8(r.inverse as u8).u32(r.role);
}

pub fn encode_into(c: &Concept, w: &mut Writer) {
    match c {
        Concept::Top => {
            w.u8(TAG_TOP);
        }
        Concept::Atomic(a) => {
            w.u8(TAG_ATOMIC).u32(*a);
        }
        Concept::NotAtomic(a) => {
            w.u8(TAG_NOT_ATOMIC).u32(*a);
        }
        Concept::Exists(r, child) | Concept::Forall(r, child) => {
            w.u8(if matches!(c, Concept::Exists(..)) {
                TAG_EXISTS
            } else {
                TAG_FORALL
            });
            put_role(w, r);
            encode_into(child, w);
        }
        Concept::MinCard(n, r, child) | Concept::MaxCard(n, r, child) => {
            w.u8(if matches!(c, Concept::MinCard(..)) {
                TAG_MIN
            } else {
                TAG_MAX
            });
            w.u16(*n);
            put_role(w, r);
            encode_into(child, w);
        }
        Concept::And(cs) | Concept::Or(cs) => {
            w.u8(if matches!(c, Concept::And(_)) {
                TAG_AND
            } else {
                TAG_OR
            });
            w.u16(cs.len() as u16);
            for child in cs {
                encode_into(child, w);
            }
        }
        Concept::BoolEq(r, v) => {
            w.u8(TAG_BOOL).u32(*r).u8(*v as u8);
        }
        Concept::NumGeq(r, v) => {
            w.u8(TAG_GEQ).u32(*r).f64(*v);
        }
        Concept::NumLeq(r, v) => {
            w.u8(TAG_LEQ).u32(*r).f64(*v);
        }
        Concept::StrEq(r, v) => {
            w.u8(TAG_STR).u32(*r).u32(*v);
        }
    }
}

/// Decodes exactly one canonical concept spanning all of `bytes`.
pub fn decode(bytes: &[u8]) -> Result<Concept, ConceptDecodeError> {
    let mut r = Reader::new(bytes);
    let c = decode_from(&mut r)?;
    if !r.is_at_end() {
        return Err(ConceptDecodeError::Trailing(r.remaining()));
    }
    Ok(c)
}

/// Decodes one canonical concept from the reader's current position.
pub fn decode_from(r: &mut Reader) -> Result<Concept, ConceptDecodeError> {
    decode_at(r, 0)
}

fn get_role(r: &mut Reader) -> Result<RoleExpr, ConceptDecodeError> {
    let at = r.position();
    let inverse = match r.u8()? {
        0 => false,
        1 => true,
        _ => {
            return Err(ConceptDecodeError::InvalidValue {
                offset: at,
                reason: "inverse flag must be 0 or 1",
            })
        }
    };
    Ok(RoleExpr {
        role: r.u32()?,
        inverse,
    })
}

fn decode_at(r: &mut Reader, depth: usize) -> Result<Concept, ConceptDecodeError> {
    let offset = r.position();
    if depth > MAX_DEPTH {
        return Err(ConceptDecodeError::InvalidValue {
            offset,
            reason: "nesting too deep",
        });
    }
    let tag = r.u8()?;
    let c = match tag {
        TAG_TOP => Concept::Top,
        TAG_ATOMIC => Concept::Atomic(r.u32()?),
        TAG_NOT_ATOMIC => Concept::NotAtomic(r.u32()?),
        TAG_EXISTS | TAG_FORALL => {
            let role = get_role(r)?;
            let child = Box::new(decode_at(r, depth + 1)?);
            if tag == TAG_EXISTS {
                Concept::Exists(role, child)
            } else {
                Concept::Forall(role, child)
            }
        }
        TAG_MIN | TAG_MAX => {
            let n = r.u16()?;
            if tag == TAG_MIN && n == 0 {
                return Err(ConceptDecodeError::InvalidValue {
                    offset,
                    reason: "min cardinality 0",
                });
            }
            let role = get_role(r)?;
            let child = Box::new(decode_at(r, depth + 1)?);
            if tag == TAG_MIN {
                Concept::MinCard(n, role, child)
            } else {
                Concept::MaxCard(n, role, child)
            }
        }
        TAG_AND | TAG_OR => {
            let k = r.u16()? as usize;
            if k < 2 {
                return Err(ConceptDecodeError::NonCanonical {
                    offset,
                    reason: "connective with fewer than two operands",
                });
            }
            let mut cs: Vec<Concept> = Vec::with_capacity(k.min(r.remaining()));
            for _ in 0..k {
                let child_at = r.position();
                let child = decode_at(r, depth + 1)?;
                let nested = matches!(
                    (&child, tag),
                    (Concept::And(_), TAG_AND) | (Concept::Or(_), TAG_OR)
                );
                if nested {
                    return Err(ConceptDecodeError::NonCanonical {
                        offset: child_at,
                        reason: "nested connective of the same kind",
                    });
                }
                if let Some(prev) = cs.last() {
                    if compare_canonical(prev, &child) != Ordering::Less {
                        return Err(ConceptDecodeError::NonCanonical {
                            offset: child_at,
                            reason: "operands not strictly ascending",
                        });
                    }
                }
                cs.push(child);
            }
            if tag == TAG_AND {
                Concept::And(cs)
            } else {
                Concept::Or(cs)
            }
        }
        TAG_BOOL => {
            let role = r.u32()?;
            let at = r.position();
            match r.u8()? {
                0 => Concept::BoolEq(role, false),
                1 => Concept::BoolEq(role, true),
                _ => {
                    return Err(ConceptDecodeError::InvalidValue {
                        offset: at,
                        reason: "boolean must be 0 or 1",
                    })
                }
            }
        }
        TAG_GEQ | TAG_LEQ => {
            let role = r.u32()?;
            let at = r.position();
            let v = r.f64()?;
            if v.is_nan() {
                return Err(ConceptDecodeError::InvalidValue {
                    offset: at,
                    reason: "NaN",
                });
            }
            if tag == TAG_GEQ {
                Concept::NumGeq(role, v)
            } else {
                Concept::NumLeq(role, v)
            }
        }
        TAG_STR => Concept::StrEq(r.u32()?, r.u32()?),
        tag => return Err(ConceptDecodeError::UnknownTag { tag, offset }),
    };
    Ok(c)
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// FNV-1a 64 over the canonical encoding. Stable across processes and
/// machines.
pub fn hash_concept(c: &Concept) -> CanonicalHash {
    CanonicalHash(fnv1a64(&encode(c)))
}
