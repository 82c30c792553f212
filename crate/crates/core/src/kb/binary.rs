//! Binary KB image used to ship the knowledge base to cluster workers.
//!
//! Layout (big-endian): `SPKB`, u16 version, then the symbol table and the
//! assertion tables as u32-counted sections, then a CRC32 of everything
//! after the 6-byte header.

use super::{KbError, KbTables, KnowledgeBase, SymbolTable};
use crate::codec::{DecodeError, Reader, Writer};

pub const KB_MAGIC: &[u8; 4] = b"SPKB";
pub const KB_VERSION: u16 = 1;

const HEADER_LEN: usize = 6;

fn put_names(w: &mut Writer, names: &[String]) {
    w.u32(names.len() as u32);
    for n in names {
        w.str(n);
    }
}

fn put_pairs(w: &mut Writer, pairs: &[(u32, u32)]) {
    w.u32(pairs.len() as u32);
    for &(a, b) in pairs {
        w.u32(a).u32(b);
    }
}

pub fn serialize_kb(kb: &KnowledgeBase, st: &SymbolTable) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(KB_MAGIC).u16(KB_VERSION);

    put_names(&mut w, st.classes.names());
    put_names(&mut w, st.roles.names());
    put_names(&mut w, st.numeric_roles.names());
    put_names(&mut w, st.boolean_roles.names());
    put_names(&mut w, st.string_roles.names());
    put_names(&mut w, st.individuals.names());
    w.u32(st.string_values.len() as u32);
    for values in &st.string_values {
        put_names(&mut w, values.names());
    }

    w.u8(kb.materialized as u8);
    w.u32(kb.num_individuals as u32);
    w.u32(kb.class_members.len() as u32);
    for members in &kb.class_members {
        w.u32(members.count() as u32);
        for i in members.iter() {
            w.u32(i as u32);
        }
    }
    put_pairs(&mut w, &kb.subclass_edges);
    w.u32(kb.role_assertions.len() as u32);
    for facts in &kb.role_assertions {
        put_pairs(&mut w, facts);
    }
    put_pairs(&mut w, &kb.subrole_edges);
    w.u32(kb.numeric_assertions.len() as u32);
    for facts in &kb.numeric_assertions {
        w.u32(facts.len() as u32);
        for &(s, v) in facts {
            w.u32(s).f64(v);
        }
    }
    w.u32(kb.boolean_assertions.len() as u32);
    for facts in &kb.boolean_assertions {
        w.u32(facts.len() as u32);
        for &(s, v) in facts {
            w.u32(s).u8(v as u8);
        }
    }
    w.u32(kb.string_assertions.len() as u32);
    for facts in &kb.string_assertions {
        put_pairs(&mut w, facts);
    }

    let crc = crc32fast::hash(&w.as_slice()[HEADER_LEN..]);
    w.u32(crc);
    w.into_inner()
}

fn invalid(msg: impl Into<String>) -> KbError {
    KbError::Decode(DecodeError::Invalid(msg.into()))
}

fn get_names(r: &mut Reader) -> Result<Vec<String>, KbError> {
    let n = r.count(4)?;
    (0..n).map(|_| r.str().map_err(KbError::from)).collect()
}

fn get_pairs(r: &mut Reader, bound_a: usize, bound_b: usize) -> Result<Vec<(u32, u32)>, KbError> {
    let n = r.count(8)?;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let (a, b) = (r.u32()?, r.u32()?);
        if a as usize >= bound_a || b as usize >= bound_b {
            return Err(invalid(format!("id out of range in pair ({a}, {b})")));
        }
        out.push((a, b));
    }
    Ok(out)
}

fn expect_count(r: &mut Reader, expected: usize, what: &str) -> Result<(), KbError> {
    let n = r.u32()? as usize;
    if n != expected {
        return Err(invalid(format!("{what}: {n} tables for {expected} symbols")));
    }
    Ok(())
}

fn interner(names: Vec<String>) -> Result<super::Interner, KbError> {
    let mut i = super::Interner::default();
    for n in &names {
        let before = i.len();
        if i.intern(n) as usize != before {
            return Err(invalid(format!("duplicate symbol `{n}`")));
        }
    }
    Ok(i)
}

pub fn deserialize_kb(bytes: &[u8]) -> Result<(SymbolTable, KnowledgeBase), KbError> {
    let mut r = Reader::new(bytes);
    if r.take(4)? != KB_MAGIC {
        return Err(KbError::BadMagic);
    }
    let version = r.u16()?;
    if version != KB_VERSION {
        return Err(KbError::VersionMismatch {
            found: version,
            expected: KB_VERSION,
        });
    }
    if bytes.len() < HEADER_LEN + 4 {
        return Err(DecodeError::Truncated {
            offset: bytes.len(),
            needed: HEADER_LEN + 4 - bytes.len(),
        }
        .into());
    }
    let body_end = bytes.len() - 4;
    let stored = u32::from_be_bytes(bytes[body_end..].try_into().unwrap());
    let computed = crc32fast::hash(&bytes[HEADER_LEN..body_end]);
    if stored != computed {
        return Err(KbError::Checksum { stored, computed });
    }
    let mut r = Reader::new(&bytes[HEADER_LEN..body_end]);

    let mut st = SymbolTable {
        classes: interner(get_names(&mut r)?)?,
        roles: interner(get_names(&mut r)?)?,
        numeric_roles: interner(get_names(&mut r)?)?,
        boolean_roles: interner(get_names(&mut r)?)?,
        string_roles: interner(get_names(&mut r)?)?,
        individuals: interner(get_names(&mut r)?)?,
        string_values: Vec::new(),
    };
    expect_count(&mut r, st.string_roles.len(), "string value tables")?;
    for _ in 0..st.string_roles.len() {
        st.string_values.push(interner(get_names(&mut r)?)?);
    }

    let materialized = match r.u8()? {
        0 => false,
        1 => true,
        b => return Err(invalid(format!("bad materialized flag {b}"))),
    };
    let n = r.u32()? as usize;
    if n != st.individuals.len() {
        return Err(invalid("individual count disagrees with symbol table"));
    }
    expect_count(&mut r, st.classes.len(), "class tables")?;
    let mut class_members = Vec::with_capacity(st.classes.len());
    for _ in 0..st.classes.len() {
        let k = r.count(4)?;
        let mut ids = Vec::with_capacity(k);
        for _ in 0..k {
            let i = r.u32()?;
            if i as usize >= n {
                return Err(invalid(format!("individual id {i} out of range")));
            }
            ids.push(i);
        }
        class_members.push(ids);
    }
    let nc = st.classes.len();
    let subclass_edges = get_pairs(&mut r, nc, nc)?;
    expect_count(&mut r, st.roles.len(), "role tables")?;
    let role_assertions = (0..st.roles.len())
        .map(|_| get_pairs(&mut r, n, n))
        .collect::<Result<_, _>>()?;
    let nr = st.roles.len();
    let subrole_edges = get_pairs(&mut r, nr, nr)?;

    expect_count(&mut r, st.numeric_roles.len(), "numeric tables")?;
    let mut numeric_assertions = Vec::new();
    for _ in 0..st.numeric_roles.len() {
        let k = r.count(12)?;
        let mut facts = Vec::with_capacity(k);
        for _ in 0..k {
            let (s, v) = (r.u32()?, r.f64()?);
            if s as usize >= n || v.is_nan() {
                return Err(invalid("bad numeric assertion"));
            }
            facts.push((s, v));
        }
        numeric_assertions.push(facts);
    }
    expect_count(&mut r, st.boolean_roles.len(), "boolean tables")?;
    let mut boolean_assertions = Vec::new();
    for _ in 0..st.boolean_roles.len() {
        let k = r.count(5)?;
        let mut facts = Vec::with_capacity(k);
        for _ in 0..k {
            let s = r.u32()?;
            let v = match r.u8()? {
                0 => false,
                1 => true,
                _ => return Err(invalid("bad boolean value")),
            };
            if s as usize >= n {
                return Err(invalid("bad boolean assertion"));
            }
            facts.push((s, v));
        }
        boolean_assertions.push(facts);
    }
    expect_count(&mut r, st.string_roles.len(), "string tables")?;
    let mut string_assertions = Vec::new();
    for sr in 0..st.string_roles.len() {
        let values = st.string_values[sr].len();
        string_assertions.push(get_pairs(&mut r, n, values)?);
    }
    if !r.is_at_end() {
        return Err(invalid(format!("{} trailing byte(s)", r.remaining())));
    }

    let kb = KnowledgeBase::from_tables(KbTables {
        num_individuals: n,
        class_members,
        subclass_edges,
        role_assertions,
        subrole_edges,
        numeric_assertions,
        boolean_assertions,
        string_assertions,
        materialized,
    });
    Ok((st, kb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::parse_kb;

    #[test]
    fn empty_kb_round_trips() {
        let (st, kb) = parse_kb("").unwrap();
        let kb = kb.materialize().unwrap();
        let bytes = serialize_kb(&kb, &st);
        // header + 6 name tables + string tables + flag + n + 8 table counts + crc
        assert_eq!(bytes.len(), 6 + 6 * 4 + 4 + 1 + 4 + 4 * 7 + 4);
        let (st2, kb2) = deserialize_kb(&bytes).unwrap();
        assert_eq!((st2, kb2), (st, kb));
    }

    #[test]
    fn header_errors() {
        let (st, kb) = parse_kb("class A\n").unwrap();
        let mut bytes = serialize_kb(&kb, &st);
        assert!(matches!(deserialize_kb(&bytes[..3]), Err(KbError::Decode(_))));
        bytes[5] = 2;
        assert!(matches!(
            deserialize_kb(&bytes),
            Err(KbError::VersionMismatch { found: 2, .. })
        ));
        bytes[5] = 1;
        bytes[0] = b'X';
        assert_eq!(deserialize_kb(&bytes), Err(KbError::BadMagic));
        bytes[0] = b'S';
        let last = bytes.len() - 6;
        bytes[last] ^= 0x10;
        assert!(matches!(deserialize_kb(&bytes), Err(KbError::Checksum { .. })));
    }
}
