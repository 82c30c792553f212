//! Line-oriented text format for knowledge bases and example files.
//!
//! ```text
//! class Car
//! subclass ClosedCar Car
//! role hasCar
//! individual t1
//! fact hasCar t1 c1
//! strfact colour c1 "dark red"
//! ```

use super::{
    ExampleSet, IndividualId, KbError, KbTables, KnowledgeBase, SymbolKind, SymbolTable,
};
use crate::bitset::Bitset;

/// Splits a line into whitespace-separated tokens, keeping double-quoted
/// strings (with `\"` and `\\` escapes) as single tokens. Quoted tokens are
/// returned with their quotes so callers can tell them apart.
fn tokenize(line: &str, line_no: usize) -> Result<Vec<String>, KbError> {
    let mut tokens = Vec::new();
    let mut chars = line.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c == '#' {
            break;
        } else if c == '"' {
            chars.next();
            let mut s = String::from('"');
            let mut closed = false;
            while let Some(c) = chars.next() {
                match c {
                    '\\' => match chars.next() {
                        Some(e @ ('"' | '\\')) => s.push(e),
                        other => {
                            return Err(KbError::Syntax {
                                line: line_no,
                                token: format!("\\{}", other.map(String::from).unwrap_or_default()),
                                message: "unsupported escape".into(),
                            })
                        }
                    },
                    '"' => {
                        closed = true;
                        break;
                    }
                    c => s.push(c),
                }
            }
            if !closed {
                return Err(KbError::Syntax {
                    line: line_no,
                    token: s,
                    message: "unterminated string".into(),
                });
            }
            s.push('"');
            tokens.push(s);
        } else {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_whitespace() || c == '#' {
                    break;
                }
                s.push(c);
                chars.next();
            }
            tokens.push(s);
        }
    }
    Ok(tokens)
}

struct KbParser {
    st: SymbolTable,
    tables: KbTables,
}

impl KbParser {
    fn declare(&mut self, kind: SymbolKind, name: &str, line: usize) -> Result<(), KbError> {
        if name.starts_with('"') {
            return Err(KbError::Syntax {
                line,
                token: name.to_owned(),
                message: "names cannot be quoted".into(),
            });
        }
        match self.st.kind_of(name) {
            Some(existing) if existing != kind => {
                return Err(KbError::TypeClash {
                    line,
                    name: name.to_owned(),
                    existing,
                    requested: kind,
                })
            }
            Some(_) => return Ok(()),
            None => {}
        }
        let t = &mut self.tables;
        match kind {
            SymbolKind::Class => {
                self.st.classes.intern(name);
                t.class_members.push(Vec::new());
            }
            SymbolKind::Role => {
                self.st.roles.intern(name);
                t.role_assertions.push(Vec::new());
            }
            SymbolKind::NumericRole => {
                self.st.numeric_roles.intern(name);
                t.numeric_assertions.push(Vec::new());
            }
            SymbolKind::BooleanRole => {
                self.st.boolean_roles.intern(name);
                t.boolean_assertions.push(Vec::new());
            }
            SymbolKind::StringRole => {
                self.st.string_roles.intern(name);
                self.st.string_values.push(Default::default());
                t.string_assertions.push(Vec::new());
            }
            SymbolKind::Individual => {
                self.st.individuals.intern(name);
                t.num_individuals += 1;
            }
        }
        Ok(())
    }

    fn lookup(&self, kind: SymbolKind, name: &str, line: usize) -> Result<u32, KbError> {
        self.st.namespace(kind).id(name).ok_or_else(|| KbError::Undeclared {
            line,
            kind,
            name: name.to_owned(),
        })
    }

    fn statement(&mut self, tokens: &[String], line: usize) -> Result<(), KbError> {
        let keyword = tokens[0].as_str();
        let arity = match keyword {
            "class" | "role" | "numrole" | "boolrole" | "strrole" | "individual" => 1,
            "subclass" | "subrole" | "instance" => 2,
            "fact" | "numfact" | "boolfact" | "strfact" => 3,
            _ => {
                return Err(KbError::Syntax {
                    line,
                    token: tokens[0].clone(),
                    message: "unknown statement".into(),
                })
            }
        };
        if tokens.len() != arity + 1 {
            let token = tokens.get(arity + 1).unwrap_or(&tokens[tokens.len() - 1]).clone();
            return Err(KbError::Syntax {
                line,
                token,
                message: format!("`{keyword}` takes {arity} argument(s), got {}", tokens.len() - 1),
            });
        }
        let a = &tokens[1..];
        use SymbolKind::*;
        match keyword {
            "class" => self.declare(Class, &a[0], line)?,
            "role" => self.declare(Role, &a[0], line)?,
            "numrole" => self.declare(NumericRole, &a[0], line)?,
            "boolrole" => self.declare(BooleanRole, &a[0], line)?,
            "strrole" => self.declare(StringRole, &a[0], line)?,
            "individual" => self.declare(Individual, &a[0], line)?,
            "subclass" => {
                let sub = self.lookup(Class, &a[0], line)?;
                let sup = self.lookup(Class, &a[1], line)?;
                self.tables.subclass_edges.push((sub, sup));
            }
            "subrole" => {
                let sub = self.lookup(Role, &a[0], line)?;
                let sup = self.lookup(Role, &a[1], line)?;
                self.tables.subrole_edges.push((sub, sup));
            }
            "instance" => {
                let c = self.lookup(Class, &a[0], line)?;
                let i = self.lookup(Individual, &a[1], line)?;
                self.tables.class_members[c as usize].push(i);
            }
            "fact" => {
                let r = self.lookup(Role, &a[0], line)?;
                let s = self.lookup(Individual, &a[1], line)?;
                let o = self.lookup(Individual, &a[2], line)?;
                self.tables.role_assertions[r as usize].push((s, o));
            }
            "numfact" => {
                let r = self.lookup(NumericRole, &a[0], line)?;
                let s = self.lookup(Individual, &a[1], line)?;
                let v: f64 = a[2]
                    .parse()
                    .ok()
                    .filter(|v: &f64| !v.is_nan())
                    .ok_or_else(|| KbError::Syntax {
                        line,
                        token: a[2].clone(),
                        message: "expected a number".into(),
                    })?;
                self.tables.numeric_assertions[r as usize].push((s, v));
            }
            "boolfact" => {
                let r = self.lookup(BooleanRole, &a[0], line)?;
                let s = self.lookup(Individual, &a[1], line)?;
                let v = match a[2].as_str() {
                    "true" => true,
                    "false" => false,
                    _ => {
                        return Err(KbError::Syntax {
                            line,
                            token: a[2].clone(),
                            message: "expected `true` or `false`".into(),
                        })
                    }
                };
                self.tables.boolean_assertions[r as usize].push((s, v));
            }
            "strfact" => {
                let r = self.lookup(StringRole, &a[0], line)?;
                let s = self.lookup(Individual, &a[1], line)?;
                let raw = &a[2];
                if !(raw.len() >= 2 && raw.starts_with('"') && raw.ends_with('"')) {
                    return Err(KbError::Syntax {
                        line,
                        token: raw.clone(),
                        message: "expected a quoted string".into(),
                    });
                }
                let v = self.st.string_values[r as usize].intern(&raw[1..raw.len() - 1]);
                self.tables.string_assertions[r as usize].push((s, v));
            }
            _ => unreachable!(),
        }
        Ok(())
    }
}

/// Parses the KB text format. Ids are assigned in order of first
/// declaration; the result is not yet materialized.
pub fn parse_kb(text: &str) -> Result<(SymbolTable, KnowledgeBase), KbError> {
    let mut p = KbParser {
        st: SymbolTable::default(),
        tables: KbTables::default(),
    };
    for (idx, line) in text.lines().enumerate() {
        let tokens = tokenize(line, idx + 1)?;
        if tokens.is_empty() {
            continue;
        }
        p.statement(&tokens, idx + 1)?;
    }
    Ok((p.st, KnowledgeBase::from_tables(p.tables)))
}

/// Parses `+ name` / `- name` lines against an existing symbol table.
pub fn parse_examples(text: &str, st: &SymbolTable) -> Result<ExampleSet, KbError> {
    let n = st.individuals.len();
    let mut positives = Bitset::new(n);
    let mut negatives = Bitset::new(n);
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let tokens = tokenize(line, line_no)?;
        if tokens.is_empty() {
            continue;
        }
        let (sign, name) = match tokens.as_slice() {
            [s, name] if s == "+" || s == "-" => (s.as_str(), name),
            _ => {
                return Err(KbError::Syntax {
                    line: line_no,
                    token: tokens[0].clone(),
                    message: "expected `+ <individual>` or `- <individual>`".into(),
                })
            }
        };
        let id: IndividualId =
            st.individuals
                .id(name)
                .ok_or_else(|| KbError::UnknownIndividual {
                    line: line_no,
                    name: name.clone(),
                })?;
        let (mine, other) = if sign == "+" {
            (&mut positives, &negatives)
        } else {
            (&mut negatives, &positives)
        };
        if other.contains(id as usize) {
            return Err(KbError::ConflictingExample {
                line: line_no,
                name: name.clone(),
            });
        }
        mine.insert(id as usize);
    }
    if positives.count() == 0 {
        return Err(KbError::NoPositives);
    }
    if negatives.count() == 0 {
        return Err(KbError::NoNegatives);
    }
    Ok(ExampleSet::new(positives, negatives))
}
