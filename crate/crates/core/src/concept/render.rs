//! Manchester-like text syntax for concepts.
//!
//! ```text
//! Thing
//! Person
//! (not Person)
//! (hasChild some Thing)      (inverse hasChild only Person)
//! (hasChild min 2 Person)    (hasChild max 0 Thing)
//! (married = true)  (age >= 2.5)  (age <= 7.0)  (injuryLevel = "severe")
//! (Person and (hasChild some Thing))
//! (A or B or C)
//! ```
//!
//! Every compound is parenthesized, so rendering then parsing gives back
//! the same tree.

use thiserror::Error;

use super::{canonicalize, Concept, RoleExpr};
use crate::kb::{SymbolKind, SymbolTable};

const TOP: &str = "Thing";

/// Renders `c` with names from `st`. Fails on an id with no name.
pub fn render(c: &Concept, st: &SymbolTable) -> Result<String, String> {
    let mut out = String::new();
    render_into(c, st, &mut out)?;
    Ok(out)
}

fn name<'a>(st: &'a SymbolTable, kind: SymbolKind, id: u32) -> Result<&'a str, String> {
    st.namespace(kind)
        .name(id)
        .ok_or_else(|| format!("unknown {kind} id {id}"))
}

fn role_prefix(st: &SymbolTable, r: &RoleExpr, out: &mut String) -> Result<(), String> {
    if r.inverse {
        out.push_str("inverse ");
    }
    out.push_str(name(st, SymbolKind::Role, r.role)?);
    Ok(())
}

fn quote(s: &str, out: &mut String) {
    out.push('"');
    for ch in s.chars() {
        if ch == '"' || ch == '\\' {
            out.push('\\');
        }
        out.push(ch);
    }
    out.push('"');
}

fn render_into(c: &Concept, st: &SymbolTable, out: &mut String) -> Result<(), String> {
    match c {
        Concept::Top => out.push_str(TOP),
        Concept::Atomic(a) => out.push_str(name(st, SymbolKind::Class, *a)?),
        Concept::NotAtomic(a) => {
            out.push_str("(not ");
            out.push_str(name(st, SymbolKind::Class, *a)?);
            out.push(')');
        }
        Concept::Exists(r, child) | Concept::Forall(r, child) => {
            out.push('(');
            role_prefix(st, r, out)?;
            out.push_str(if matches!(c, Concept::Exists(..)) {
                " some "
            } else {
                " only "
            });
            render_into(child, st, out)?;
            out.push(')');
        }
        Concept::MinCard(n, r, child) | Concept::MaxCard(n, r, child) => {
            out.push('(');
            role_prefix(st, r, out)?;
            let kw = if matches!(c, Concept::MinCard(..)) {
                "min"
            } else {
                "max"
            };
            out.push_str(&format!(" {kw} {n} "));
            render_into(child, st, out)?;
            out.push(')');
        }
        Concept::BoolEq(r, v) => {
            out.push_str(&format!("({} = {v})", name(st, SymbolKind::BooleanRole, *r)?));
        }
        Concept::NumGeq(r, v) => {
            out.push_str(&format!("({} >= {v:?})", name(st, SymbolKind::NumericRole, *r)?));
        }
        Concept::NumLeq(r, v) => {
            out.push_str(&format!("({} <= {v:?})", name(st, SymbolKind::NumericRole, *r)?));
        }
        Concept::StrEq(r, v) => {
            out.push('(');
            out.push_str(name(st, SymbolKind::StringRole, *r)?);
            out.push_str(" = ");
            let value = st
                .string_value(*r, *v)
                .ok_or_else(|| format!("unknown value index {v} for string role {r}"))?;
            quote(value, out);
            out.push(')');
        }
        Concept::And(cs) | Concept::Or(cs) => {
            let sep = if matches!(c, Concept::And(_)) {
                " and "
            } else {
                " or "
            };
            out.push('(');
            for (i, child) in cs.iter().enumerate() {
                if i > 0 {
                    out.push_str(sep);
                }
                render_into(child, st, out)?;
            }
            out.push(')');
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message} at column {}", .position + 1)]
pub struct ConceptParseError {
    /// Byte offset into the input.
    pub position: usize,
    pub message: String,
}

impl ConceptParseError {
    /// The input line with a caret under the error position.
    pub fn caret(&self, input: &str) -> String {
        let col = input[..self.position.min(input.len())].chars().count();
        format!("{input}\n{}^ {}", " ".repeat(col), self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Word(String),
    Str(String),
    Op(&'static str),
}

fn lex(input: &str) -> Result<Vec<(usize, Tok)>, ConceptParseError> {
    let mut out = Vec::new();
    let mut it = input.char_indices().peekable();
    while let Some(&(pos, ch)) = it.peek() {
        match ch {
            c if c.is_whitespace() => {
                it.next();
            }
            '(' => {
                it.next();
                out.push((pos, Tok::Open));
            }
            ')' => {
                it.next();
                out.push((pos, Tok::Close));
            }
            '=' => {
                it.next();
                out.push((pos, Tok::Op("=")));
            }
            '>' | '<' => {
                it.next();
                match it.next() {
                    Some((_, '=')) => out.push((pos, Tok::Op(if ch == '>' { ">=" } else { "<=" }))),
                    _ => {
                        return Err(ConceptParseError {
                            position: pos,
                            message: format!("expected `{ch}=`"),
                        })
                    }
                }
            }
            '"' => {
                it.next();
                let mut s = String::new();
                let mut closed = false;
                while let Some((_, c)) = it.next() {
                    match c {
                        '\\' => match it.next() {
                            Some((_, e)) => s.push(e),
                            None => break,
                        },
                        '"' => {
                            closed = true;
                            break;
                        }
                        c => s.push(c),
                    }
                }
                if !closed {
                    return Err(ConceptParseError {
                        position: pos,
                        message: "unterminated string".into(),
                    });
                }
                out.push((pos, Tok::Str(s)));
            }
            _ => {
                let mut s = String::new();
                while let Some(&(_, c)) = it.peek() {
                    if c.is_whitespace() || "()=<>\"".contains(c) {
                        break;
                    }
                    s.push(c);
                    it.next();
                }
                out.push((pos, Tok::Word(s)));
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    st: &'a SymbolTable,
}

impl Parser<'_> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, ConceptParseError> {
        Err(ConceptParseError {
            position: self.toks.get(self.pos).map_or(self.end, |t| t.0),
            message: message.into(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.1.clone());
        self.pos += 1;
        t
    }

    fn word(&mut self, what: &str) -> Result<String, ConceptParseError> {
        match self.peek() {
            Some(Tok::Word(w)) => {
                let w = w.clone();
                self.pos += 1;
                Ok(w)
            }
            _ => self.err(format!("expected {what}")),
        }
    }

    fn expect_close(&mut self) -> Result<(), ConceptParseError> {
        match self.peek() {
            Some(Tok::Close) => {
                self.pos += 1;
                Ok(())
            }
            _ => self.err("expected `)`"),
        }
    }

    fn concept(&mut self) -> Result<Concept, ConceptParseError> {
        match self.peek() {
            Some(Tok::Open) => {
                self.pos += 1;
                let c = self.compound()?;
                self.expect_close()?;
                Ok(c)
            }
            Some(Tok::Word(w)) if w == TOP => {
                self.pos += 1;
                Ok(Concept::Top)
            }
            Some(Tok::Word(w)) => match self.st.classes.id(w) {
                Some(id) => {
                    self.pos += 1;
                    Ok(Concept::Atomic(id))
                }
                None => self.err(format!("unknown class `{w}`")),
            },
            _ => self.err("expected a concept"),
        }
    }

    /// Everything that may appear between a pair of parentheses.
    fn compound(&mut self) -> Result<Concept, ConceptParseError> {
        if let Some(Tok::Word(w)) = self.peek() {
            let w = w.clone();
            if w == "not" {
                self.pos += 1;
                let at = self.pos;
                let n = self.word("a class name")?;
                return match self.st.classes.id(&n) {
                    Some(id) => Ok(Concept::NotAtomic(id)),
                    None => {
                        self.pos = at;
                        self.err(format!("unknown class `{n}` (negation applies to class names only)"))
                    }
                };
            }
            if w == "inverse" {
                self.pos += 1;
                let role = self.word("a role name")?;
                return self.restriction(&role, true);
            }
            match self.st.kind_of(&w) {
                Some(SymbolKind::Role) => {
                    self.pos += 1;
                    return self.restriction(&w, false);
                }
                Some(kind @ (SymbolKind::BooleanRole
                | SymbolKind::NumericRole
                | SymbolKind::StringRole)) => {
                    self.pos += 1;
                    return self.data_restriction(&w, kind);
                }
                _ => {}
            }
        }
        // Connective chain.
        let first = self.concept()?;
        let connective = match self.peek() {
            Some(Tok::Word(w)) if w == "and" || w == "or" => w.clone(),
            _ => return self.err("expected `and` or `or`"),
        };
        let mut operands = vec![first];
        while let Some(Tok::Word(w)) = self.peek() {
            if *w != connective {
                return self.err(format!("mixed connectives; parenthesize the `{w}` operand"));
            }
            self.pos += 1;
            operands.push(self.concept()?);
        }
        Ok(if connective == "and" {
            Concept::And(operands)
        } else {
            Concept::Or(operands)
        })
    }

    fn restriction(&mut self, role_name: &str, inverse: bool) -> Result<Concept, ConceptParseError> {
        let Some(role) = self.st.roles.id(role_name) else {
            self.pos -= 1;
            return self.err(format!("unknown role `{role_name}`"));
        };
        let r = RoleExpr { role, inverse };
        let kw = self.word("`some`, `only`, `min` or `max`")?;
        match kw.as_str() {
            "some" => Ok(Concept::exists(r, self.concept()?)),
            "only" => Ok(Concept::forall(r, self.concept()?)),
            "min" | "max" => {
                let n: u16 = match self.peek() {
                    Some(Tok::Word(w)) => match w.parse() {
                        Ok(n) => n,
                        Err(_) => return self.err("expected a cardinality"),
                    },
                    _ => return self.err("expected a cardinality"),
                };
                if kw == "min" && n == 0 {
                    return self.err("min cardinality must be at least 1");
                }
                self.pos += 1;
                let child = Box::new(self.concept()?);
                Ok(if kw == "min" {
                    Concept::MinCard(n, r, child)
                } else {
                    Concept::MaxCard(n, r, child)
                })
            }
            _ => {
                self.pos -= 1;
                self.err("expected `some`, `only`, `min` or `max`")
            }
        }
    }

    fn data_restriction(&mut self, role_name: &str, kind: SymbolKind) -> Result<Concept, ConceptParseError> {
        let role = self.st.namespace(kind).id(role_name).unwrap();
        let op = match self.next() {
            Some(Tok::Op(op)) => op,
            _ => {
                self.pos -= 1;
                return self.err("expected `=`, `>=` or `<=`");
            }
        };
        let at = self.pos;
        match (kind, op, self.next()) {
            (SymbolKind::BooleanRole, "=", Some(Tok::Word(w))) if w == "true" || w == "false" => {
                Ok(Concept::BoolEq(role, w == "true"))
            }
            (SymbolKind::NumericRole, ">=" | "<=", Some(Tok::Word(w))) => {
                match w.parse::<f64>() {
                    Ok(v) if !v.is_nan() => Ok(if op == ">=" {
                        Concept::NumGeq(role, v)
                    } else {
                        Concept::NumLeq(role, v)
                    }),
                    _ => {
                        self.pos = at;
                        self.err("expected a number")
                    }
                }
            }
            (SymbolKind::StringRole, "=", Some(Tok::Str(s))) => {
                match self.st.string_values.get(role as usize).and_then(|v| v.id(&s)) {
                    Some(idx) => Ok(Concept::StrEq(role, idx)),
                    None => {
                        self.pos = at;
                        self.err(format!("value \"{s}\" never asserted for `{role_name}`"))
                    }
                }
            }
            _ => {
                self.pos = at;
                self.err(format!("bad operand for {kind} `{role_name}`"))
            }
        }
    }
}

/// Parses the rendered syntax back into a canonical concept.
pub fn parse_concept(input: &str, st: &SymbolTable) -> Result<Concept, ConceptParseError> {
    let mut p = Parser {
        toks: lex(input)?,
        pos: 0,
        end: input.len(),
        st,
    };
    let c = p.concept()?;
    if p.pos < p.toks.len() {
        return p.err("unexpected trailing input");
    }
    Ok(canonicalize(&c))
}
