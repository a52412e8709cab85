//! Parser for the textual LTL syntax and the canonical printer.
//!
//! Precedence, from tightest: unary (`!`, `X`, `F`, `G`), then `U`/`R`/`W`,
//! `&`, `|`, `->`, `<->`. All binary operators are right-associative.

use std::fmt;

use thiserror::Error;

use super::formula::{Formula, Kind, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("unknown token at position {pos}: {found:?}")]
    UnknownToken { pos: usize, found: String },
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Const(bool),
    Not,
    And,
    Or,
    Implies,
    Iff,
    Next,
    Finally,
    Globally,
    Until,
    Release,
    WeakUntil,
    LParen,
    RParen,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            '!' => Tok::Not,
            '&' => Tok::And,
            '|' => Tok::Or,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '0' => Tok::Const(false),
            '1' => Tok::Const(true),
            '-' if text[i..].starts_with("->") => {
                i += 1;
                Tok::Implies
            }
            '<' if text[i..].starts_with("<->") => {
                i += 2;
                Tok::Iff
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i + 1 < bytes.len() && ((bytes[i + 1] as char).is_ascii_alphanumeric() || bytes[i + 1] == b'_') {
                    i += 1;
                }
                match &text[start..=i] {
                    "X" => Tok::Next,
                    "F" => Tok::Finally,
                    "G" => Tok::Globally,
                    "U" => Tok::Until,
                    "R" => Tok::Release,
                    "W" => Tok::WeakUntil,
                    "true" => Tok::Const(true),
                    "false" => Tok::Const(false),
                    id => Tok::Ident(id.to_string()),
                }
            }
            _ => {
                let found: String = text[start..].chars().take(1).collect();
                return Err(ParseError::UnknownToken { pos: start, found });
            }
        };
        i += 1;
        out.push((start, tok));
    }
    Ok(out)
}

/// Raw syntax tree before NNF conversion.
enum Ast {
    Const(bool),
    Var(String),
    Not(Box<Ast>),
    Bin(Tok, Box<Ast>, Box<Ast>),
    Un(Tok, Box<Ast>),
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn error<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            pos: self.offset(),
            msg: msg.into(),
        })
    }

    fn binary(
        &mut self,
        ops: &[Tok],
        next: fn(&mut Parser) -> Result<Ast, ParseError>,
        this: fn(&mut Parser) -> Result<Ast, ParseError>,
    ) -> Result<Ast, ParseError> {
        let lhs = next(self)?;
        match self.peek() {
            Some(t) if ops.contains(t) => {
                let op = t.clone();
                self.pos += 1;
                let rhs = this(self)?;
                Ok(Ast::Bin(op, Box::new(lhs), Box::new(rhs)))
            }
            _ => Ok(lhs),
        }
    }

    fn iff(&mut self) -> Result<Ast, ParseError> {
        self.binary(&[Tok::Iff], Parser::implies, Parser::iff)
    }

    fn implies(&mut self) -> Result<Ast, ParseError> {
        self.binary(&[Tok::Implies], Parser::or, Parser::implies)
    }

    fn or(&mut self) -> Result<Ast, ParseError> {
        self.binary(&[Tok::Or], Parser::and, Parser::or)
    }

    fn and(&mut self) -> Result<Ast, ParseError> {
        self.binary(&[Tok::And], Parser::temporal, Parser::and)
    }

    fn temporal(&mut self) -> Result<Ast, ParseError> {
        self.binary(
            &[Tok::Until, Tok::Release, Tok::WeakUntil],
            Parser::unary,
            Parser::temporal,
        )
    }

    fn unary(&mut self) -> Result<Ast, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Not) => {
                self.pos += 1;
                Ok(Ast::Not(Box::new(self.unary()?)))
            }
            Some(op @ (Tok::Next | Tok::Finally | Tok::Globally)) => {
                self.pos += 1;
                Ok(Ast::Un(op, Box::new(self.unary()?)))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                Ok(Ast::Var(name))
            }
            Some(Tok::Const(b)) => {
                self.pos += 1;
                Ok(Ast::Const(b))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.iff()?;
                if self.peek() != Some(&Tok::RParen) {
                    return self.error("expected ')'");
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(t) => self.error(format!("unexpected {t:?}")),
            None => self.error("unexpected end of input"),
        }
    }
}

/// Converts to NNF; `neg` is the polarity of the context.
fn to_nnf(ast: &Ast, neg: bool) -> Formula {
    match ast {
        Ast::Const(b) => Formula::constant(*b != neg),
        Ast::Var(name) => Formula::literal(Var::new(name), !neg),
        Ast::Not(a) => to_nnf(a, !neg),
        Ast::Un(op, a) => {
            let a = to_nnf(a, neg);
            match (op, neg) {
                (Tok::Next, _) => Formula::next(a),
                (Tok::Finally, false) | (Tok::Globally, true) => Formula::finally(a),
                _ => Formula::globally(a),
            }
        }
        Ast::Bin(op, l, r) => match op {
            Tok::And | Tok::Or => {
                let (a, b) = (to_nnf(l, neg), to_nnf(r, neg));
                if (*op == Tok::And) != neg {
                    Formula::and2(a, b)
                } else {
                    Formula::or2(a, b)
                }
            }
            Tok::Implies => {
                // l -> r  ==  !l | r
                let (a, b) = (to_nnf(l, !neg), to_nnf(r, neg));
                if neg {
                    Formula::and2(a, b)
                } else {
                    Formula::or2(a, b)
                }
            }
            Tok::Iff => {
                let (lp, ln, rp, rn) = (to_nnf(l, false), to_nnf(l, true), to_nnf(r, false), to_nnf(r, true));
                if neg {
                    Formula::or2(Formula::and2(lp, rn), Formula::and2(ln, rp))
                } else {
                    Formula::and2(Formula::or2(ln, rp), Formula::or2(lp, rn))
                }
            }
            Tok::Until | Tok::Release => {
                let (a, b) = (to_nnf(l, neg), to_nnf(r, neg));
                if (*op == Tok::Until) != neg {
                    Formula::until(a, b)
                } else {
                    Formula::release(a, b)
                }
            }
            Tok::WeakUntil => {
                if neg {
                    // !(a W b) == !b U (!a & !b)
                    let (na, nb) = (to_nnf(l, true), to_nnf(r, true));
                    Formula::until(nb.clone(), Formula::and2(na, nb))
                } else {
                    Formula::weak_until(to_nnf(l, false), to_nnf(r, false))
                }
            }
            _ => unreachable!("not a binary operator"),
        },
    }
}

/// Parses an LTL formula and returns its simplified negation normal form.
pub fn parse_ltl(text: &str) -> Result<Formula, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
    };
    let ast = p.iff()?;
    if p.pos != p.toks.len() {
        return p.error("trailing input");
    }
    Ok(to_nnf(&ast, false))
}

impl fmt::Display for Formula {
    /// Fully parenthesized canonical text, re-parseable by [`parse_ltl`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind() {
            Kind::True => write!(f, "true"),
            Kind::False => write!(f, "false"),
            Kind::Atom(v) => write!(f, "{v}"),
            Kind::NegAtom(v) => write!(f, "!{v}"),
            Kind::And(cs) | Kind::Or(cs) => {
                let sep = if matches!(self.kind(), Kind::And(_)) {
                    " & "
                } else {
                    " | "
                };
                write!(f, "(")?;
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        write!(f, "{sep}")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
            Kind::Next(a) => write!(f, "(X {a})"),
            Kind::Finally(a) => write!(f, "(F {a})"),
            Kind::Globally(a) => write!(f, "(G {a})"),
            Kind::Until(a, b) => write!(f, "({a} U {b})"),
            Kind::Release(a, b) => write!(f, "({a} R {b})"),
        }
    }
}
