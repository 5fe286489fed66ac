//! Parser for the textual guard syntax used in the PNML dialect.
//!
//! `x` denotes the read copy of variable `x`, `x'` the written copy.
//! Operators: `= != >= > <= <`, `&&`, `||`, parentheses; linear terms
//! with `+ - *` where `*` has at least one constant operand, and `/`
//! only between constants (rational literals like `3/2`). Decimal
//! literals (`0.25`) are parsed exactly. See `docs/pnml.md`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

use crate::constraint::{CmpOp, Constraint, LinTerm, Rat, Sort, Var, VarKind};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("guard parse error at byte {pos}: {msg}")]
pub struct GuardParseError {
    pub pos: usize,
    pub msg: String,
}

fn err<T>(pos: usize, msg: impl Into<String>) -> Result<T, GuardParseError> {
    Err(GuardParseError {
        pos,
        msg: msg.into(),
    })
}

// ── Tokens ──────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Prime,
    Num(Rat),
    AndAnd,
    OrOr,
    Cmp(CmpOp),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    True,
    False,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, GuardParseError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '(' => {
                toks.push((Tok::LParen, i));
                i += 1;
            }
            ')' => {
                toks.push((Tok::RParen, i));
                i += 1;
            }
            '+' => {
                toks.push((Tok::Plus, i));
                i += 1;
            }
            '-' => {
                toks.push((Tok::Minus, i));
                i += 1;
            }
            '*' => {
                toks.push((Tok::Star, i));
                i += 1;
            }
            '/' => {
                toks.push((Tok::Slash, i));
                i += 1;
            }
            '\'' => {
                toks.push((Tok::Prime, i));
                i += 1;
            }
            '&' => {
                if bytes.get(i + 1) == Some(&b'&') {
                    toks.push((Tok::AndAnd, i));
                    i += 2;
                } else {
                    return err(i, "expected '&&'");
                }
            }
            '|' => {
                if bytes.get(i + 1) == Some(&b'|') {
                    toks.push((Tok::OrOr, i));
                    i += 2;
                } else {
                    return err(i, "expected '||'");
                }
            }
            '=' => {
                toks.push((Tok::Cmp(CmpOp::Eq), i));
                i += 1;
            }
            '!' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    toks.push((Tok::Cmp(CmpOp::Ne), i));
                    i += 2;
                } else {
                    return err(i, "expected '!='");
                }
            }
            '>' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    toks.push((Tok::Cmp(CmpOp::Ge), i));
                    i += 2;
                } else {
                    toks.push((Tok::Cmp(CmpOp::Gt), i));
                    i += 1;
                }
            }
            '<' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    toks.push((Tok::Cmp(CmpOp::Le), i));
                    i += 2;
                } else {
                    toks.push((Tok::Cmp(CmpOp::Lt), i));
                    i += 1;
                }
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                    i += 1;
                }
                let mut num =
                    BigRational::from_integer(text[start..i].parse::<BigInt>().expect("digits"));
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    let frac_start = i;
                    while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                    if frac_start == i {
                        return err(i, "digits expected after decimal point");
                    }
                    let frac: BigInt = text[frac_start..i].parse().expect("digits");
                    let scale = BigInt::from(10u32).pow((i - frac_start) as u32);
                    num += BigRational::new(frac, scale);
                }
                toks.push((Tok::Num(num), start));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                let word = &text[start..i];
                toks.push((
                    match word {
                        "true" => Tok::True,
                        "false" => Tok::False,
                        _ => Tok::Ident(word.to_string()),
                    },
                    start,
                ));
            }
            other => return err(i, format!("unexpected character '{other}'")),
        }
    }
    Ok(toks)
}

// ── Untyped expression tree ─────────────────────────────────────────

#[derive(Debug, Clone)]
enum Expr {
    Num(Rat),
    Var { name: String, written: bool },
    True,
    False,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum BinOp {
    Or,
    And,
    Cmp(CmpOp),
    Add,
    Sub,
    Mul,
    Div,
}

struct Parser<'a> {
    toks: &'a [(Tok, usize)],
    pos: usize,
    end: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), GuardParseError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            err(self.here(), format!("expected {what}"))
        }
    }

    fn or_expr(&mut self) -> Result<(Expr, usize), GuardParseError> {
        let (mut lhs, at) = self.and_expr()?;
        while self.peek() == Some(&Tok::OrOr) {
            self.bump();
            let (rhs, _) = self.and_expr()?;
            lhs = Expr::Bin(BinOp::Or, Box::new(lhs), Box::new(rhs));
        }
        Ok((lhs, at))
    }

    fn and_expr(&mut self) -> Result<(Expr, usize), GuardParseError> {
        let (mut lhs, at) = self.cmp_expr()?;
        while self.peek() == Some(&Tok::AndAnd) {
            self.bump();
            let (rhs, _) = self.cmp_expr()?;
            lhs = Expr::Bin(BinOp::And, Box::new(lhs), Box::new(rhs));
        }
        Ok((lhs, at))
    }

    fn cmp_expr(&mut self) -> Result<(Expr, usize), GuardParseError> {
        let (lhs, at) = self.sum_expr()?;
        if let Some(Tok::Cmp(op)) = self.peek().cloned() {
            self.bump();
            let (rhs, _) = self.sum_expr()?;
            return Ok((Expr::Bin(BinOp::Cmp(op), Box::new(lhs), Box::new(rhs)), at));
        }
        Ok((lhs, at))
    }

    fn sum_expr(&mut self) -> Result<(Expr, usize), GuardParseError> {
        let (mut lhs, at) = self.mul_expr()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    let (rhs, _) = self.mul_expr()?;
                    lhs = Expr::Bin(BinOp::Add, Box::new(lhs), Box::new(rhs));
                }
                Some(Tok::Minus) => {
                    self.bump();
                    let (rhs, _) = self.mul_expr()?;
                    lhs = Expr::Bin(BinOp::Sub, Box::new(lhs), Box::new(rhs));
                }
                _ => break,
            }
        }
        Ok((lhs, at))
    }

    fn mul_expr(&mut self) -> Result<(Expr, usize), GuardParseError> {
        let (mut lhs, at) = self.unary_expr()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.bump();
                    let (rhs, _) = self.unary_expr()?;
                    lhs = Expr::Bin(BinOp::Mul, Box::new(lhs), Box::new(rhs));
                }
                Some(Tok::Slash) => {
                    self.bump();
                    let (rhs, _) = self.unary_expr()?;
                    lhs = Expr::Bin(BinOp::Div, Box::new(lhs), Box::new(rhs));
                }
                _ => break,
            }
        }
        Ok((lhs, at))
    }

    fn unary_expr(&mut self) -> Result<(Expr, usize), GuardParseError> {
        let at = self.here();
        match self.bump() {
            Some(Tok::Minus) => {
                let (inner, _) = self.unary_expr()?;
                Ok((Expr::Neg(Box::new(inner)), at))
            }
            Some(Tok::Num(q)) => Ok((Expr::Num(q), at)),
            Some(Tok::True) => Ok((Expr::True, at)),
            Some(Tok::False) => Ok((Expr::False, at)),
            Some(Tok::Ident(name)) => {
                let written = if self.peek() == Some(&Tok::Prime) {
                    self.bump();
                    true
                } else {
                    false
                };
                Ok((Expr::Var { name, written }, at))
            }
            Some(Tok::LParen) => {
                let (inner, _) = self.or_expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok((inner, at))
            }
            _ => err(at, "expected a term or condition"),
        }
    }
}

// ── Lowering to constraints ─────────────────────────────────────────

struct Lowerer<'a> {
    decls: &'a BTreeMap<String, Sort>,
}

impl<'a> Lowerer<'a> {
    fn var(&self, name: &str, written: bool, at: usize) -> Result<Var, GuardParseError> {
        let sort = *self.decls.get(name).ok_or_else(|| GuardParseError {
            pos: at,
            msg: format!("undeclared variable '{name}'"),
        })?;
        let kind = if written {
            VarKind::Written
        } else {
            VarKind::Read
        };
        Ok(Var {
            name: name.to_string(),
            sort,
            kind,
        })
    }

    fn formula(&self, e: &Expr, at: usize) -> Result<Constraint, GuardParseError> {
        match e {
            Expr::True => Ok(Constraint::tt()),
            Expr::False => Ok(Constraint::ff()),
            Expr::Var { name, written } => {
                let v = self.var(name, *written, at)?;
                if v.sort != Sort::Bool {
                    return err(
                        at,
                        format!("variable '{name}' of sort {} used as a condition", v.sort),
                    );
                }
                Ok(Constraint::BoolVar(v))
            }
            Expr::Bin(BinOp::And, l, r) => Ok(Constraint::and(vec![
                self.formula(l, at)?,
                self.formula(r, at)?,
            ])),
            Expr::Bin(BinOp::Or, l, r) => Ok(Constraint::or(vec![
                self.formula(l, at)?,
                self.formula(r, at)?,
            ])),
            Expr::Bin(BinOp::Cmp(op), l, r) => {
                let lhs = self.term(l, at)?;
                let rhs = self.term(r, at)?;
                Constraint::atom(lhs, *op, rhs).map_err(|e| GuardParseError {
                    pos: at,
                    msg: e.to_string(),
                })
            }
            Expr::Num(_) | Expr::Neg(_) | Expr::Bin(..) => {
                err(at, "expected a condition, found an arithmetic term")
            }
        }
    }

    fn term(&self, e: &Expr, at: usize) -> Result<LinTerm, GuardParseError> {
        match e {
            Expr::Num(q) => Ok(LinTerm::constant(q.clone())),
            Expr::Var { name, written } => {
                let v = self.var(name, *written, at)?;
                if v.sort == Sort::Bool {
                    return err(at, format!("boolean variable '{name}' used in arithmetic"));
                }
                Ok(LinTerm::var(v))
            }
            Expr::Neg(inner) => Ok(self.term(inner, at)?.neg()),
            Expr::Bin(BinOp::Add, l, r) => Ok(self.term(l, at)?.add(&self.term(r, at)?)),
            Expr::Bin(BinOp::Sub, l, r) => Ok(self.term(l, at)?.sub(&self.term(r, at)?)),
            Expr::Bin(BinOp::Mul, l, r) => {
                let lhs = self.term(l, at)?;
                let rhs = self.term(r, at)?;
                if lhs.is_constant() {
                    Ok(rhs.scale(&lhs.constant))
                } else if rhs.is_constant() {
                    Ok(lhs.scale(&rhs.constant))
                } else {
                    err(
                        at,
                        "nonlinear term: '*' needs at least one constant operand",
                    )
                }
            }
            Expr::Bin(BinOp::Div, l, r) => {
                let lhs = self.term(l, at)?;
                let rhs = self.term(r, at)?;
                if !lhs.is_constant() || !rhs.is_constant() {
                    return err(at, "'/' is only allowed between constants");
                }
                if rhs.constant.is_zero() {
                    return err(at, "division by zero");
                }
                Ok(LinTerm::constant(lhs.constant / rhs.constant))
            }
            Expr::True | Expr::False | Expr::Bin(..) => {
                err(at, "expected an arithmetic term, found a condition")
            }
        }
    }
}

/// Parses guard text against declared variables (name → sort).
pub fn parse_guard(
    text: &str,
    decls: &BTreeMap<String, Sort>,
) -> Result<Constraint, GuardParseError> {
    let toks = tokenize(text)?;
    if toks.is_empty() {
        return err(0, "empty guard");
    }
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        end: text.len(),
    };
    let (expr, at) = p.or_expr()?;
    if p.pos != toks.len() {
        return err(p.here(), "trailing input after guard");
    }
    Lowerer { decls }.formula(&expr, at)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::{rat, ratio};

    fn decls() -> BTreeMap<String, Sort> {
        [
            ("o".to_string(), Sort::Rat),
            ("t".to_string(), Sort::Rat),
            ("n".to_string(), Sort::Int),
            ("b".to_string(), Sort::Bool),
        ]
        .into_iter()
        .collect()
    }

    #[test]
    fn parses_auction_guards() {
        let d = decls();
        let g = parse_guard("t > 0 && o' > o", &d).unwrap();
        assert_eq!(g.read_vars().len(), 2);
        assert_eq!(g.write_vars().len(), 1);
        assert_eq!(g.to_string(), "t > 0 && o' > o");
    }

    #[test]
    fn precedence_or_under_and() {
        let d = decls();
        let g = parse_guard("n != 0 || (n = 0 && t >= o)", &d).unwrap();
        // Mixed-sort atom t >= o is fine (both rat); n is int.
        match g {
            Constraint::Or(parts) => assert_eq!(parts.len(), 2),
            other => panic!("expected disjunction, got {other}"),
        }
    }

    #[test]
    fn rational_literals() {
        let d = decls();
        let g = parse_guard("o > 1/2", &d).unwrap();
        let h = parse_guard("o > 0.5", &d).unwrap();
        assert_eq!(g, h);
        let g = parse_guard("o > -3/2", &d).unwrap();
        match g {
            Constraint::Atom(a) => assert_eq!(a.rhs.constant, ratio(-3, 2)),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn linear_terms_with_constants() {
        let d = decls();
        let g = parse_guard("2*o + t - 1 >= 3*t", &d).unwrap();
        assert!(matches!(g, Constraint::Atom(_)));
        // Display round-trips through the parser.
        let again = parse_guard(&g.to_string(), &d).unwrap();
        assert_eq!(g, again);
    }

    #[test]
    fn rejects_nonlinear_and_bad_division() {
        let d = decls();
        let e = parse_guard("o * t > 0", &d).unwrap_err();
        assert!(e.msg.contains("nonlinear"));
        let e = parse_guard("o / 2 > 0", &d).unwrap_err();
        assert!(e.msg.contains("between constants"));
        let e = parse_guard("1 / 0 > o", &d).unwrap_err();
        assert!(e.msg.contains("division by zero"));
    }

    #[test]
    fn rejects_undeclared_and_ill_sorted() {
        let d = decls();
        let e = parse_guard("z > 0", &d).unwrap_err();
        assert!(e.msg.contains("undeclared"));
        let e = parse_guard("b > 0", &d).unwrap_err();
        assert!(e.msg.contains("boolean"));
        let e = parse_guard("o", &d).unwrap_err();
        assert!(e.msg.contains("used as a condition"));
        let e = parse_guard("n = o", &d).unwrap_err();
        assert!(e.msg.contains("mixes sorts"));
    }

    #[test]
    fn bool_vars_and_written_marks() {
        let d = decls();
        let g = parse_guard("b && o' = 0", &d).unwrap();
        match &g {
            Constraint::And(parts) => {
                assert!(matches!(&parts[0], Constraint::BoolVar(v) if v.kind == VarKind::Read));
            }
            other => panic!("unexpected {other}"),
        }
        let g = parse_guard("b'", &d).unwrap();
        assert!(matches!(g, Constraint::BoolVar(v) if v.kind == VarKind::Written));
    }

    #[test]
    fn error_positions_point_at_offender() {
        let d = decls();
        let e = parse_guard("o > 0 &&& t > 0", &d).unwrap_err();
        assert_eq!(e.pos, 8);
        let e = parse_guard("o > ", &d).unwrap_err();
        assert_eq!(e.pos, 4);
    }

    #[test]
    fn integer_atoms_reject_fractional_constants() {
        let d = decls();
        let e = parse_guard("n > 1/2", &d).unwrap_err();
        assert!(e.msg.contains("non-integer"));
        let g = parse_guard("n > -2", &d).unwrap();
        assert!(matches!(g, Constraint::Atom(_)));
        let _ = rat(0); // keep helper linked
    }
}
