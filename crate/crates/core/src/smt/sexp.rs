//! Minimal s-expression reader for solver responses.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexp {
    Sym(String),
    List(Vec<Sexp>),
}

impl Sexp {
    pub fn sym(&self) -> Option<&str> {
        match self {
            Sexp::Sym(s) => Some(s),
            Sexp::List(_) => None,
        }
    }

    pub fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(items) => Some(items),
            Sexp::Sym(_) => None,
        }
    }

    /// Head symbol of a list, e.g. `and` in `(and a b)`.
    pub fn head(&self) -> Option<&str> {
        self.list()
            .and_then(|items| items.first())
            .and_then(Sexp::sym)
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Sym(s) => write!(f, "{s}"),
            Sexp::List(items) => {
                write!(f, "(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Parses one complete s-expression (symbol or parenthesized list).
/// Understands `"..."` string literals and `|...|` quoted symbols.
pub fn parse(text: &str) -> Result<Sexp, String> {
    let mut chars: Vec<char> = text.chars().collect();
    // Normalize: the reader works on a char slice with an index.
    let mut pos = 0usize;
    let sexp = parse_at(&mut chars, &mut pos)?;
    Ok(sexp)
}

fn skip_ws(chars: &[char], pos: &mut usize) {
    while *pos < chars.len() {
        match chars[*pos] {
            c if c.is_whitespace() => *pos += 1,
            ';' => {
                while *pos < chars.len() && chars[*pos] != '\n' {
                    *pos += 1;
                }
            }
            _ => break,
        }
    }
}

fn parse_at(chars: &mut Vec<char>, pos: &mut usize) -> Result<Sexp, String> {
    skip_ws(chars, pos);
    if *pos >= chars.len() {
        return Err("unexpected end of input".into());
    }
    match chars[*pos] {
        '(' => {
            *pos += 1;
            let mut items = Vec::new();
            loop {
                skip_ws(chars, pos);
                if *pos >= chars.len() {
                    return Err("unterminated list".into());
                }
                if chars[*pos] == ')' {
                    *pos += 1;
                    return Ok(Sexp::List(items));
                }
                items.push(parse_at(chars, pos)?);
            }
        }
        ')' => Err("unexpected ')'".into()),
        '"' => {
            *pos += 1;
            let mut s = String::from("\"");
            while *pos < chars.len() {
                let c = chars[*pos];
                *pos += 1;
                s.push(c);
                if c == '"' {
                    // SMT-LIB escapes a quote by doubling it.
                    if *pos < chars.len() && chars[*pos] == '"' {
                        s.push('"');
                        *pos += 1;
                    } else {
                        return Ok(Sexp::Sym(s));
                    }
                }
            }
            Err("unterminated string".into())
        }
        '|' => {
            *pos += 1;
            let mut s = String::new();
            while *pos < chars.len() {
                let c = chars[*pos];
                *pos += 1;
                if c == '|' {
                    return Ok(Sexp::Sym(s));
                }
                s.push(c);
            }
            Err("unterminated quoted symbol".into())
        }
        _ => {
            let start = *pos;
            while *pos < chars.len() {
                let c = chars[*pos];
                if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                    break;
                }
                *pos += 1;
            }
            Ok(Sexp::Sym(chars[start..*pos].iter().collect()))
        }
    }
}
