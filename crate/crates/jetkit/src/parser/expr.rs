//! Infix expression grammar: `^` > unary minus > `*` `/` > `+` `-`.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use super::ParseError;
use crate::expr::{Expr, MultiIndex};

/// Declarations that resolve identifiers while parsing.
#[derive(Clone, Debug, Default)]
pub struct Scope {
    /// Independent variables in order; single letters enable the `z_xt` sugar.
    pub independent: Vec<String>,
    /// Dependent variables (local and nonlocal).
    pub dependent: Vec<String>,
    pub params: Vec<String>,
    /// Reject identifiers that are not declared.
    pub strict: bool,
    /// Extra named expressions substituted on sight.
    pub aliases: HashMap<String, Expr>,
}

impl Scope {
    /// Scope that accepts any identifier, with `x`, `t` as jet letters.
    pub fn free() -> Self {
        Scope { independent: vec!["x".into(), "t".into()], ..Scope::default() }
    }

    fn n(&self) -> usize {
        self.independent.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(BigRational),
    Ident(String),
    Op(char),
}

struct Lexer<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col0: usize,
    _src: &'a str,
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic()
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\'' || c == '\u{302}'
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str, line: usize, col0: usize) -> Result<Vec<(Tok, usize, Option<String>)>, ParseError> {
        let mut lx = Lexer { chars: src.chars().collect(), pos: 0, line, col0, _src: src };
        let mut out = Vec::new();
        while lx.pos < lx.chars.len() {
            let c = lx.chars[lx.pos];
            let start = lx.pos;
            if c.is_whitespace() {
                lx.pos += 1;
            } else if c.is_ascii_digit() || (c == '.' && lx.peek_digit(1)) {
                let mut s = String::new();
                while lx.pos < lx.chars.len() && (lx.chars[lx.pos].is_ascii_digit() || lx.chars[lx.pos] == '.') {
                    s.push(lx.chars[lx.pos]);
                    lx.pos += 1;
                }
                out.push((Tok::Num(lx.decimal(&s, start)?), start, None));
            } else if is_ident_start(c) {
                let mut s = String::new();
                while lx.pos < lx.chars.len() && is_ident_char(lx.chars[lx.pos]) {
                    s.push(lx.chars[lx.pos]);
                    lx.pos += 1;
                }
                // jet suffix: `_letters` or `@[i,j]`
                let mut suffix = None;
                if lx.pos + 1 < lx.chars.len() && lx.chars[lx.pos] == '_' && lx.chars[lx.pos + 1].is_alphabetic() {
                    lx.pos += 1;
                    let mut suf = String::from("_");
                    while lx.pos < lx.chars.len() && lx.chars[lx.pos].is_alphabetic() {
                        suf.push(lx.chars[lx.pos]);
                        lx.pos += 1;
                    }
                    suffix = Some(suf);
                } else if lx.pos < lx.chars.len() && lx.chars[lx.pos] == '@' {
                    let mut suf = String::new();
                    while lx.pos < lx.chars.len() && lx.chars[lx.pos] != ']' {
                        suf.push(lx.chars[lx.pos]);
                        lx.pos += 1;
                    }
                    if lx.pos >= lx.chars.len() {
                        return Err(lx.err(start, "unterminated `@[` index"));
                    }
                    suf.push(']');
                    lx.pos += 1;
                    suffix = Some(suf);
                }
                out.push((Tok::Ident(s), start, suffix));
            } else if "+-*/^(),".contains(c) {
                if c == '*' && lx.chars.get(lx.pos + 1) == Some(&'*') {
                    lx.pos += 2;
                    out.push((Tok::Op('^'), start, None));
                } else {
                    lx.pos += 1;
                    out.push((Tok::Op(c), start, None));
                }
            } else if c == '−' {
                lx.pos += 1;
                out.push((Tok::Op('-'), start, None));
            } else {
                return Err(lx.err(start, &format!("unexpected character `{c}`")));
            }
        }
        Ok(out)
    }

    fn peek_digit(&self, k: usize) -> bool {
        self.chars.get(self.pos + k).is_some_and(|c| c.is_ascii_digit())
    }

    fn decimal(&self, s: &str, start: usize) -> Result<BigRational, ParseError> {
        let mut parts = s.split('.');
        let int = parts.next().unwrap_or("");
        let frac = parts.next().unwrap_or("");
        if parts.next().is_some() {
            return Err(self.err(start, "malformed number"));
        }
        let digits = format!("{int}{frac}");
        let n: BigInt = if digits.is_empty() {
            BigInt::zero()
        } else {
            digits.parse().map_err(|_| self.err(start, "malformed number"))?
        };
        let d = num_traits::pow(BigInt::from(10), frac.len());
        Ok(BigRational::new(n, d))
    }

    fn err(&self, pos: usize, msg: &str) -> ParseError {
        ParseError { line: self.line, col: self.col0 + pos + 1, msg: msg.to_string() }
    }
}

struct Parser<'s> {
    toks: Vec<(Tok, usize, Option<String>)>,
    i: usize,
    scope: &'s Scope,
    line: usize,
    col0: usize,
    end: usize,
}

impl<'s> Parser<'s> {
    fn err_at(&self, pos: usize, msg: &str) -> ParseError {
        ParseError { line: self.line, col: self.col0 + pos + 1, msg: msg.to_string() }
    }

    fn err_here(&self, msg: &str) -> ParseError {
        let pos = self.toks.get(self.i).map_or(self.end, |t| t.1);
        self.err_at(pos, msg)
    }

    fn peek_op(&self) -> Option<char> {
        match self.toks.get(self.i) {
            Some((Tok::Op(c), ..)) => Some(*c),
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek_op() {
            self.i += 1;
            let rhs = self.term()?;
            acc = if c == '+' { acc.add(&rhs) } else { acc.sub(&rhs) };
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek_op() {
            let pos = self.toks[self.i].1;
            self.i += 1;
            let rhs = self.unary()?;
            acc = if c == '*' {
                acc.mul(&rhs)
            } else {
                acc.checked_div(&rhs).map_err(|e| self.err_at(pos, &e.to_string()))?
            };
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek_op() {
            Some('-') => {
                self.i += 1;
                Ok(self.unary()?.neg())
            }
            Some('+') => {
                self.i += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.peek_op() == Some('^') {
            let pos = self.toks[self.i].1;
            self.i += 1;
            let e = self.unary()?;
            return base.pow(&e).map_err(|err| self.err_at(pos, &err.to_string()));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let Some((tok, pos, suffix)) = self.toks.get(self.i).cloned() else {
            return Err(self.err_here("unexpected end of expression"));
        };
        self.i += 1;
        match tok {
            Tok::Num(r) => Ok(Expr::rat(r)),
            Tok::Op('(') => {
                let e = self.expr()?;
                if self.peek_op() != Some(')') {
                    return Err(self.err_here("expected `)`"));
                }
                self.i += 1;
                Ok(e)
            }
            Tok::Op(c) => Err(self.err_at(pos, &format!("unexpected `{c}`"))),
            Tok::Ident(name) => {
                if suffix.is_none() && self.peek_op() == Some('(') && is_function(&name) {
                    self.i += 1;
                    let arg = self.expr()?;
                    if self.peek_op() != Some(')') {
                        return Err(self.err_here("expected `)` after function argument"));
                    }
                    self.i += 1;
                    return Expr::make(&name, &[arg]).map_err(|e| self.err_at(pos, &e.to_string()));
                }
                self.ident(&name, suffix.as_deref(), pos)
            }
        }
    }

    fn ident(&self, name: &str, suffix: Option<&str>, pos: usize) -> Result<Expr, ParseError> {
        let sc = self.scope;
        if let Some(suf) = suffix {
            let idx = self.multi_index(suf, pos)?;
            if sc.strict && !sc.dependent.iter().any(|d| d == name) {
                return Err(self.err_at(pos, &format!("`{name}` is not a dependent variable")));
            }
            return Ok(Expr::jet(name, idx));
        }
        if let Some(e) = sc.aliases.get(name) {
            return Ok(e.clone());
        }
        if sc.dependent.iter().any(|d| d == name) {
            return Ok(Expr::jet(name, MultiIndex::zero(sc.n())));
        }
        if sc.strict && !sc.independent.iter().any(|d| d == name) && !sc.params.iter().any(|d| d == name) {
            return Err(self.err_at(pos, &format!("undeclared symbol `{name}`")));
        }
        Ok(Expr::sym(name))
    }

    fn multi_index(&self, suf: &str, pos: usize) -> Result<MultiIndex, ParseError> {
        let n = self.scope.n();
        if let Some(rest) = suf.strip_prefix('@') {
            let inner = rest.trim_start_matches('[').trim_end_matches(']');
            let v: Result<Vec<u32>, _> = inner.split(',').map(|s| s.trim().parse::<u32>()).collect();
            let v = v.map_err(|_| self.err_at(pos, "malformed `@[..]` index"))?;
            if v.len() != n {
                return Err(self.err_at(pos, &format!("index needs {n} entries")));
            }
            return Ok(MultiIndex::from_slice(&v));
        }
        let mut idx = vec![0u32; n];
        for ch in suf.trim_start_matches('_').chars() {
            let slot = self
                .scope
                .independent
                .iter()
                .position(|v| v.chars().count() == 1 && v.starts_with(ch))
                .ok_or_else(|| self.err_at(pos, &format!("`{ch}` is not an independent variable")))?;
            idx[slot] += 1;
        }
        Ok(MultiIndex::from_slice(&idx))
    }
}

fn is_function(name: &str) -> bool {
    matches!(name, "exp" | "ln" | "log" | "sin" | "cos" | "tan" | "arctan" | "atan" | "sqrt")
}

/// Parses text at a given line and column offset.
pub fn parse_expr_at(text: &str, scope: &Scope, line: usize, col0: usize) -> Result<Expr, ParseError> {
    let toks = Lexer::tokens(text, line, col0)?;
    let end = text.chars().count();
    let mut p = Parser { toks, i: 0, scope, line, col0, end };
    if p.toks.is_empty() {
        return Err(p.err_here("empty expression"));
    }
    let e = p.expr()?;
    if p.i < p.toks.len() {
        return Err(p.err_here("unexpected trailing input"));
    }
    Ok(e)
}

pub fn parse_expr_in(text: &str, scope: &Scope) -> Result<Expr, ParseError> {
    parse_expr_at(text, scope, 1, 0)
}

pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    parse_expr_in(text, &Scope::free())
}
