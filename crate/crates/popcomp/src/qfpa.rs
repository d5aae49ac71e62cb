//! Quantifier-free Presburger predicates over natural-number variables.
//!
//! A predicate is a boolean combination of two kinds of atoms:
//!
//! * threshold atoms `a1*x1 + ... + av*xv >= c` with integer coefficients,
//! * remainder atoms `a1*x1 + ... + av*xv = c mod theta` with `theta >= 1`,
//!   whose coefficients and target are stored reduced into `[0, theta)`.
//!
//! The concrete syntax accepted by [`parse`] uses `&&`, `||`, `!`, parentheses
//! and the literals `true` / `false`. `<=` is accepted and normalized to `>=`
//! by negating both sides. Variable names are identifiers with optional
//! trailing apostrophes, so `x'` is a valid variable distinct from `x`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Threshold atom `sum of a_i * x_i >= bound`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ThresholdAtom {
    /// Terms in print order; coefficients may be zero or negative.
    pub terms: Vec<(String, i64)>,
    pub bound: i64,
}

/// Remainder atom `sum of a_i * x_i = target (mod modulus)`.
///
/// Coefficients and target are kept reduced into `[0, modulus)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RemainderAtom {
    pub terms: Vec<(String, u64)>,
    pub modulus: u64,
    pub target: u64,
}

/// A quantifier-free Presburger predicate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Predicate {
    Threshold(ThresholdAtom),
    Remainder(RemainderAtom),
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
    Not(Box<Predicate>),
    Const(bool),
}

/// Error raised by [`parse`], with a byte offset into the input.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at byte {pos}: {msg}")]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

/// Error raised by [`Predicate::double`] when a primed variable name is
/// already taken.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot double: variable {0:?} already exists")]
pub struct DoubleError(pub String);

/// Signed binary decomposition: the powers of two summing to `n`, with the
/// sign of `n` attached to each, largest magnitude first. `bin(0)` is empty.
///
/// ```
/// use popcomp::qfpa::bin;
/// assert_eq!(bin(10), vec![8, 2]);
/// assert_eq!(bin(-13), vec![-8, -4, -1]);
/// assert_eq!(bin(0), Vec::<i64>::new());
/// ```
pub fn bin(n: i64) -> Vec<i64> {
    let mag = n.unsigned_abs();
    let sign = if n < 0 { -1 } else { 1 };
    (0..64)
        .rev()
        .filter(|i| mag & (1u64 << i) != 0)
        .map(|i| sign * (1i64 << i))
        .collect()
}

fn bits_u128(v: u128) -> u64 {
    if v == 0 {
        1
    } else {
        (128 - v.leading_zeros()) as u64
    }
}

impl Predicate {
    /// All variable names occurring in the predicate, sorted.
    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Predicate::Threshold(a) => out.extend(a.terms.iter().map(|(v, _)| v.clone())),
            Predicate::Remainder(a) => out.extend(a.terms.iter().map(|(v, _)| v.clone())),
            Predicate::And(l, r) | Predicate::Or(l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            Predicate::Not(p) => p.collect_vars(out),
            Predicate::Const(_) => {}
        }
    }

    /// Evaluates the predicate; variables missing from `x` count as zero.
    pub fn eval(&self, x: &BTreeMap<String, u64>) -> bool {
        match self {
            Predicate::Threshold(a) => {
                let mut sum = BigInt::zero();
                for (v, coeff) in &a.terms {
                    let val = x.get(v).copied().unwrap_or(0);
                    sum += BigInt::from(*coeff) * BigInt::from(val);
                }
                sum >= BigInt::from(a.bound)
            }
            Predicate::Remainder(a) => {
                let mut sum: u128 = 0;
                let m = a.modulus as u128;
                for (v, coeff) in &a.terms {
                    let val = x.get(v).copied().unwrap_or(0) as u128;
                    sum = (sum + (*coeff as u128 % m) * (val % m)) % m;
                }
                sum == a.target as u128
            }
            Predicate::And(l, r) => l.eval(x) && r.eval(x),
            Predicate::Or(l, r) => l.eval(x) || r.eval(x),
            Predicate::Not(p) => !p.eval(x),
            Predicate::Const(b) => *b,
        }
    }

    /// Substitutes `x_i` by `x_i + 2 * x_i'` for every variable, where the
    /// fresh name is the old one with an apostrophe appended. The doubled
    /// predicate over `(x, x')` agrees with the original on `x + 2x'`.
    pub fn double(&self) -> Result<Predicate, DoubleError> {
        let vars = self.vars();
        for v in &vars {
            let primed = format!("{v}'");
            if vars.contains(&primed) {
                return Err(DoubleError(primed));
            }
        }
        Ok(self.double_inner())
    }

    fn double_inner(&self) -> Predicate {
        match self {
            Predicate::Threshold(a) => {
                let mut terms = Vec::with_capacity(a.terms.len() * 2);
                for (v, coeff) in &a.terms {
                    terms.push((v.clone(), *coeff));
                    terms.push((format!("{v}'"), 2 * *coeff));
                }
                Predicate::Threshold(ThresholdAtom {
                    terms,
                    bound: a.bound,
                })
            }
            Predicate::Remainder(a) => {
                let mut terms = Vec::with_capacity(a.terms.len() * 2);
                for (v, coeff) in &a.terms {
                    terms.push((v.clone(), *coeff));
                    terms.push((format!("{v}'"), (2 * *coeff) % a.modulus));
                }
                Predicate::Remainder(RemainderAtom {
                    terms,
                    modulus: a.modulus,
                    target: a.target,
                })
            }
            Predicate::And(l, r) => Predicate::And(
                Box::new(l.double_inner()),
                Box::new(r.double_inner()),
            ),
            Predicate::Or(l, r) => Predicate::Or(
                Box::new(l.double_inner()),
                Box::new(r.double_inner()),
            ),
            Predicate::Not(p) => Predicate::Not(Box::new(p.double_inner())),
            Predicate::Const(b) => Predicate::Const(*b),
        }
    }

    /// Size proxy in bits: for every atom, the bit lengths of all constants
    /// (coefficients, bound, modulus) plus one per variable occurrence, plus
    /// one per boolean connective or constant leaf.
    pub fn size_bits(&self) -> u64 {
        match self {
            Predicate::Threshold(a) => {
                a.terms
                    .iter()
                    .map(|(_, c)| bits_u128(c.unsigned_abs() as u128) + 1)
                    .sum::<u64>()
                    + bits_u128(a.bound.unsigned_abs() as u128)
            }
            Predicate::Remainder(a) => {
                a.terms
                    .iter()
                    .map(|(_, c)| bits_u128(*c as u128) + 1)
                    .sum::<u64>()
                    + bits_u128(a.target as u128)
                    + bits_u128(a.modulus as u128)
            }
            Predicate::And(l, r) | Predicate::Or(l, r) => 1 + l.size_bits() + r.size_bits(),
            Predicate::Not(p) => 1 + p.size_bits(),
            Predicate::Const(_) => 1,
        }
    }

    /// Folds trivial atoms into boolean constants and simplifies constants
    /// through the connectives. An atom is trivial when its modulus is 1 or
    /// when all its coefficients are zero; such atoms hold or fail
    /// independently of the input.
    pub fn normalize(&self) -> Predicate {
        match self {
            Predicate::Threshold(a) => {
                if a.terms.iter().all(|(_, c)| *c == 0) {
                    Predicate::Const(0 >= a.bound)
                } else {
                    self.clone()
                }
            }
            Predicate::Remainder(a) => {
                if a.modulus == 1 {
                    Predicate::Const(true)
                } else if a.terms.iter().all(|(_, c)| *c == 0) {
                    Predicate::Const(a.target == 0)
                } else {
                    self.clone()
                }
            }
            Predicate::And(l, r) => match (l.normalize(), r.normalize()) {
                (Predicate::Const(false), _) | (_, Predicate::Const(false)) => {
                    Predicate::Const(false)
                }
                (Predicate::Const(true), p) | (p, Predicate::Const(true)) => p,
                (l, r) => Predicate::And(Box::new(l), Box::new(r)),
            },
            Predicate::Or(l, r) => match (l.normalize(), r.normalize()) {
                (Predicate::Const(true), _) | (_, Predicate::Const(true)) => {
                    Predicate::Const(true)
                }
                (Predicate::Const(false), p) | (p, Predicate::Const(false)) => p,
                (l, r) => Predicate::Or(Box::new(l), Box::new(r)),
            },
            Predicate::Not(p) => match p.normalize() {
                Predicate::Const(b) => Predicate::Const(!b),
                p => Predicate::Not(Box::new(p)),
            },
            Predicate::Const(b) => Predicate::Const(*b),
        }
    }

    /// Atoms in depth-first, left-to-right order.
    pub fn atoms(&self) -> Vec<&Predicate> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Predicate>) {
        match self {
            Predicate::Threshold(_) | Predicate::Remainder(_) => out.push(self),
            Predicate::And(l, r) | Predicate::Or(l, r) => {
                l.collect_atoms(out);
                r.collect_atoms(out);
            }
            Predicate::Not(p) => p.collect_atoms(out),
            Predicate::Const(_) => {}
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Predicate::Or(..) => 0,
            Predicate::And(..) => 1,
            Predicate::Not(..) => 2,
            _ => 3,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let prec = self.precedence();
        let paren = prec < min;
        if paren {
            write!(f, "(")?;
        }
        match self {
            Predicate::Threshold(a) => {
                for (i, (v, coeff)) in a.terms.iter().enumerate() {
                    if i == 0 {
                        if *coeff < 0 {
                            write!(f, "-")?;
                        }
                    } else if *coeff < 0 {
                        write!(f, " - ")?;
                    } else {
                        write!(f, " + ")?;
                    }
                    let mag = coeff.unsigned_abs();
                    if mag == 1 {
                        write!(f, "{v}")?;
                    } else {
                        write!(f, "{mag}*{v}")?;
                    }
                }
                write!(f, " >= {}", a.bound)?;
            }
            Predicate::Remainder(a) => {
                for (i, (v, coeff)) in a.terms.iter().enumerate() {
                    if i > 0 {
                        write!(f, " + ")?;
                    }
                    if *coeff == 1 {
                        write!(f, "{v}")?;
                    } else {
                        write!(f, "{coeff}*{v}")?;
                    }
                }
                write!(f, " = {} mod {}", a.target, a.modulus)?;
            }
            Predicate::And(l, r) => {
                l.fmt_prec(f, 1)?;
                write!(f, " && ")?;
                r.fmt_prec(f, 2)?;
            }
            Predicate::Or(l, r) => {
                l.fmt_prec(f, 0)?;
                write!(f, " || ")?;
                r.fmt_prec(f, 1)?;
            }
            Predicate::Not(p) => {
                write!(f, "!")?;
                p.fmt_prec(f, 3)?;
            }
            Predicate::Const(b) => write!(f, "{b}")?,
        }
        if paren {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(u64),
    Ident(String),
    Star,
    Plus,
    Minus,
    LParen,
    RParen,
    Bang,
    AndAnd,
    OrOr,
    Ge,
    Le,
    Eq,
    Mod,
    True,
    False,
}

struct Lexer {
    toks: Vec<(usize, Tok)>,
    end: usize,
}

fn lex(s: &str) -> Result<Lexer, ParseError> {
    let b = s.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'*' => {
                toks.push((i, Tok::Star));
                i += 1;
            }
            b'+' => {
                toks.push((i, Tok::Plus));
                i += 1;
            }
            b'-' => {
                toks.push((i, Tok::Minus));
                i += 1;
            }
            b'(' => {
                toks.push((i, Tok::LParen));
                i += 1;
            }
            b')' => {
                toks.push((i, Tok::RParen));
                i += 1;
            }
            b'!' => {
                toks.push((i, Tok::Bang));
                i += 1;
            }
            b'&' => {
                if b.get(i + 1) == Some(&b'&') {
                    toks.push((i, Tok::AndAnd));
                    i += 2;
                } else {
                    return Err(ParseError {
                        pos: i,
                        msg: "expected '&&'".into(),
                    });
                }
            }
            b'|' => {
                if b.get(i + 1) == Some(&b'|') {
                    toks.push((i, Tok::OrOr));
                    i += 2;
                } else {
                    return Err(ParseError {
                        pos: i,
                        msg: "expected '||'".into(),
                    });
                }
            }
            b'>' => {
                if b.get(i + 1) == Some(&b'=') {
                    toks.push((i, Tok::Ge));
                    i += 2;
                } else {
                    return Err(ParseError {
                        pos: i,
                        msg: "expected '>='".into(),
                    });
                }
            }
            b'<' => {
                if b.get(i + 1) == Some(&b'=') {
                    toks.push((i, Tok::Le));
                    i += 2;
                } else {
                    return Err(ParseError {
                        pos: i,
                        msg: "expected '<='".into(),
                    });
                }
            }
            b'=' => {
                toks.push((i, Tok::Eq));
                i += 1;
            }
            b'0'..=b'9' => {
                let start = i;
                while i < b.len() && b[i].is_ascii_digit() {
                    i += 1;
                }
                let text = &s[start..i];
                let v: u64 = text.parse().map_err(|_| ParseError {
                    pos: start,
                    msg: format!("integer {text} out of range"),
                })?;
                toks.push((start, Tok::Int(v)));
            }
            _ if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                    i += 1;
                }
                while i < b.len() && b[i] == b'\'' {
                    i += 1;
                }
                let word = &s[start..i];
                let tok = match word {
                    "mod" => Tok::Mod,
                    "true" => Tok::True,
                    "false" => Tok::False,
                    _ => Tok::Ident(word.to_string()),
                };
                toks.push((start, tok));
            }
            _ => {
                return Err(ParseError {
                    pos: i,
                    msg: format!("unexpected character {:?}", c as char),
                });
            }
        }
    }
    Ok(Lexer { toks, end: s.len() })
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

    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: &Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected {what}")))
        }
    }

    fn err(&self, msg: String) -> ParseError {
        ParseError {
            pos: self.here(),
            msg,
        }
    }

    fn parse_or(&mut self) -> Result<Predicate, ParseError> {
        let mut lhs = self.parse_and()?;
        while self.peek() == Some(&Tok::OrOr) {
            self.pos += 1;
            let rhs = self.parse_and()?;
            lhs = Predicate::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_and(&mut self) -> Result<Predicate, ParseError> {
        let mut lhs = self.parse_unary()?;
        while self.peek() == Some(&Tok::AndAnd) {
            self.pos += 1;
            let rhs = self.parse_unary()?;
            lhs = Predicate::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Predicate, ParseError> {
        match self.peek() {
            Some(Tok::Bang) => {
                self.pos += 1;
                let p = self.parse_unary()?;
                Ok(Predicate::Not(Box::new(p)))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let p = self.parse_or()?;
                self.expect(&Tok::RParen, "')'")?;
                Ok(p)
            }
            Some(Tok::True) => {
                self.pos += 1;
                Ok(Predicate::Const(true))
            }
            Some(Tok::False) => {
                self.pos += 1;
                Ok(Predicate::Const(false))
            }
            _ => self.parse_atom(),
        }
    }

    fn parse_int(&mut self) -> Result<i64, ParseError> {
        let mut sign = 1i64;
        if self.peek() == Some(&Tok::Minus) {
            sign = -1;
            self.pos += 1;
        } else if self.peek() == Some(&Tok::Plus) {
            self.pos += 1;
        }
        match self.bump() {
            Some(Tok::Int(v)) => {
                let v = i64::try_from(v).map_err(|_| self.err("integer out of range".into()))?;
                Ok(sign * v)
            }
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.err("expected integer".into()))
            }
        }
    }

    fn parse_atom(&mut self) -> Result<Predicate, ParseError> {
        let mut terms: Vec<(String, i64, usize)> = Vec::new();
        let mut first = true;
        loop {
            let mut sign = 1i64;
            if self.peek() == Some(&Tok::Minus) {
                sign = -1;
                self.pos += 1;
            } else if self.peek() == Some(&Tok::Plus) {
                if first {
                    return Err(self.err("expected term".into()));
                }
                self.pos += 1;
            } else if !first {
                break;
            }
            let coeff = match self.peek() {
                Some(Tok::Int(v)) => {
                    let v = *v;
                    self.pos += 1;
                    if self.peek() == Some(&Tok::Star) {
                        self.pos += 1;
                    }
                    sign * i64::try_from(v).map_err(|_| self.err("coefficient out of range".into()))?
                }
                _ => sign,
            };
            let vpos = self.here();
            let var = match self.bump() {
                Some(Tok::Ident(name)) => name,
                _ => {
                    self.pos = self.pos.saturating_sub(1);
                    return Err(self.err("expected variable".into()));
                }
            };
            if terms.iter().any(|(v, _, _)| *v == var) {
                return Err(ParseError {
                    pos: vpos,
                    msg: format!("variable {var:?} repeated in atom"),
                });
            }
            terms.push((var, coeff, vpos));
            first = false;
            match self.peek() {
                Some(Tok::Plus) | Some(Tok::Minus) => continue,
                _ => break,
            }
        }
        match self.bump() {
            Some(Tok::Ge) => {
                let bound = self.parse_int()?;
                Ok(Predicate::Threshold(ThresholdAtom {
                    terms: terms.into_iter().map(|(v, c, _)| (v, c)).collect(),
                    bound,
                }))
            }
            Some(Tok::Le) => {
                let bound = self.parse_int()?;
                let terms = terms
                    .into_iter()
                    .map(|(v, c, _)| {
                        c.checked_neg()
                            .map(|c| (v, c))
                            .ok_or_else(|| self.err("coefficient out of range".into()))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let bound = bound
                    .checked_neg()
                    .ok_or_else(|| self.err("bound out of range".into()))?;
                Ok(Predicate::Threshold(ThresholdAtom { terms, bound }))
            }
            Some(Tok::Eq) => {
                let target = self.parse_int()?;
                self.expect(&Tok::Mod, "'mod'")?;
                let mpos = self.here();
                let modulus = self.parse_int()?;
                if modulus <= 0 {
                    return Err(ParseError {
                        pos: mpos,
                        msg: format!("modulus must be positive, got {modulus}"),
                    });
                }
                let m = modulus as u64;
                let terms = terms
                    .into_iter()
                    .map(|(v, c, _)| (v, c.rem_euclid(modulus) as u64))
                    .collect();
                Ok(Predicate::Remainder(RemainderAtom {
                    terms,
                    modulus: m,
                    target: target.rem_euclid(modulus) as u64,
                }))
            }
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.err("expected '>=', '<=' or '='".into()))
            }
        }
    }
}

/// Parses the concrete predicate syntax. Errors carry a byte offset.
pub fn parse(s: &str) -> Result<Predicate, ParseError> {
    let lexer = lex(s)?;
    let mut p = Parser {
        toks: lexer.toks,
        pos: 0,
        end: lexer.end,
    };
    let pred = p.parse_or()?;
    if p.pos != p.toks.len() {
        return Err(p.err("unexpected trailing input".into()));
    }
    Ok(pred)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(pairs: &[(&str, u64)]) -> BTreeMap<String, u64> {
        pairs.iter().map(|(v, n)| (v.to_string(), *n)).collect()
    }

    #[test]
    fn bin_decomposition() {
        assert_eq!(bin(-13), vec![-8, -4, -1]);
        assert_eq!(bin(10), vec![8, 2]);
        assert_eq!(bin(0), Vec::<i64>::new());
        assert_eq!(bin(1), vec![1]);
        assert_eq!(bin(-1), vec![-1]);
    }

    #[test]
    fn parse_remainder() {
        let p = parse("8x + 2y + z = 4 mod 11").unwrap();
        assert_eq!(
            p,
            Predicate::Remainder(RemainderAtom {
                terms: vec![
                    ("x".into(), 8),
                    ("y".into(), 2),
                    ("z".into(), 1)
                ],
                modulus: 11,
                target: 4,
            })
        );
    }

    #[test]
    fn parse_remainder_reduces_coefficients() {
        let p = parse("7x - 2y = 11 mod 7").unwrap();
        assert_eq!(
            p,
            Predicate::Remainder(RemainderAtom {
                terms: vec![("x".into(), 0), ("y".into(), 5)],
                modulus: 7,
                target: 4,
            })
        );
    }

    #[test]
    fn parse_threshold() {
        let p = parse("-2x + y >= 5").unwrap();
        assert_eq!(
            p,
            Predicate::Threshold(ThresholdAtom {
                terms: vec![("x".into(), -2), ("y".into(), 1)],
                bound: 5,
            })
        );
    }

    #[test]
    fn parse_le_normalizes() {
        assert_eq!(parse("x - y <= -1").unwrap(), parse("-x + y >= 1").unwrap());
    }

    #[test]
    fn parse_rejects_bad_modulus() {
        let e = parse("x = 1 mod 0").unwrap_err();
        assert_eq!(e.pos, 10);
        let e = parse("x = 1 mod -3").unwrap_err();
        assert!(e.msg.contains("positive"));
    }

    #[test]
    fn parse_rejects_repeated_variable() {
        let e = parse("x + x >= 1").unwrap_err();
        assert_eq!(e.pos, 4);
    }

    #[test]
    fn parse_boolean_structure() {
        let p = parse("(8x + 5y = 4 mod 11) || -2x + y >= 5").unwrap();
        assert!(matches!(p, Predicate::Or(..)));
        let p = parse("!(x >= 1) && true").unwrap();
        assert!(matches!(p, Predicate::And(..)));
    }

    #[test]
    fn eval_disjunction_example() {
        let p = parse("(8x + 5y = 4 mod 11) || (-2x + y >= 5)").unwrap();
        assert!(!p.eval(&input(&[("x", 1), ("y", 3)])));
        assert!(p.eval(&input(&[("x", 1), ("y", 7)])));
        assert!(p.eval(&input(&[("x", 0), ("y", 3)])));
    }

    #[test]
    fn double_threshold() {
        let p = parse("x - y >= 0").unwrap();
        let d = p.double().unwrap();
        assert_eq!(d, parse("x + 2x' - y - 2y' >= 0").unwrap());
    }

    #[test]
    fn double_remainder_reduces() {
        let p = parse("3x = 1 mod 5").unwrap();
        let d = p.double().unwrap();
        assert_eq!(d, parse("3x + x' = 1 mod 5").unwrap());
    }

    #[test]
    fn double_collision() {
        let p = parse("x + 2x' >= 1").unwrap();
        assert_eq!(p.double().unwrap_err(), DoubleError("x'".into()));
    }

    #[test]
    fn double_agrees_on_encoded_inputs() {
        let p = parse("(2x + y = 3 mod 5) && (x - y >= -2)").unwrap();
        let d = p.double().unwrap();
        for x in 0..6u64 {
            for xp in 0..4u64 {
                for y in 0..6u64 {
                    for yp in 0..4u64 {
                        let orig = input(&[("x", x + 2 * xp), ("y", y + 2 * yp)]);
                        let enc = input(&[("x", x), ("x'", xp), ("y", y), ("y'", yp)]);
                        assert_eq!(p.eval(&orig), d.eval(&enc));
                    }
                }
            }
        }
    }

    #[test]
    fn normalize_folds_trivial_atoms() {
        assert_eq!(
            parse("x = 0 mod 1").unwrap().normalize(),
            Predicate::Const(true)
        );
        assert_eq!(
            parse("0*x >= 1").unwrap().normalize(),
            Predicate::Const(false)
        );
        assert_eq!(
            parse("0*x >= -1").unwrap().normalize(),
            Predicate::Const(true)
        );
        assert_eq!(
            parse("7x = 11 mod 7").unwrap().normalize(),
            Predicate::Const(false)
        );
        assert_eq!(
            parse("(x = 0 mod 1) && y >= 1").unwrap().normalize(),
            parse("y >= 1").unwrap()
        );
        assert_eq!(
            parse("(x = 0 mod 1) || y >= 1").unwrap().normalize(),
            Predicate::Const(true)
        );
        assert_eq!(
            parse("!(x = 0 mod 1)").unwrap().normalize(),
            Predicate::Const(false)
        );
    }

    #[test]
    fn print_round_trips() {
        for s in [
            "8x + 2y + z = 4 mod 11",
            "-2x + y >= 5",
            "(8x + 5y = 4 mod 11) || -2x + y >= 5",
            "!(x >= 1 && y >= 2) || x = 1 mod 3",
            "x + 2x' - y - 2y' >= 0",
            "true",
            "!(x >= 1 || false)",
        ] {
            let p = parse(s).unwrap();
            let printed = p.to_string();
            assert_eq!(parse(&printed).unwrap(), p, "printed form: {printed}");
        }
    }

    #[test]
    fn vars_sorted() {
        let p = parse("y + x >= 1").unwrap();
        let vs: Vec<_> = p.vars().into_iter().collect();
        assert_eq!(vs, vec!["x".to_string(), "y".to_string()]);
    }

    #[test]
    fn size_bits_monotone_in_constants() {
        let small = parse("x >= 1").unwrap().size_bits();
        let large = parse("100x >= 1000").unwrap().size_bits();
        assert!(small < large);
    }

    #[test]
    fn json_round_trip() {
        let p = parse("(8x + 5y = 4 mod 11) || -2x + y >= 5").unwrap();
        let json = serde_json::to_string(&p).unwrap();
        let back: Predicate = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }
}
