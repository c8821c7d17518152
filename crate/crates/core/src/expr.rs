//! Integer expressions in the level index `n`.
//!
//! Grammar (whitespace ignored), with the usual precedence:
//!
//! ```text
//! sum     := product ('+' product)*
//! product := power ('*' power)*
//! power   := postfix ('^' uint)?
//! postfix := atom '!'*
//! atom    := uint | 'n' | '(' sum ')'
//! ```
//!
//! There is no subtraction or division, so every expression is a
//! non-negative integer at every `n`.

use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive};

use crate::error::{Error, Result};
use crate::poly::Poly;

/// Factorial arguments beyond this are refused rather than computed.
pub const MAX_FACTORIAL_ARG: u64 = 100_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EntryExpr {
    Const(BigUint),
    N,
    Add(Box<EntryExpr>, Box<EntryExpr>),
    Mul(Box<EntryExpr>, Box<EntryExpr>),
    Pow(Box<EntryExpr>, u32),
    Fact(Box<EntryExpr>),
}

impl EntryExpr {
    pub fn constant(c: u64) -> Self {
        EntryExpr::Const(BigUint::from(c))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut p = Parser {
            chars: text.chars().collect(),
            pos: 0,
        };
        p.skip_ws();
        if p.pos == p.chars.len() {
            return Err(p.error("empty expression"));
        }
        let e = p.sum()?;
        p.skip_ws();
        if p.pos != p.chars.len() {
            return Err(p.error(&format!("unexpected '{}'", p.chars[p.pos])));
        }
        Ok(e)
    }

    pub fn eval(&self, n: u64) -> Result<BigUint> {
        Ok(match self {
            EntryExpr::Const(c) => c.clone(),
            EntryExpr::N => BigUint::from(n),
            EntryExpr::Add(a, b) => a.eval(n)? + b.eval(n)?,
            EntryExpr::Mul(a, b) => a.eval(n)? * b.eval(n)?,
            EntryExpr::Pow(a, k) => num_traits::pow(a.eval(n)?, *k as usize),
            EntryExpr::Fact(a) => {
                let v = a.eval(n)?;
                let k = v
                    .to_u64()
                    .filter(|&k| k <= MAX_FACTORIAL_ARG)
                    .ok_or_else(|| Error::Resource(format!("factorial argument {v} too large")))?;
                (1..=k).fold(BigUint::one(), |acc, i| acc * i)
            }
        })
    }

    pub fn has_factorial(&self) -> bool {
        match self {
            EntryExpr::Const(_) | EntryExpr::N => false,
            EntryExpr::Add(a, b) | EntryExpr::Mul(a, b) => a.has_factorial() || b.has_factorial(),
            EntryExpr::Pow(a, _) => a.has_factorial(),
            EntryExpr::Fact(_) => true,
        }
    }

    /// Polynomial normal form in `n`, if the expression is factorial-free.
    /// Constant factorials such as `3!` are folded.
    pub fn to_poly(&self) -> Option<Poly> {
        match self {
            EntryExpr::Const(c) => Some(Poly::constant(BigInt::from(c.clone()))),
            EntryExpr::N => Some(Poly::n()),
            EntryExpr::Add(a, b) => Some(a.to_poly()? + b.to_poly()?),
            EntryExpr::Mul(a, b) => Some(&a.to_poly()? * &b.to_poly()?),
            EntryExpr::Pow(a, k) => Some(a.to_poly()?.pow(*k)),
            EntryExpr::Fact(a) => {
                let p = a.to_poly()?;
                if p.degree().unwrap_or(0) > 0 {
                    return None;
                }
                let v = self.eval(0).ok()?;
                Some(Poly::constant(BigInt::from(v)))
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            EntryExpr::Add(..) => 1,
            EntryExpr::Mul(..) => 2,
            EntryExpr::Pow(..) => 3,
            EntryExpr::Fact(..) => 4,
            EntryExpr::Const(_) | EntryExpr::N => 5,
        }
    }

    fn fmt_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            write!(f, "(")?;
            self.fmt_at(f, 0)?;
            return write!(f, ")");
        }
        match self {
            EntryExpr::Const(c) => write!(f, "{c}"),
            EntryExpr::N => write!(f, "n"),
            EntryExpr::Add(a, b) => {
                a.fmt_at(f, 1)?;
                write!(f, "+")?;
                b.fmt_at(f, 2)
            }
            EntryExpr::Mul(a, b) => {
                a.fmt_at(f, 2)?;
                write!(f, "*")?;
                b.fmt_at(f, 3)
            }
            EntryExpr::Pow(a, k) => {
                a.fmt_at(f, 4)?;
                write!(f, "^{k}")
            }
            EntryExpr::Fact(a) => {
                a.fmt_at(f, 4)?;
                write!(f, "!")
            }
        }
    }
}

impl fmt::Display for EntryExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(f, 0)
    }
}

impl std::str::FromStr for EntryExpr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        EntryExpr::parse(s)
    }
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn error(&self, message: &str) -> Error {
        Error::Syntax {
            line: 1,
            column: self.pos + 1,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.pos < self.chars.len() && self.chars[self.pos] == c {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn sum(&mut self) -> Result<EntryExpr> {
        let mut e = self.product()?;
        while self.eat('+') {
            let r = self.product()?;
            e = EntryExpr::Add(Box::new(e), Box::new(r));
        }
        Ok(e)
    }

    fn product(&mut self) -> Result<EntryExpr> {
        let mut e = self.power()?;
        while self.eat('*') {
            let r = self.power()?;
            e = EntryExpr::Mul(Box::new(e), Box::new(r));
        }
        Ok(e)
    }

    fn power(&mut self) -> Result<EntryExpr> {
        let base = self.postfix()?;
        if self.eat('^') {
            self.skip_ws();
            let start = self.pos;
            let digits = self.digits();
            if digits.is_empty() {
                self.pos = start;
                return Err(self.error("expected unsigned integer exponent"));
            }
            let k: u32 = digits.parse().map_err(|_| {
                let mut e = self.error("exponent too large");
                if let Error::Syntax { column, .. } = &mut e {
                    *column = start + 1;
                }
                e
            })?;
            return Ok(EntryExpr::Pow(Box::new(base), k));
        }
        Ok(base)
    }

    fn postfix(&mut self) -> Result<EntryExpr> {
        let mut e = self.atom()?;
        while self.eat('!') {
            e = EntryExpr::Fact(Box::new(e));
        }
        Ok(e)
    }

    fn digits(&mut self) -> String {
        let start = self.pos;
        while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }

    fn atom(&mut self) -> Result<EntryExpr> {
        self.skip_ws();
        match self.chars.get(self.pos) {
            Some('n') => {
                self.pos += 1;
                Ok(EntryExpr::N)
            }
            Some(c) if c.is_ascii_digit() => {
                let d = self.digits();
                Ok(EntryExpr::Const(d.parse().expect("digits parse")))
            }
            Some('(') => {
                self.pos += 1;
                let e = self.sum()?;
                if !self.eat(')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(e)
            }
            Some('-') => Err(self.error("subtraction and negative numbers are not allowed")),
            Some(c) => Err(self.error(&format!("unexpected '{c}'"))),
            None => Err(self.error("unexpected end of expression")),
        }
    }
}
