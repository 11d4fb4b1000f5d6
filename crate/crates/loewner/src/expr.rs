//! A small complex-expression language in the variables `z` and `t`.
//!
//! Grammar (whitespace insensitive, ASCII):
//!
//! ```text
//! expr   := term { ("+"|"-") term }
//! term   := factor { ("*"|"/") factor }
//! factor := "-" factor | atom [ "^" integer ]
//! atom   := number | "i" | "z" | "t" | ident "(" expr ")" | "(" expr ")"
//! ident  := "exp" | "log" | "sqrt"
//! ```
//!
//! Unary minus binds looser than `^`, so `-z^2` parses as `-(z^2)`.
//! `log` and `sqrt` use principal branches (cut on the negative real axis).

use num_complex::Complex64;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: expected {expected}, found {found}")]
    Syntax {
        offset: usize,
        expected: String,
        found: String,
    },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdent { offset: usize, name: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("division by zero in `{subexpr}` at z={z}, t={t}")]
    DivisionByZero { subexpr: String, z: Complex64, t: f64 },
    #[error("{func} of zero in `{subexpr}` at z={z}, t={t}")]
    BranchPointAtZero {
        func: &'static str,
        subexpr: String,
        z: Complex64,
        t: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(Complex64),
    Z,
    T,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn parse(source: &str) -> Result<Expr, ParseError> {
        let mut p = Parser::new(source);
        let e = p.expr()?;
        p.expect_eof()?;
        Ok(e)
    }

    pub fn constant(value: Complex64) -> Expr {
        Expr::Num(value)
    }

    pub fn evaluate(&self, z: Complex64, t: f64) -> Result<Complex64, EvalError> {
        match self {
            Expr::Num(c) => Ok(*c),
            Expr::Z => Ok(z),
            Expr::T => Ok(Complex64::new(t, 0.0)),
            Expr::Neg(e) => Ok(-e.evaluate(z, t)?),
            Expr::Add(a, b) => Ok(a.evaluate(z, t)? + b.evaluate(z, t)?),
            Expr::Sub(a, b) => Ok(a.evaluate(z, t)? - b.evaluate(z, t)?),
            Expr::Mul(a, b) => Ok(a.evaluate(z, t)? * b.evaluate(z, t)?),
            Expr::Div(a, b) => {
                let den = b.evaluate(z, t)?;
                if den == Complex64::new(0.0, 0.0) {
                    return Err(EvalError::DivisionByZero {
                        subexpr: self.to_string(),
                        z,
                        t,
                    });
                }
                Ok(a.evaluate(z, t)? / den)
            }
            Expr::Pow(e, n) => {
                let base = e.evaluate(z, t)?;
                if *n < 0 && base == Complex64::new(0.0, 0.0) {
                    return Err(EvalError::DivisionByZero {
                        subexpr: self.to_string(),
                        z,
                        t,
                    });
                }
                Ok(base.powi(*n))
            }
            Expr::Call(f, e) => {
                let v = e.evaluate(z, t)?;
                match f {
                    Func::Exp => Ok(v.exp()),
                    Func::Log => {
                        if v == Complex64::new(0.0, 0.0) {
                            return Err(EvalError::BranchPointAtZero {
                                func: "log",
                                subexpr: self.to_string(),
                                z,
                                t,
                            });
                        }
                        Ok(v.ln())
                    }
                    Func::Sqrt => Ok(v.sqrt()),
                }
            }
        }
    }

    /// Symbolic derivative with respect to `z`, treating `t` as constant.
    pub fn differentiate_z(&self) -> Expr {
        match self {
            Expr::Num(_) | Expr::T => Expr::Num(Complex64::new(0.0, 0.0)),
            Expr::Z => Expr::Num(Complex64::new(1.0, 0.0)),
            Expr::Neg(e) => neg(e.differentiate_z()),
            Expr::Add(a, b) => add(a.differentiate_z(), b.differentiate_z()),
            Expr::Sub(a, b) => sub(a.differentiate_z(), b.differentiate_z()),
            Expr::Mul(a, b) => add(
                mul(a.differentiate_z(), (**b).clone()),
                mul((**a).clone(), b.differentiate_z()),
            ),
            Expr::Div(a, b) => div(
                sub(
                    mul(a.differentiate_z(), (**b).clone()),
                    mul((**a).clone(), b.differentiate_z()),
                ),
                Expr::Pow(b.clone(), 2),
            ),
            Expr::Pow(e, n) => mul(
                mul(
                    Expr::Num(Complex64::new(*n as f64, 0.0)),
                    Expr::Pow(e.clone(), n - 1),
                ),
                e.differentiate_z(),
            ),
            Expr::Call(Func::Exp, e) => mul((*self).clone(), e.differentiate_z()),
            Expr::Call(Func::Log, e) => div(e.differentiate_z(), (**e).clone()),
            Expr::Call(Func::Sqrt, e) => div(
                e.differentiate_z(),
                mul(Expr::Num(Complex64::new(2.0, 0.0)), (*self).clone()),
            ),
        }
    }

    /// True when the expression mentions the time variable.
    pub fn uses_t(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Z => false,
            Expr::T => true,
            Expr::Neg(e) | Expr::Pow(e, _) | Expr::Call(_, e) => e.uses_t(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.uses_t() || b.uses_t()
            }
        }
    }
}

fn is_zero(e: &Expr) -> bool {
    matches!(e, Expr::Num(c) if *c == Complex64::new(0.0, 0.0))
}

fn is_one(e: &Expr) -> bool {
    matches!(e, Expr::Num(c) if *c == Complex64::new(1.0, 0.0))
}

// Smart constructors with light constant folding; keeps derivative trees small.
fn neg(e: Expr) -> Expr {
    if is_zero(&e) {
        e
    } else {
        Expr::Neg(Box::new(e))
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) {
        b
    } else if is_zero(&b) {
        a
    } else {
        Expr::Add(Box::new(a), Box::new(b))
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    if is_zero(&b) {
        a
    } else if is_zero(&a) {
        neg(b)
    } else {
        Expr::Sub(Box::new(a), Box::new(b))
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) || is_one(&b) {
        a
    } else if is_zero(&b) || is_one(&a) {
        b
    } else {
        Expr::Mul(Box::new(a), Box::new(b))
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) || is_one(&b) {
        a
    } else {
        Expr::Div(Box::new(a), Box::new(b))
    }
}

// Precedence levels for printing: 0 add/sub, 1 mul/div, 2 unary minus, 3 pow/atom.
fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 0,
        Expr::Mul(..) | Expr::Div(..) => 1,
        Expr::Neg(..) => 2,
        Expr::Pow(..) => 3,
        Expr::Num(c) if c.re < 0.0 || (c.re == 0.0 && c.im < 0.0) => 2,
        _ => 4,
    }
}

fn fmt_child(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    if prec(e) < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(c) => {
                if c.im == 0.0 {
                    write!(f, "{:?}", c.re)
                } else if c.re == 0.0 {
                    if c.im == 1.0 {
                        write!(f, "i")
                    } else {
                        write!(f, "{:?}*i", c.im)
                    }
                } else {
                    write!(f, "({:?}+{:?}*i)", c.re, c.im)
                }
            }
            Expr::Z => write!(f, "z"),
            Expr::T => write!(f, "t"),
            Expr::Neg(e) => {
                write!(f, "-")?;
                fmt_child(f, e, 2)
            }
            Expr::Add(a, b) => {
                fmt_child(f, a, 0)?;
                write!(f, "+")?;
                fmt_child(f, b, 1)
            }
            Expr::Sub(a, b) => {
                fmt_child(f, a, 0)?;
                write!(f, "-")?;
                fmt_child(f, b, 1)
            }
            Expr::Mul(a, b) => {
                fmt_child(f, a, 1)?;
                write!(f, "*")?;
                fmt_child(f, b, 2)
            }
            Expr::Div(a, b) => {
                fmt_child(f, a, 1)?;
                write!(f, "/")?;
                fmt_child(f, b, 2)
            }
            Expr::Pow(e, n) => {
                fmt_child(f, e, 4)?;
                write!(f, "^{n}")
            }
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn found_desc(&self) -> String {
        match self.src.get(self.pos) {
            Some(c) => format!("`{}`", *c as char),
            None => "end of input".to_string(),
        }
    }

    fn err(&mut self, expected: &str) -> ParseError {
        self.skip_ws();
        ParseError::Syntax {
            offset: self.pos,
            expected: expected.to_string(),
            found: self.found_desc(),
        }
    }

    fn expect_eof(&mut self) -> Result<(), ParseError> {
        if self.peek().is_some() {
            return Err(self.err("operator or end of input"));
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(c) = self.peek() {
            match c {
                b'+' => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                b'-' => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        while let Some(c) = self.peek() {
            match c {
                b'*' => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                b'/' => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.factor()?)))
            }
            _ => {
                let base = self.atom()?;
                if self.peek() == Some(b'^') {
                    self.pos += 1;
                    let n = self.integer()?;
                    Ok(Expr::Pow(Box::new(base), n))
                } else {
                    Ok(base)
                }
            }
        }
    }

    fn integer(&mut self) -> Result<i32, ParseError> {
        self.skip_ws();
        let start = self.pos;
        if self.src.get(self.pos) == Some(&b'-') {
            self.pos += 1;
        }
        let digits_start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == digits_start {
            self.pos = start;
            return Err(self.err("integer exponent"));
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse().map_err(|_| self.err("integer exponent"))
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("`)`"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                match name {
                    "i" => Ok(Expr::Num(Complex64::i())),
                    "z" => Ok(Expr::Z),
                    "t" => Ok(Expr::T),
                    "exp" | "log" | "sqrt" => {
                        let func = match name {
                            "exp" => Func::Exp,
                            "log" => Func::Log,
                            _ => Func::Sqrt,
                        };
                        if self.peek() != Some(b'(') {
                            return Err(self.err("`(`"));
                        }
                        self.pos += 1;
                        let e = self.expr()?;
                        if self.peek() != Some(b')') {
                            return Err(self.err("`)`"));
                        }
                        self.pos += 1;
                        Ok(Expr::Call(func, Box::new(e)))
                    }
                    _ => Err(ParseError::UnknownIdent {
                        offset: start,
                        name: name.to_string(),
                    }),
                }
            }
            _ => Err(self.err("number, `i`, `z`, `t`, function call, or `(`")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
        {
            self.pos += 1;
        }
        // Optional exponent part.
        if matches!(self.src.get(self.pos), Some(b'e') | Some(b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            if !matches!(self.src.get(self.pos), Some(c) if c.is_ascii_digit()) {
                self.pos = mark; // `e` belonged to something else; back off
            } else {
                while matches!(self.src.get(self.pos), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match text.parse::<f64>() {
            Ok(v) => Ok(Expr::Num(Complex64::new(v, 0.0))),
            Err(_) => {
                self.pos = start;
                Err(self.err("number"))
            }
        }
    }
}
