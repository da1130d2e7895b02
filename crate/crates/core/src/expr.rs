//! Scalar fields as expression strings. The grammar is deliberately small:
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := ('-')? power
//! power  := atom ('^' power)?          -- right associative
//! atom   := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! Numbers start with a digit (so `.5` is rejected) and may carry a fraction
//! and a decimal exponent. `pi` and `e` are built-in constants unless the
//! chart names a coordinate that shadows them. Functions: sin cos tan asin
//! acos atan sinh cosh tanh exp log sqrt (log is natural).
//!
//! Evaluation produces a [`Jet`], so one pass yields the value and all
//! partial derivatives up to the requested order. Integer constant exponents
//! go through repeated multiplication (negative bases stay legal); anything
//! else is exp(y·log x) and requires a positive base.

use crate::error::{Error, Result};
use crate::jet::Jet;
use std::fmt::Write as _;

/// The function names the grammar accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Asin,
    Acos,
    Atan,
    Sinh,
    Cosh,
    Tanh,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "asin" => Func::Asin,
            "acos" => Func::Acos,
            "atan" => Func::Atan,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Asin => "asin",
            Func::Acos => "acos",
            Func::Atan => "atan",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }
}

/// Parsed expression. Variables keep both the coordinate name (for printing)
/// and the resolved chart index (for evaluation). The parser never produces
/// a negative `Const`; a leading minus becomes `Neg`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var { name: String, index: usize },
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn var(name: &str, index: usize) -> Expr {
        Expr::Var {
            name: name.to_string(),
            index,
        }
    }

    /// Pretty form with minimal parentheses; `parse(print(e))` is
    /// structurally identical to `e` for any parser-produced expression.
    pub fn print(&self) -> String {
        let mut s = String::new();
        self.write(&mut s, 0);
        s
    }

    // Precedence levels: 1 add/sub, 2 mul/div, 3 unary minus, 4 power,
    // 5 atoms. `min` is the lowest level printable without parentheses here.
    fn write(&self, out: &mut String, min: u8) {
        let prec = match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(..) => 3,
            Expr::Pow(..) => 4,
            Expr::Const(c) if *c < 0.0 => 3, // prints through a unary minus
            _ => 5,
        };
        if prec < min {
            out.push('(');
            self.write_bare(out);
            out.push(')');
        } else {
            self.write_bare(out);
        }
    }

    fn write_bare(&self, out: &mut String) {
        match self {
            Expr::Const(c) => {
                if *c < 0.0 {
                    out.push('-');
                    let _ = write!(out, "{}", -c);
                } else {
                    let _ = write!(out, "{}", c);
                }
            }
            Expr::Var { name, .. } => out.push_str(name),
            Expr::Neg(a) => {
                out.push('-');
                a.write(out, 4);
            }
            Expr::Add(a, b) => {
                a.write(out, 1);
                out.push('+');
                b.write(out, 2); // a+(b+c) keeps its parens; a+b+c re-associates left
            }
            Expr::Sub(a, b) => {
                a.write(out, 1);
                out.push('-');
                b.write(out, 2);
            }
            Expr::Mul(a, b) => {
                a.write(out, 2);
                out.push('*');
                b.write(out, 3);
            }
            Expr::Div(a, b) => {
                a.write(out, 2);
                out.push('/');
                b.write(out, 3);
            }
            Expr::Pow(a, b) => {
                a.write(out, 5);
                out.push('^');
                b.write(out, 4); // right associative: a^b^c needs no parens
            }
            Expr::Call(f, a) => {
                out.push_str(f.name());
                out.push('(');
                a.write(out, 0);
                out.push(')');
            }
        }
    }

    /// Exponents that can use the integer-power path (`3`, `-2`, also a
    /// parenthesized `(-2)` which parses as Neg(Const)).
    fn const_int(&self) -> Option<i64> {
        match self {
            Expr::Const(c) if c.fract() == 0.0 && c.abs() <= 9.0e15 => Some(*c as i64),
            Expr::Neg(inner) => inner.const_int().map(|n| -n),
            _ => None,
        }
    }
}

// ─── Parser ──────────────────────────────────────────────────────────────

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    coords: &'a [String],
}

/// Parse `src` against the chart's coordinate names. Coordinates shadow the
/// built-in constants `pi` and `e`.
pub fn parse(src: &str, coords: &[String]) -> Result<Expr> {
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
        coords,
    };
    p.skip_ws();
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("end of input"));
    }
    Ok(e)
}

impl<'a> Parser<'a> {
    fn err(&self, expected: &str) -> Error {
        Error::Syntax {
            pos: self.pos,
            expected: expected.to_string(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ') | Some(b'\t') | Some(b'\n') | Some(b'\r')) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            self.skip_ws();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut acc = self.term()?;
        loop {
            if self.eat(b'+') {
                acc = Expr::Add(Box::new(acc), Box::new(self.term()?));
            } else if self.eat(b'-') {
                acc = Expr::Sub(Box::new(acc), Box::new(self.term()?));
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.factor()?;
        loop {
            if self.eat(b'*') {
                acc = Expr::Mul(Box::new(acc), Box::new(self.factor()?));
            } else if self.eat(b'/') {
                acc = Expr::Div(Box::new(acc), Box::new(self.factor()?));
            } else {
                return Ok(acc);
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            Ok(Expr::Neg(Box::new(self.power()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat(b'^') {
            // Right associative; the exponent is again a power, so a bare
            // minus after '^' is a syntax error ("2^-3" must be "2^(-3)").
            Ok(Expr::Pow(Box::new(base), Box::new(self.power()?)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                self.skip_ws();
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("`)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            _ => Err(self.err("number, identifier, or `(`")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.peek() == Some(b'.') {
            self.pos += 1;
            if !matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                return Err(self.err("digit after decimal point"));
            }
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        if matches!(self.peek(), Some(b'e') | Some(b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            if !matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                // `2e` or `2e+` is not an exponent; `2exp(x)` is not valid
                // either (no implicit multiplication), so roll back and let
                // the caller fail on the stray identifier.
                self.pos = mark;
            } else {
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let value: f64 = text.parse().map_err(|_| Error::Syntax {
            pos: start,
            expected: "a valid numeric literal".to_string(),
        })?;
        if !value.is_finite() {
            return Err(Error::Syntax {
                pos: start,
                expected: "a numeric literal that fits in an f64".to_string(),
            });
        }
        self.skip_ws();
        Ok(Expr::Const(value))
    }

    fn ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string();
        self.skip_ws();
        if self.peek() == Some(b'(') {
            let func = Func::from_name(&name).ok_or(Error::UnknownIdentifier {
                name: name.clone(),
            })?;
            self.pos += 1;
            self.skip_ws();
            let arg = self.expr()?;
            if !self.eat(b')') {
                return Err(self.err("`)`"));
            }
            return Ok(Expr::Call(func, Box::new(arg)));
        }
        // Coordinates shadow the built-in constants.
        if let Some(index) = self.coords.iter().position(|c| c == &name) {
            return Ok(Expr::Var { name, index });
        }
        match name.as_str() {
            "pi" => Ok(Expr::Const(std::f64::consts::PI)),
            "e" => Ok(Expr::Const(std::f64::consts::E)),
            _ => Err(Error::UnknownIdentifier { name }),
        }
    }
}

// ─── Evaluation ──────────────────────────────────────────────────────────

/// Evaluate `e` at `point` carrying derivatives up to `order` (≤ 3). Domain
/// violations report the offending subexpression in printed form.
pub fn eval_jet(e: &Expr, point: &[f64], order: u8) -> Result<Jet> {
    let dim = point.len();
    match e {
        Expr::Const(c) => Ok(Jet::constant(dim, order, *c)),
        Expr::Var { name, index } => {
            if *index >= dim {
                return Err(Error::UnknownIdentifier { name: name.clone() });
            }
            Ok(Jet::variable(dim, order, *index, point[*index]))
        }
        Expr::Neg(a) => Ok(eval_jet(a, point, order)?.neg()),
        Expr::Add(a, b) => Ok(eval_jet(a, point, order)?.add(&eval_jet(b, point, order)?)),
        Expr::Sub(a, b) => Ok(eval_jet(a, point, order)?.sub(&eval_jet(b, point, order)?)),
        Expr::Mul(a, b) => Ok(eval_jet(a, point, order)?.mul(&eval_jet(b, point, order)?)),
        Expr::Div(a, b) => eval_jet(a, point, order)?
            .div(&eval_jet(b, point, order)?)
            .map_err(|err| relabel(err, e)),
        Expr::Pow(a, b) => {
            let base = eval_jet(a, point, order)?;
            match b.const_int() {
                Some(n) => base.powi(n).map_err(|err| relabel(err, e)),
                None => {
                    let exp = eval_jet(b, point, order)?;
                    base.pow(&exp).map_err(|err| relabel(err, e))
                }
            }
        }
        Expr::Call(f, a) => {
            let u = eval_jet(a, point, order)?;
            let r = match f {
                Func::Sin => Ok(u.sin()),
                Func::Cos => Ok(u.cos()),
                Func::Tan => u.tan(),
                Func::Asin => u.asin(),
                Func::Acos => u.acos(),
                Func::Atan => Ok(u.atan()),
                Func::Sinh => Ok(u.sinh()),
                Func::Cosh => Ok(u.cosh()),
                Func::Tanh => Ok(u.tanh()),
                Func::Exp => Ok(u.exp()),
                Func::Log => u.ln(),
                Func::Sqrt => u.sqrt(),
            };
            r.map_err(|err| relabel(err, e))
        }
    }
}

/// Replace the low-level function label in a domain error with the printed
/// subexpression that actually failed.
fn relabel(err: Error, node: &Expr) -> Error {
    match err {
        Error::Domain { reason, .. } => Error::Domain {
            expr: node.print(),
            reason,
        },
        other => other,
    }
}
