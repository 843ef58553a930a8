//! Arithmetic expressions over chart coordinates.
//!
//! Grammar (ASCII input):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := base ('^' rational)?
//! base   := number | symbol | func '(' expr ')' | '(' expr ')' | '-' base
//! func   := exp | log | sqrt | sin | cos
//! rational := ['-'] integer | '(' ['-'] integer ['/' integer] ')'
//! ```
//!
//! A leading minus binds looser than `^`, so `-x^2` is `-(x^2)`. Exponents are
//! rationals with denominator 1 or 2.

use std::fmt;

use thiserror::Error;

use super::jet::Jet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown symbol `{name}` at byte {offset}")]
    UnknownSymbol { name: String, offset: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
}

impl Func {
    pub const ALL: [Func; 5] = [Func::Exp, Func::Log, Func::Sqrt, Func::Sin, Func::Cos];

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == s)
    }
}

/// Reduced rational exponent with denominator 1 or 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rational {
    num: i64,
    den: i64,
}

impl Rational {
    pub fn new(num: i64, den: i64) -> Option<Rational> {
        if den == 0 {
            return None;
        }
        let (mut num, mut den) = if den < 0 { (-num, -den) } else { (num, den) };
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()) as i64;
        if g > 1 {
            num /= g;
            den /= g;
        }
        (den == 1 || den == 2).then_some(Rational { num, den })
    }

    pub fn integer(n: i64) -> Rational {
        Rational { num: n, den: 1 }
    }

    pub fn num(self) -> i64 {
        self.num
    }

    pub fn den(self) -> i64 {
        self.den
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn is_integer(self) -> bool {
        self.den == 1
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.den, self.num < 0) {
            (1, false) => write!(f, "{}", self.num),
            (1, true) => write!(f, "({})", self.num),
            _ => write!(f, "({}/{})", self.num, self.den),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Rational),
    Call(Func, Box<Expr>),
}

impl Expr {
    /// Numeric literal; negative values become `Neg(Num(|c|))` so that printed
    /// forms re-parse to the same tree.
    pub fn num(c: f64) -> Expr {
        if c < 0.0 || (c == 0.0 && c.is_sign_negative()) {
            Expr::Neg(Box::new(Expr::Num(-c)))
        } else {
            Expr::Num(c)
        }
    }

    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    pub fn call(f: Func, e: Expr) -> Expr {
        Expr::Call(f, Box::new(e))
    }

    pub fn pow(e: Expr, r: Rational) -> Expr {
        Expr::Pow(Box::new(e), r)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Sub(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::Div(Box::new(a), Box::new(b))
    }

    /// Largest variable index used, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Num(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.max_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                match (a.max_var(), b.max_var()) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    (x, y) => x.or(y),
                }
            }
        }
    }

    /// Render with the given coordinate names.
    pub fn display<'a>(&'a self, names: &'a [String]) -> ExprDisplay<'a> {
        ExprDisplay { expr: self, names }
    }

    /// Forward-mode evaluation of the expression and its partial derivatives
    /// up to `order` at `point`. `names` only feeds error messages.
    pub fn eval_jet(&self, point: &[f64], order: usize, names: &[String]) -> Result<Jet> {
        if order > super::jet::MAX_ORDER {
            return Err(Error::OrderTooHigh {
                requested: order,
                max: super::jet::MAX_ORDER,
            });
        }
        self.eval_rec(point, order, names)
    }

    fn domain(&self, names: &[String], reason: &str) -> Error {
        Error::Domain {
            subexpr: self.display(names).to_string(),
            reason: reason.to_string(),
        }
    }

    fn eval_rec(&self, p: &[f64], order: usize, names: &[String]) -> Result<Jet> {
        let dim = p.len();
        Ok(match self {
            Expr::Num(c) => Jet::constant(dim, order, *c),
            Expr::Var(i) => {
                let x = *p.get(*i).ok_or_else(|| {
                    Error::shape(format!(
                        "variable index {i} but point has {dim} coordinates"
                    ))
                })?;
                Jet::variable(dim, order, *i, x)
            }
            Expr::Neg(a) => -a.eval_rec(p, order, names)?,
            Expr::Add(a, b) => a.eval_rec(p, order, names)? + b.eval_rec(p, order, names)?,
            Expr::Sub(a, b) => a.eval_rec(p, order, names)? - b.eval_rec(p, order, names)?,
            Expr::Mul(a, b) => a.eval_rec(p, order, names)? * b.eval_rec(p, order, names)?,
            Expr::Div(a, b) => {
                let num = a.eval_rec(p, order, names)?;
                let den = b.eval_rec(p, order, names)?;
                if den.value() == 0.0 {
                    return Err(self.domain(names, "division by zero"));
                }
                num / den
            }
            Expr::Pow(a, r) => {
                let base = a.eval_rec(p, order, names)?;
                let x = base.value();
                if r.is_integer() {
                    if x == 0.0 && r.num() < 0 {
                        return Err(self.domain(names, "negative power of zero"));
                    }
                    base.powi(r.num() as i32)
                } else {
                    if x < 0.0 || (x == 0.0 && (order > 0 || r.num() < 0)) {
                        return Err(self.domain(names, "half-integer power of a nonpositive base"));
                    }
                    base.powf(r.as_f64())
                }
            }
            Expr::Call(f, a) => {
                let arg = a.eval_rec(p, order, names)?;
                let x = arg.value();
                match f {
                    Func::Exp => arg.exp(),
                    Func::Log => {
                        if x <= 0.0 {
                            return Err(self.domain(names, "log of a nonpositive argument"));
                        }
                        arg.ln()
                    }
                    Func::Sqrt => {
                        if x < 0.0 || (x == 0.0 && order > 0) {
                            return Err(self.domain(names, "sqrt of a nonpositive argument"));
                        }
                        arg.sqrt()
                    }
                    Func::Sin => arg.sin(),
                    Func::Cos => arg.cos(),
                }
            }
        })
    }

    /// Plain value at a point.
    pub fn eval(&self, point: &[f64], names: &[String]) -> Result<f64> {
        Ok(self.eval_jet(point, 0, names)?.value())
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Num(_) | Expr::Var(_) | Expr::Call(..) => 5,
        }
    }
}

pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    names: &'a [String],
}

impl ExprDisplay<'_> {
    fn write(&self, e: &Expr, min_prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let paren = e.precedence() < min_prec;
        if paren {
            f.write_str("(")?;
        }
        match e {
            Expr::Num(c) => {
                if *c < 0.0 {
                    write!(f, "({})", NumText(*c))?;
                } else {
                    write!(f, "{}", NumText(*c))?;
                }
            }
            Expr::Var(i) => match self.names.get(*i) {
                Some(n) => f.write_str(n)?,
                None => write!(f, "x{i}")?,
            },
            Expr::Neg(a) => {
                f.write_str("-")?;
                self.write(a, 3, f)?;
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                self.write(a, 1, f)?;
                f.write_str(if matches!(e, Expr::Add(..)) {
                    " + "
                } else {
                    " - "
                })?;
                self.write(b, 2, f)?;
            }
            Expr::Mul(a, b) | Expr::Div(a, b) => {
                self.write(a, 2, f)?;
                f.write_str(if matches!(e, Expr::Mul(..)) { "*" } else { "/" })?;
                self.write(b, 3, f)?;
            }
            Expr::Pow(a, r) => {
                self.write(a, 5, f)?;
                write!(f, "^{r}")?;
            }
            Expr::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                self.write(a, 0, f)?;
                f.write_str(")")?;
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Shortest round-trip text; plain notation for ordinary magnitudes.
struct NumText(f64);

impl fmt::Display for NumText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = self.0.abs();
        if a == 0.0 || (1e-5..1e16).contains(&a) {
            write!(f, "{}", self.0)
        } else {
            write!(f, "{:?}", self.0)
        }
    }
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(self.expr, 0, f)
    }
}

/// Parse `text` with the given coordinate symbols.
pub fn parse_expr(text: &str, symbols: &[String]) -> std::result::Result<Expr, ParseError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        symbols,
    };
    if let Some(off) = text.bytes().position(|b| !b.is_ascii()) {
        return Err(ParseError::Syntax {
            offset: off,
            message: "non-ASCII input".into(),
        });
    }
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.err(format!("unexpected `{}`", p.src[p.pos] as char)));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    symbols: &'a [String],
}

impl Parser<'_> {
    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            offset: self.pos,
            message: message.into(),
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

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> std::result::Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(match self.peek() {
                Some(got) => self.err(format!("expected `{}`, found `{}`", c as char, got as char)),
                None => self.err(format!("expected `{}`, found end of input", c as char)),
            })
        }
    }

    fn expr(&mut self) -> std::result::Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::add(lhs, self.term()?);
            } else if self.eat(b'-') {
                lhs = Expr::sub(lhs, self.term()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> std::result::Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::mul(lhs, self.factor()?);
            } else if self.eat(b'/') {
                lhs = Expr::div(lhs, self.factor()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn factor(&mut self) -> std::result::Result<Expr, ParseError> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        let base = self.atom()?;
        if self.eat(b'^') {
            let r = self.rational()?;
            return Ok(Expr::pow(base, r));
        }
        Ok(base)
    }

    fn integer(&mut self) -> std::result::Result<i64, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected an integer exponent"));
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| ParseError::Syntax {
                offset: start,
                message: "exponent out of range".into(),
            })
    }

    fn rational(&mut self) -> std::result::Result<Rational, ParseError> {
        let start = {
            self.skip_ws();
            self.pos
        };
        let parenthesized = self.eat(b'(');
        let sign = if self.eat(b'-') { -1 } else { 1 };
        let num = sign * self.integer()?;
        let den = if parenthesized && self.eat(b'/') {
            self.integer()?
        } else {
            1
        };
        if parenthesized {
            self.expect(b')')?;
        }
        Rational::new(num, den).ok_or(ParseError::Syntax {
            offset: start,
            message: "exponent denominator must be 1 or 2".into(),
        })
    }

    fn atom(&mut self) -> std::result::Result<Expr, ParseError> {
        let c = match self.peek() {
            Some(c) => c,
            None => return Err(self.err("unexpected end of input")),
        };
        if c == b'(' {
            self.pos += 1;
            let e = self.expr()?;
            self.expect(b')')?;
            return Ok(e);
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.number();
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = self.pos;
            while self.pos < self.src.len()
                && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
            {
                self.pos += 1;
            }
            let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            if let Some(i) = self.symbols.iter().position(|s| s == name) {
                return Ok(Expr::Var(i));
            }
            if let Some(func) = Func::from_name(name) {
                if self.peek() == Some(b'(') {
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect(b')')?;
                    return Ok(Expr::call(func, arg));
                }
            }
            return Err(ParseError::UnknownSymbol {
                name: name.to_string(),
                offset: start,
            });
        }
        Err(self.err(format!("unexpected `{}`", c as char)))
    }

    fn number(&mut self) -> std::result::Result<Expr, ParseError> {
        let start = self.pos;
        let s = self.src;
        let digits = |p: &mut usize| {
            let b = *p;
            while *p < s.len() && s[*p].is_ascii_digit() {
                *p += 1;
            }
            *p > b
        };
        let mut p = self.pos;
        let int = digits(&mut p);
        let mut frac = false;
        if p < s.len() && s[p] == b'.' {
            p += 1;
            frac = digits(&mut p);
        }
        if !int && !frac {
            return Err(self.err("malformed number"));
        }
        if p < s.len() && (s[p] == b'e' || s[p] == b'E') {
            let mut q = p + 1;
            if q < s.len() && (s[q] == b'+' || s[q] == b'-') {
                q += 1;
            }
            if digits(&mut q) {
                p = q;
            } else {
                self.pos = q;
                return Err(self.err("malformed exponent"));
            }
        }
        self.pos = p;
        let text = std::str::from_utf8(&s[start..p]).unwrap();
        text.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Expr::Num)
            .ok_or(ParseError::Syntax {
                offset: start,
                message: format!("invalid number `{text}`"),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn precedence_and_associativity() {
        let n = names(&["x0", "x1"]);
        assert_eq!(
            parse_expr("x0^2 + 1", &n).unwrap(),
            Expr::add(
                Expr::pow(Expr::Var(0), Rational::integer(2)),
                Expr::Num(1.0)
            )
        );
        assert_eq!(
            parse_expr("1/(x1*x1)", &n).unwrap(),
            Expr::div(Expr::Num(1.0), Expr::mul(Expr::Var(1), Expr::Var(1)))
        );
        assert_eq!(
            parse_expr("x0 - x1 - 1", &n).unwrap(),
            Expr::sub(Expr::sub(Expr::Var(0), Expr::Var(1)), Expr::Num(1.0))
        );
        assert_eq!(
            parse_expr("-x0^2", &n).unwrap(),
            Expr::Neg(Box::new(Expr::pow(Expr::Var(0), Rational::integer(2))))
        );
        assert_eq!(
            parse_expr("x0^(-3/2)", &n).unwrap(),
            Expr::pow(Expr::Var(0), Rational::new(-3, 2).unwrap())
        );
    }

    #[test]
    fn unknown_symbol_is_named() {
        let n = names(&["x0"]);
        match parse_expr("exp(2*f)", &n) {
            Err(ParseError::UnknownSymbol { name, offset }) => {
                assert_eq!(name, "f");
                assert_eq!(offset, 6);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        let n = names(&["x"]);
        match parse_expr("x + * 2", &n) {
            Err(ParseError::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_expr("(x", &n),
            Err(ParseError::Syntax { offset: 2, .. })
        ));
        assert!(matches!(
            parse_expr("x^(1/3)", &n),
            Err(ParseError::Syntax { .. })
        ));
        assert!(matches!(
            parse_expr("x^2^2", &n),
            Err(ParseError::Syntax { .. })
        ));
    }

    #[test]
    fn domain_errors_name_the_subexpression() {
        let n = names(&["x"]);
        let e = parse_expr("1 + log(x - 1)", &n).unwrap();
        match e.eval_jet(&[0.5], 1, &n) {
            Err(Error::Domain { subexpr, .. }) => assert_eq!(subexpr, "log(x - 1)"),
            other => panic!("unexpected {other:?}"),
        }
        let e = parse_expr("1/(x*x)", &n).unwrap();
        assert!(matches!(
            e.eval_jet(&[0.0], 0, &n),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn jets_from_expressions() {
        let n = names(&["x0"]);
        let j = parse_expr("x0^2", &n)
            .unwrap()
            .eval_jet(&[3.0], 2, &n)
            .unwrap();
        assert_eq!((j.value(), j.d1(0), j.d2(0, 0)), (9.0, 6.0, 2.0));
        let n = names(&["x0", "x1"]);
        let j = parse_expr("1/x1^2", &n)
            .unwrap()
            .eval_jet(&[0.0, 2.0], 1, &n)
            .unwrap();
        assert!((j.value() - 0.25).abs() < 1e-15);
        assert!((j.d1(1) + 0.25).abs() < 1e-15);
        assert_eq!(j.d1(0), 0.0);
    }

    #[test]
    fn printing_reparses() {
        let n = names(&["u", "v"]);
        for s in [
            "-(u + v)*2",
            "(-u)^2",
            "u - (v - 1)",
            "u/(v/2)",
            "exp(-u^(1/2))*sqrt(v)",
            "--u",
            "1.5e-7*u^(-2)",
        ] {
            let e = parse_expr(s, &n).unwrap();
            let printed = e.display(&n).to_string();
            assert_eq!(parse_expr(&printed, &n).unwrap(), e, "{s} -> {printed}");
        }
    }
}
