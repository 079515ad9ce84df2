//! A small expression language for user-supplied potentials.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | factor
//! factor := atom ['^' rational]
//! atom   := number | 'r' | 'x' index | 'exp(' expr ')' | 'log(' expr ')'
//!         | 'sqrt(' expr ')' | '(' expr ')'
//! rational := ['-'] integer | ['-'] decimal | '(' ['-'] integer '/' integer ')'
//! ```
//!
//! Variables are `x0, x1, …` and `r = |x|`.

use std::fmt;

use crate::error::{Error, Result};
use crate::jet::Jet;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    R,
    X(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    /// Power by the rational `num/den` (`den > 0`).
    Pow(Box<Expr>, i64, i64),
    Exp(Box<Expr>),
    Log(Box<Expr>),
    Sqrt(Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser { src: src.as_bytes(), pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    /// Largest `x` index used plus one (0 if none).
    pub fn arity(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::R => 0,
            Expr::X(i) => i + 1,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => a.arity().max(b.arity()),
            Expr::Neg(a) | Expr::Pow(a, _, _) | Expr::Exp(a) | Expr::Log(a) | Expr::Sqrt(a) => a.arity(),
        }
    }

    pub fn uses_r(&self) -> bool {
        match self {
            Expr::R => true,
            Expr::Const(_) | Expr::X(_) => false,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => a.uses_r() || b.uses_r(),
            Expr::Neg(a) | Expr::Pow(a, _, _) | Expr::Exp(a) | Expr::Log(a) | Expr::Sqrt(a) => a.uses_r(),
        }
    }

    /// Check every variable index against the declared dimension.
    pub fn check_dimension(&self, n: usize) -> Result<()> {
        match self.arity() {
            k if k > n => Err(Error::DimensionMismatch { index: k - 1, dim: n }),
            _ => Ok(()),
        }
    }

    /// Evaluate at `x` (with `r = |x|`), or at a bare radius when `x` is empty.
    pub fn eval(&self, x: &[f64], r: f64) -> Result<f64> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::R => r,
            Expr::X(i) => x[*i],
            Expr::Add(a, b) => a.eval(x, r)? + b.eval(x, r)?,
            Expr::Sub(a, b) => a.eval(x, r)? - b.eval(x, r)?,
            Expr::Mul(a, b) => a.eval(x, r)? * b.eval(x, r)?,
            Expr::Div(a, b) => {
                let d = b.eval(x, r)?;
                if d == 0.0 {
                    return Err(Error::Domain { op: "division", value: d });
                }
                a.eval(x, r)? / d
            }
            Expr::Neg(a) => -a.eval(x, r)?,
            Expr::Pow(a, num, den) => {
                let g = a.eval(x, r)?;
                if *den == 1 {
                    if *num < 0 && g == 0.0 {
                        return Err(Error::Domain { op: "negative power", value: g });
                    }
                    g.powi(*num as i32)
                } else {
                    if !(g > 0.0) {
                        return Err(Error::Domain { op: "fractional power", value: g });
                    }
                    g.powf(*num as f64 / *den as f64)
                }
            }
            Expr::Exp(a) => a.eval(x, r)?.exp(),
            Expr::Log(a) => {
                let g = a.eval(x, r)?;
                if !(g > 0.0) {
                    return Err(Error::Domain { op: "log", value: g });
                }
                g.ln()
            }
            Expr::Sqrt(a) => {
                let g = a.eval(x, r)?;
                if g < 0.0 {
                    return Err(Error::Domain { op: "sqrt", value: g });
                }
                g.sqrt()
            }
        })
    }

    /// Evaluate on jets. `x` holds coordinate jets; `r` the jet of the radius.
    pub fn eval_jet(&self, x: &[Jet], r: &Jet) -> Result<Jet> {
        Ok(match self {
            Expr::Const(c) => Jet::constant(r.layout(), *c),
            Expr::R => r.clone(),
            Expr::X(i) => x[*i].clone(),
            Expr::Add(a, b) => a.eval_jet(x, r)? + b.eval_jet(x, r)?,
            Expr::Sub(a, b) => a.eval_jet(x, r)? - b.eval_jet(x, r)?,
            Expr::Mul(a, b) => a.eval_jet(x, r)? * b.eval_jet(x, r)?,
            Expr::Div(a, b) => a.eval_jet(x, r)?.checked_div(&b.eval_jet(x, r)?)?,
            Expr::Neg(a) => -a.eval_jet(x, r)?,
            Expr::Pow(a, num, den) => {
                let g = a.eval_jet(x, r)?;
                if *den == 1 && *num >= 0 {
                    g.powi(*num as u32)
                } else {
                    g.powf(*num as f64 / *den as f64)?
                }
            }
            Expr::Exp(a) => a.eval_jet(x, r)?.exp()?,
            Expr::Log(a) => a.eval_jet(x, r)?.ln()?,
            Expr::Sqrt(a) => a.eval_jet(x, r)?.sqrt()?,
        })
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::R => write!(f, "r"),
            Expr::X(i) => write!(f, "x{i}"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Pow(a, n, 1) => write!(f, "{a}^{n}"),
            Expr::Pow(a, n, d) => write!(f, "{a}^({n}/{d})"),
            Expr::Exp(a) => write!(f, "exp({a})"),
            Expr::Log(a) => write!(f, "log({a})"),
            Expr::Sqrt(a) => write!(f, "sqrt({a})"),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> Error {
        Error::Parse { position: self.pos, message: message.to_string() }
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

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("expected '{}'", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.factor()
    }

    fn factor(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let (num, den) = self.rational()?;
            return Ok(Expr::Pow(Box::new(base), num, den));
        }
        Ok(base)
    }

    fn rational(&mut self) -> Result<(i64, i64)> {
        if self.eat(b'(') {
            let neg = self.eat(b'-');
            let start = self.pos;
            let num = self.integer()?;
            let num = if neg { -num } else { num };
            if self.eat(b'/') {
                let den = self.integer()?;
                if den == 0 {
                    self.pos = start;
                    return Err(self.error("zero denominator in exponent"));
                }
                self.expect(b')')?;
                return Ok(reduce(num, den));
            }
            self.expect(b')')?;
            return Ok((num, 1));
        }
        let neg = self.eat(b'-');
        let start = self.pos;
        let text = self.number_text()?;
        let (num, den) = decimal_to_rational(text).ok_or_else(|| {
            Error::Parse { position: start, message: "exponent must be a finite rational".into() }
        })?;
        Ok(if neg { (-num, den) } else { (num, den) })
    }

    fn integer(&mut self) -> Result<i64> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected integer"));
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| Error::Parse { position: start, message: "integer too large".into() })
    }

    fn number_text(&mut self) -> Result<&str> {
        self.skip_ws();
        let start = self.pos;
        let n = self.src.len();
        while self.pos < n && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < n && (self.src[self.pos] == b'e' || self.src[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < n && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < n && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if digits == self.pos {
                self.pos = save;
            }
        }
        if start == self.pos {
            return Err(self.error("expected number"));
        }
        Ok(std::str::from_utf8(&self.src[start..self.pos]).unwrap())
    }

    fn keyword(&mut self, word: &str) -> bool {
        let w = word.as_bytes();
        if self.src[self.pos..].starts_with(w) {
            let after = self.pos + w.len();
            let mut k = after;
            while k < self.src.len() && self.src[k].is_ascii_whitespace() {
                k += 1;
            }
            if self.src.get(k) == Some(&b'(') {
                self.pos = k + 1;
                return true;
            }
        }
        false
    }

    fn atom(&mut self) -> Result<Expr> {
        let Some(c) = self.peek() else {
            return Err(self.error("unexpected end of input"));
        };
        if c.is_ascii_digit() || c == b'.' {
            let start = self.pos;
            let text = self.number_text()?;
            let v: f64 = text
                .parse()
                .map_err(|_| Error::Parse { position: start, message: format!("bad number '{text}'") })?;
            return Ok(Expr::Const(v));
        }
        if c == b'(' {
            self.pos += 1;
            let e = self.expr()?;
            self.expect(b')')?;
            return Ok(e);
        }
        for (name, ctor) in [
            ("exp", Expr::Exp as fn(Box<Expr>) -> Expr),
            ("log", Expr::Log),
            ("sqrt", Expr::Sqrt),
        ] {
            if self.keyword(name) {
                let e = self.expr()?;
                self.expect(b')')?;
                return Ok(ctor(Box::new(e)));
            }
        }
        if c == b'r' {
            let next = self.src.get(self.pos + 1);
            if !next.is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'_') {
                self.pos += 1;
                return Ok(Expr::R);
            }
        }
        if c == b'x' {
            self.pos += 1;
            if !self.src.get(self.pos).is_some_and(|b| b.is_ascii_digit()) {
                return Err(self.error("expected variable index after 'x'"));
            }
            return Ok(Expr::X(self.integer()? as usize));
        }
        Err(self.error(&format!("unexpected character '{}'", c as char)))
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn reduce(num: i64, den: i64) -> (i64, i64) {
    let g = gcd(num, den).max(1);
    let s = if den < 0 { -1 } else { 1 };
    (s * num / g, s * den / g)
}

fn decimal_to_rational(text: &str) -> Option<(i64, i64)> {
    if text.contains(['e', 'E']) {
        let v: f64 = text.parse().ok()?;
        if v.fract() == 0.0 && v.abs() < 1e15 {
            return Some((v as i64, 1));
        }
        return None;
    }
    let (int, frac) = text.split_once('.').unwrap_or((text, ""));
    if frac.len() > 15 {
        return None;
    }
    let den = 10i64.checked_pow(frac.len() as u32)?;
    let int: i64 = if int.is_empty() { 0 } else { int.parse().ok()? };
    let frac_v: i64 = if frac.is_empty() { 0 } else { frac.parse().ok()? };
    Some(reduce(int.checked_mul(den)?.checked_add(frac_v)?, den))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_unary_minus() {
        let e = Expr::parse("1 + 2*3^2 - -4").unwrap();
        assert_eq!(e.eval(&[], 0.0).unwrap(), 23.0);
        let e = Expr::parse("-x0^2").unwrap();
        assert_eq!(e.eval(&[3.0], 3.0).unwrap(), -9.0);
    }

    #[test]
    fn rational_exponents() {
        let e = Expr::parse("x0^(3/2)").unwrap();
        assert_eq!(e, Expr::Pow(Box::new(Expr::X(0)), 3, 2));
        assert!((e.eval(&[4.0], 4.0).unwrap() - 8.0).abs() < 1e-14);
        assert_eq!(Expr::parse("r^0.5").unwrap(), Expr::Pow(Box::new(Expr::R), 1, 2));
        assert_eq!(Expr::parse("r^-2").unwrap(), Expr::Pow(Box::new(Expr::R), -2, 1));
    }

    #[test]
    fn functions_and_variables() {
        let e = Expr::parse("exp(x0) + log(1 + x1^2) * sqrt(r)").unwrap();
        assert_eq!(e.arity(), 2);
        assert!(e.uses_r());
        let v = e.eval(&[0.0, 1.0], 4.0).unwrap();
        assert!((v - (1.0 + 2f64.ln() * 2.0)).abs() < 1e-14);
    }

    #[test]
    fn errors_carry_positions() {
        match Expr::parse("1 + * 2") {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 4),
            other => panic!("{other:?}"),
        }
        match Expr::parse("exp(x0") {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 6),
            other => panic!("{other:?}"),
        }
        assert!(Expr::parse("x").is_err());
        assert!(Expr::parse("r^(1/0)").is_err());
        assert!(Expr::parse("2 3").is_err());
    }

    #[test]
    fn dimension_check() {
        let e = Expr::parse("x0 + x2").unwrap();
        assert!(e.check_dimension(3).is_ok());
        assert_eq!(e.check_dimension(2), Err(Error::DimensionMismatch { index: 2, dim: 2 }));
    }

    #[test]
    fn domain_errors() {
        let e = Expr::parse("log(x0)").unwrap();
        assert!(e.eval(&[-1.0], 1.0).is_err());
        let e = Expr::parse("1/x0").unwrap();
        assert!(e.eval(&[0.0], 0.0).is_err());
    }

    #[test]
    fn jet_matches_value() {
        let e = Expr::parse("x0^2*exp(x1) - sqrt(1 + x0*x1)").unwrap();
        let xs = Jet::variables(&[0.3, -0.4], 2);
        let r = (&xs[0] * &xs[0] + &xs[1] * &xs[1]).sqrt().unwrap();
        let j = e.eval_jet(&xs, &r).unwrap();
        let v = e.eval(&[0.3, -0.4], 0.5).unwrap();
        assert!((j.value() - v).abs() < 1e-15);
    }
}
