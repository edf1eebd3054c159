//! Closed-form expression language for metric components and map fields.
//!
//! Grammar: numbers, named coordinates, `pi`, binary `+ - * / ^`, unary
//! minus, and the functions `exp log sin cos sqrt norm`. `norm` is variadic
//! (`norm(x1, x2, x3)` is the Euclidean length of its arguments). Every
//! construct is closed under [`Scalar`], so the same tree evaluates on plain
//! floats and on second-order jets.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
    Norm(Vec<Expr>),
}

impl Expr {
    /// Parses `src` with the given coordinate names bound to variable slots.
    pub fn parse(src: &str, vars: &[&str]) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            vars,
            src,
        };
        let e = p.expr()?;
        if p.pos < p.tokens.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn constant(v: f64) -> Expr {
        Expr::Const(v)
    }

    /// Evaluates the expression with `vars[i]` bound to variable slot `i`.
    pub fn eval<S: Scalar>(&self, vars: &[S]) -> S {
        match self {
            Expr::Const(c) => S::from_f64(*c),
            Expr::Var(i) => vars[*i],
            Expr::Neg(a) => -a.eval(vars),
            Expr::Add(a, b) => a.eval(vars) + b.eval(vars),
            Expr::Sub(a, b) => a.eval(vars) - b.eval(vars),
            Expr::Mul(a, b) => a.eval(vars) * b.eval(vars),
            Expr::Div(a, b) => a.eval(vars) / b.eval(vars),
            Expr::Pow(a, b) => {
                let base = a.eval(vars);
                match b.as_ref() {
                    Expr::Const(p) if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 => {
                        base.powi(*p as i32)
                    }
                    Expr::Const(p) => base.powf(*p),
                    _ => (b.eval(vars) * base.ln()).exp(),
                }
            }
            Expr::Call(f, a) => {
                let v = a.eval(vars);
                match f {
                    Func::Exp => v.exp(),
                    Func::Log => v.ln(),
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Sqrt => v.sqrt(),
                }
            }
            Expr::Norm(args) => {
                let mut acc = S::zero();
                for a in args {
                    let v = a.eval(vars);
                    acc = acc + v * v;
                }
                acc.sqrt()
            }
        }
    }

    /// Replaces variables `offset..` by the given constants.
    pub fn bind(&self, offset: usize, values: &[f64]) -> Expr {
        let b = |e: &Expr| Box::new(e.bind(offset, values));
        match self {
            Expr::Var(i) if *i >= offset => Expr::Const(values[*i - offset]),
            Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Neg(a) => Expr::Neg(b(a)),
            Expr::Add(x, y) => Expr::Add(b(x), b(y)),
            Expr::Sub(x, y) => Expr::Sub(b(x), b(y)),
            Expr::Mul(x, y) => Expr::Mul(b(x), b(y)),
            Expr::Div(x, y) => Expr::Div(b(x), b(y)),
            Expr::Pow(x, y) => {
                let y = y.bind(offset, values);
                let y = if y.is_constant() { Expr::Const(y.eval::<f64>(&[])) } else { y };
                Expr::Pow(b(x), Box::new(y))
            }
            Expr::Call(f, a) => Expr::Call(*f, b(a)),
            Expr::Norm(args) => Expr::Norm(args.iter().map(|a| a.bind(offset, values)).collect()),
        }
    }

    /// True when the tree references no variable.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::Var(_) => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.is_constant(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.is_constant() && b.is_constant()
            }
            Expr::Norm(args) => args.iter().all(Expr::is_constant),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse::<f64>().map_err(|_| Error::Parse {
                line: 1,
                column: start + 1,
                message: format!("bad number literal `{text}`"),
            })?;
            out.push((Tok::Num(v), start));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), start));
        } else if "+-*/^(),".contains(c) {
            out.push((Tok::Op(c), i));
            i += 1;
        } else {
            return Err(Error::Parse {
                line: 1,
                column: i + 1,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    vars: &'a [&'a str],
    src: &'a str,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        let column = self
            .tokens
            .get(self.pos)
            .map(|t| t.1 + 1)
            .unwrap_or(self.src.chars().count() + 1);
        Error::Parse {
            line: 1,
            column,
            message: format!("{msg} in expression `{}`", self.src),
        }
    }

    fn peek_op(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some((Tok::Op(c), _)) => Some(*c),
            _ => None,
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek_op() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected `{c}`")))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(op) = self.peek_op() {
            match op {
                '+' => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                '-' => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.peek_op() {
            match op {
                '*' => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                '/' => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek_op() {
            Some('-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exponent = self.unary()?;
            let exponent = match exponent {
                Expr::Neg(inner) => match *inner {
                    Expr::Const(c) => Expr::Const(-c),
                    other => Expr::Neg(Box::new(other)),
                },
                e => e,
            };
            let exponent = if exponent.is_constant() {
                Expr::Const(exponent.eval::<f64>(&[]))
            } else {
                exponent
            };
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let Some((tok, _)) = self.tokens.get(self.pos).cloned() else {
            return Err(self.error("unexpected end of input"));
        };
        match tok {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            Tok::Op('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.pos += 1;
                if self.peek_op() == Some('(') {
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    while self.peek_op() == Some(',') {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(')')?;
                    return self.call(&name, args);
                }
                if let Some(i) = self.vars.iter().position(|v| *v == name) {
                    return Ok(Expr::Var(i));
                }
                if name == "pi" {
                    return Ok(Expr::Const(std::f64::consts::PI));
                }
                self.pos -= 1;
                Err(self.error(&format!("unknown variable `{name}`")))
            }
            Tok::Op(_) => Err(self.error("unexpected operator")),
        }
    }

    fn call(&self, name: &str, mut args: Vec<Expr>) -> Result<Expr> {
        if name == "norm" {
            return Ok(Expr::Norm(args));
        }
        let f = match name {
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            _ => return Err(self.error(&format!("unknown function `{name}`"))),
        };
        if args.len() != 1 {
            return Err(self.error(&format!("`{name}` takes exactly one argument")));
        }
        Ok(Expr::Call(f, Box::new(args.remove(0))))
    }
}

impl fmt::Display for Func {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        };
        f.write_str(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::Jet2;

    fn eval(src: &str, vars: &[&str], x: &[f64]) -> f64 {
        Expr::parse(src, vars).unwrap().eval(x)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval("1 + 2 * 3", &[], &[]), 7.0);
        assert_eq!(eval("2 ^ 3 ^ 2", &[], &[]), 512.0);
        assert_eq!(eval("-2 ^ 2", &[], &[]), -4.0);
        assert_eq!(eval("8 / 2 / 2", &[], &[]), 2.0);
        assert_eq!(eval("x ^ -1", &["x"], &[4.0]), 0.25);
        assert!((eval("norm(x, y)", &["x", "y"], &[3.0, 4.0]) - 5.0).abs() < 1e-15);
        assert!((eval("sin(pi/2)", &[], &[]) - 1.0).abs() < 1e-15);
        assert_eq!(eval("1.5e2", &[], &[]), 150.0);
    }

    #[test]
    fn bind_substitutes_trailing_variables() {
        let e = Expr::parse("r^2 * sin(t)^k", &["t", "r", "k"]).unwrap();
        let b = e.bind(1, &[2.0, 2.0]);
        let x = 0.3f64;
        assert!((b.eval(&[x]) - 4.0 * x.sin().powi(2)).abs() < 1e-15);
    }

    #[test]
    fn errors_carry_column() {
        match Expr::parse("x + * y", &["x", "y"]) {
            Err(Error::Parse { column, .. }) => assert_eq!(column, 5),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(Expr::parse("foo(x)", &["x"]).is_err());
        assert!(Expr::parse("z", &["x"]).is_err());
        assert!(Expr::parse("(x", &["x"]).is_err());
    }

    #[test]
    fn jets_through_expression() {
        let e = Expr::parse("x1^2 * x2", &["x1", "x2"]).unwrap();
        let j = e.eval(&Jet2::seed(&[2.0, 3.0]));
        assert_eq!(j.value, 12.0);
        assert_eq!(&j.grad[..2], &[12.0, 4.0]);
        assert_eq!(j.hess[0][0], 6.0);
        assert_eq!(j.hess[0][1], 4.0);
    }

    #[test]
    fn non_integer_and_symbolic_powers() {
        let x = 1.7;
        assert!((eval("x ^ 0.5", &["x"], &[x]) - x.sqrt()).abs() < 1e-15);
        assert!((eval("x ^ x", &["x"], &[x]) - x.powf(x)).abs() < 1e-14);
    }
}
