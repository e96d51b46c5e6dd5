//! Closed-form expressions in `r`, `theta`, `eps` with symbolic derivatives.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' ['-'] integer)?
//! atom   := number | 'pi' | 'r' | 'theta' | 'eps' | func '(' expr ')' | '(' expr ')'
//! func   := 'sin' | 'cos' | 'exp'
//! ```
//!
//! `θ`, `ε` and `π` are accepted as aliases.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    R,
    Theta,
    Eps,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut parser = Parser { tokens, pos: 0 };
        let expr = parser.expr()?;
        if parser.pos != parser.tokens.len() {
            return Err(Error::Expression(format!("unexpected {:?} in {src:?}", parser.tokens[parser.pos])));
        }
        Ok(expr)
    }

    pub fn eval(&self, r: f64, theta: f64, eps: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::R) => r,
            Expr::Var(Var::Theta) => theta,
            Expr::Var(Var::Eps) => eps,
            Expr::Neg(a) => -a.eval(r, theta, eps),
            Expr::Add(a, b) => a.eval(r, theta, eps) + b.eval(r, theta, eps),
            Expr::Sub(a, b) => a.eval(r, theta, eps) - b.eval(r, theta, eps),
            Expr::Mul(a, b) => a.eval(r, theta, eps) * b.eval(r, theta, eps),
            Expr::Div(a, b) => a.eval(r, theta, eps) / b.eval(r, theta, eps),
            Expr::Pow(a, k) => a.eval(r, theta, eps).powi(*k),
            Expr::Sin(a) => a.eval(r, theta, eps).sin(),
            Expr::Cos(a) => a.eval(r, theta, eps).cos(),
            Expr::Exp(a) => a.eval(r, theta, eps).exp(),
        }
    }

    /// True when the expression does not mention `v`.
    pub fn is_free_of(&self, v: Var) -> bool {
        match self {
            Expr::Num(_) => true,
            Expr::Var(w) => *w != v,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) => a.is_free_of(v),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.is_free_of(v) && b.is_free_of(v)
            }
        }
    }

    pub fn diff(&self, v: Var) -> Expr {
        use Expr::*;
        match self {
            Num(_) => Num(0.0),
            Var(w) => Num(if *w == v { 1.0 } else { 0.0 }),
            Neg(a) => neg(a.diff(v)),
            Add(a, b) => add(a.diff(v), b.diff(v)),
            Sub(a, b) => sub(a.diff(v), b.diff(v)),
            Mul(a, b) => add(mul(a.diff(v), (**b).clone()), mul((**a).clone(), b.diff(v))),
            Div(a, b) => div(
                sub(mul(a.diff(v), (**b).clone()), mul((**a).clone(), b.diff(v))),
                pow((**b).clone(), 2),
            ),
            Pow(a, k) => mul(mul(Num(*k as f64), pow((**a).clone(), k - 1)), a.diff(v)),
            Sin(a) => mul(Cos(a.clone()), a.diff(v)),
            Cos(a) => neg(mul(Sin(a.clone()), a.diff(v))),
            Exp(a) => mul(Exp(a.clone()), a.diff(v)),
        }
    }
}

fn num(e: &Expr) -> Option<f64> {
    match e {
        Expr::Num(v) => Some(*v),
        _ => None,
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(v) => Expr::Num(-v),
        Expr::Neg(inner) => *inner,
        a => Expr::Neg(Box::new(a)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (num(&a), num(&b)) {
        (Some(x), Some(y)) => Expr::Num(x + y),
        (Some(x), _) if x == 0.0 => b,
        (_, Some(y)) if y == 0.0 => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (num(&a), num(&b)) {
        (Some(x), Some(y)) => Expr::Num(x - y),
        (Some(x), _) if x == 0.0 => neg(b),
        (_, Some(y)) if y == 0.0 => a,
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (num(&a), num(&b)) {
        (Some(x), Some(y)) => Expr::Num(x * y),
        (Some(x), _) | (_, Some(x)) if x == 0.0 => Expr::Num(0.0),
        (Some(x), _) if x == 1.0 => b,
        (_, Some(y)) if y == 1.0 => a,
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (num(&a), num(&b)) {
        (Some(x), _) if x == 0.0 => Expr::Num(0.0),
        (_, Some(y)) if y == 1.0 => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Expr, k: i32) -> Expr {
    match (num(&a), k) {
        (_, 0) => Expr::Num(1.0),
        (_, 1) => a,
        (Some(x), _) => Expr::Num(x.powi(k)),
        _ => Expr::Pow(Box::new(a), k),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(Var::R) => write!(f, "r"),
            Expr::Var(Var::Theta) => write!(f, "theta"),
            Expr::Var(Var::Eps) => write!(f, "eps"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, k) => write!(f, "({a})^{k}"),
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
            Expr::Exp(a) => write!(f, "exp({a})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        if ch.is_whitespace() {
            i += 1;
        } else if ch.is_ascii_digit() || ch == '.' {
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
            let v = text.parse().map_err(|_| Error::Expression(format!("bad number {text:?}")))?;
            tokens.push(Token::Num(v));
        } else if ch.is_alphabetic() || ch == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            tokens.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(ch) {
            tokens.push(Token::Op(ch));
            i += 1;
        } else {
            return Err(Error::Expression(format!("unexpected character {ch:?}")));
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn eat_op(&mut self, op: char) -> bool {
        if self.peek() == Some(&Token::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, op: char) -> Result<()> {
        if self.eat_op(op) {
            Ok(())
        } else {
            Err(Error::Expression(format!("expected {op:?}")))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat_op('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat_op('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat_op('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat_op('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat_op('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        let base = self.atom()?;
        if self.eat_op('^') {
            let negative = self.eat_op('-');
            match self.peek().cloned() {
                Some(Token::Num(v)) if v.fract() == 0.0 && v.abs() <= 64.0 => {
                    self.pos += 1;
                    let k = if negative { -(v as i32) } else { v as i32 };
                    return Ok(Expr::Pow(Box::new(base), k));
                }
                _ => return Err(Error::Expression("exponent must be a small integer".into())),
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek().cloned() {
            Some(Token::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Token::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_op(')')?;
                Ok(e)
            }
            Some(Token::Ident(name)) => {
                self.pos += 1;
                match name.as_str() {
                    "r" => Ok(Expr::Var(Var::R)),
                    "theta" | "θ" => Ok(Expr::Var(Var::Theta)),
                    "eps" | "ε" => Ok(Expr::Var(Var::Eps)),
                    "pi" | "π" => Ok(Expr::Num(std::f64::consts::PI)),
                    "sin" | "cos" | "exp" => {
                        self.expect_op('(')?;
                        let arg = Box::new(self.expr()?);
                        self.expect_op(')')?;
                        Ok(match name.as_str() {
                            "sin" => Expr::Sin(arg),
                            "cos" => Expr::Cos(arg),
                            _ => Expr::Exp(arg),
                        })
                    }
                    other => Err(Error::Expression(format!("unknown identifier {other:?}"))),
                }
            }
            Some(tok) => Err(Error::Expression(format!("unexpected {tok:?}"))),
            None => Err(Error::Expression("unexpected end of expression".into())),
        }
    }
}
