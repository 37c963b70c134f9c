//! Scalar expressions over an ordered variable list.
//!
//! Expressions are parsed from text, evaluated by a tree walk and
//! differentiated symbolically. Exponents are restricted to integer
//! literals, so every expression built from the grammar is twice
//! continuously differentiable wherever it is defined.
//!
//! Grammar (`^` binds tighter than unary minus, so `-x^2` is `-(x^2)`):
//!
//! ```text
//! expr   := term (("+"|"-") term)*
//! term   := factor (("*"|"/") factor)*
//! factor := "-"* power
//! power  := atom ("^" integer)?
//! atom   := number | ident | func "(" expr ")" | "(" expr ")"
//! func   := "sin" | "cos" | "exp" | "log" | "sqrt"
//! ```

use std::fmt;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

/// Expression tree. Variables are indices into the owning problem's
/// variable list.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Func(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdent { name: String, offset: usize },
    #[error("exponent at byte {offset} must be an integer literal, found `{found}`")]
    NonIntegerExponent { offset: usize, found: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error in `{node}`: {reason}")]
    Domain { node: String, reason: &'static str },
    #[error("point has {got} coordinates, expression needs index {index}")]
    Dimension { index: usize, got: usize },
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64, String),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || (c == '.' && bytes.get(i + 1).is_some_and(|b| b.is_ascii_digit())) {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let lit = &text[start..i];
            let value: f64 = lit.parse().map_err(|_| ParseError::Syntax {
                offset: start,
                message: format!("malformed number `{lit}`"),
            })?;
            out.push((Tok::Num(value, lit.to_string()), start));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), start));
            continue;
        }
        let tok = match c {
            '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            _ => {
                return Err(ParseError::Syntax {
                    offset: start,
                    message: format!("unexpected character `{c}`"),
                })
            }
        };
        out.push((tok, start));
        i += c.len_utf8();
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
    vars: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(_, o)| *o)
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax { offset: self.offset(), message: message.into() })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        while let Some(Tok::Op(op @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = if op == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let mut negations = 0;
        while let Some(Tok::Op('-')) = self.peek() {
            self.pos += 1;
            negations += 1;
        }
        let mut e = self.power()?;
        for _ in 0..negations {
            e = Expr::Neg(Box::new(e));
        }
        Ok(e)
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let offset = self.offset();
            let mut negative = false;
            if let Some(Tok::Op('-')) = self.peek() {
                negative = true;
                self.pos += 1;
            }
            match self.peek().cloned() {
                Some(Tok::Num(_, lit)) => {
                    self.pos += 1;
                    if !lit.bytes().all(|b| b.is_ascii_digit()) {
                        return Err(ParseError::NonIntegerExponent { offset, found: lit });
                    }
                    let k: i32 = lit.parse().map_err(|_| ParseError::NonIntegerExponent {
                        offset,
                        found: lit.clone(),
                    })?;
                    Ok(Expr::Pow(Box::new(base), if negative { -k } else { k }))
                }
                Some(_) => {
                    let found = self.toks[self.pos].0.describe();
                    Err(ParseError::NonIntegerExponent { offset, found })
                }
                None => self.syntax("missing exponent after `^`"),
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        match self.peek().cloned() {
            Some(Tok::Num(v, _)) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if let Some(func) = Func::from_name(&name) {
                    if self.peek() != Some(&Tok::LParen) {
                        return self.syntax(format!("expected `(` after `{name}`"));
                    }
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Expr::Func(func, Box::new(arg)));
                }
                match self.vars.iter().position(|v| *v == name) {
                    Some(i) => Ok(Expr::Var(i)),
                    None => Err(ParseError::UnknownIdent { name, offset }),
                }
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Some(t) => self.syntax(format!("unexpected {}", t.describe())),
            None => self.syntax("unexpected end of input"),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if self.peek() == Some(&Tok::RParen) {
            self.pos += 1;
            Ok(())
        } else {
            self.syntax("expected `)`")
        }
    }
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(_, lit) => format!("`{lit}`"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Op(c) => format!("`{c}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
        }
    }
}

/// Parse `text` against the ordered variable names `vars`.
pub fn parse_expr(text: &str, vars: &[String]) -> Result<Expr, ParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser { toks, pos: 0, end: text.len(), vars };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return p.syntax("trailing input");
    }
    Ok(e)
}

// ---------------------------------------------------------------------------
// Printing

const PREC_SUM: u8 = 1;
const PREC_PROD: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_ATOM: u8 = 5;

impl Expr {
    /// Render with variable names; `parse_expr` on the output yields an
    /// identical tree for every parsed expression.
    pub fn display<'a>(&'a self, vars: &'a [String]) -> Display<'a> {
        Display { expr: self, vars: Some(vars) }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, vars: Option<&[String]>, min_prec: u8) -> fmt::Result {
        let prec = self.prec();
        let paren = prec < min_prec;
        if paren {
            f.write_str("(")?;
        }
        match self {
            Expr::Const(c) => {
                if *c < 0.0 {
                    write!(f, "(-{:?})", -c)?;
                } else {
                    write!(f, "{c:?}")?;
                }
            }
            Expr::Var(i) => match vars.and_then(|v| v.get(*i)) {
                Some(name) => f.write_str(name)?,
                None => write!(f, "x[{i}]")?,
            },
            Expr::Neg(a) => {
                f.write_str("-")?;
                a.write(f, vars, PREC_NEG)?;
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                a.write(f, vars, PREC_SUM)?;
                f.write_str(if matches!(self, Expr::Add(..)) { " + " } else { " - " })?;
                b.write(f, vars, PREC_SUM + 1)?;
            }
            Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.write(f, vars, PREC_PROD)?;
                f.write_str(if matches!(self, Expr::Mul(..)) { "*" } else { "/" })?;
                b.write(f, vars, PREC_PROD + 1)?;
            }
            Expr::Pow(a, k) => {
                a.write(f, vars, PREC_ATOM)?;
                write!(f, "^{k}")?;
            }
            Expr::Func(func, a) => {
                write!(f, "{}(", func.name())?;
                a.write(f, vars, 0)?;
                f.write_str(")")?;
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }

    fn prec(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => PREC_SUM,
            Expr::Mul(..) | Expr::Div(..) => PREC_PROD,
            // factor := "-"* power, so a negation may follow `*` or `/` directly.
            Expr::Neg(_) => PREC_PROD + 1,
            Expr::Pow(..) => 4,
            Expr::Const(..) | Expr::Var(_) | Expr::Func(..) => PREC_ATOM,
        }
    }
}

pub struct Display<'a> {
    expr: &'a Expr,
    vars: Option<&'a [String]>,
}

impl fmt::Display for Display<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr.write(f, self.vars, 0)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, None, 0)
    }
}

// ---------------------------------------------------------------------------
// Evaluation

impl Expr {
    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        let domain = |reason| EvalError::Domain { node: self.to_string(), reason };
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => *x.get(*i).ok_or(EvalError::Dimension { index: *i, got: x.len() })?,
            Expr::Neg(a) => -a.eval(x)?,
            Expr::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Expr::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Expr::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Expr::Div(a, b) => {
                let den = b.eval(x)?;
                if den == 0.0 {
                    return Err(domain("division by zero"));
                }
                a.eval(x)? / den
            }
            Expr::Pow(a, k) => {
                let base = a.eval(x)?;
                if *k < 0 && base == 0.0 {
                    return Err(domain("negative power of zero"));
                }
                base.powi(*k)
            }
            Expr::Func(func, a) => {
                let v = a.eval(x)?;
                match func {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Log => {
                        if v <= 0.0 {
                            return Err(domain("log of nonpositive value"));
                        }
                        v.ln()
                    }
                    Func::Sqrt => {
                        if v < 0.0 {
                            return Err(domain("sqrt of negative value"));
                        }
                        v.sqrt()
                    }
                }
            }
        })
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Func(_, a) => a.max_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.max_var().max(b.max_var())
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Symbolic differentiation with light constant folding.

fn constant(e: &Expr) -> Option<f64> {
    match e {
        Expr::Const(c) => Some(*c),
        _ => None,
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (constant(&a), constant(&b)) {
        (Some(x), Some(y)) => Expr::Const(x + y),
        (Some(x), _) if x == 0.0 => b,
        (_, Some(y)) if y == 0.0 => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (constant(&a), constant(&b)) {
        (Some(x), Some(y)) => Expr::Const(x - y),
        (Some(x), _) if x == 0.0 => neg(b),
        (_, Some(y)) if y == 0.0 => a,
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (constant(&a), constant(&b)) {
        (Some(x), Some(y)) => Expr::Const(x * y),
        (Some(x), _) | (_, Some(x)) if x == 0.0 => Expr::Const(0.0),
        (Some(x), _) if x == 1.0 => b,
        (_, Some(y)) if y == 1.0 => a,
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (constant(&a), constant(&b)) {
        (Some(x), Some(y)) if y != 0.0 => Expr::Const(x / y),
        (Some(x), _) if x == 0.0 => Expr::Const(0.0),
        (_, Some(y)) if y == 1.0 => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn pow(a: Expr, k: i32) -> Expr {
    match (k, constant(&a)) {
        (0, _) => Expr::Const(1.0),
        (1, _) => a,
        (_, Some(c)) if c != 0.0 || k > 0 => Expr::Const(c.powi(k)),
        _ => Expr::Pow(Box::new(a), k),
    }
}

impl Expr {
    /// Partial derivative with respect to variable `var`.
    pub fn diff(&self, var: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(i) => Expr::Const(if *i == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.diff(var)),
            Expr::Add(a, b) => add(a.diff(var), b.diff(var)),
            Expr::Sub(a, b) => sub(a.diff(var), b.diff(var)),
            Expr::Mul(a, b) => add(
                mul(a.diff(var), (**b).clone()),
                mul((**a).clone(), b.diff(var)),
            ),
            Expr::Div(a, b) => {
                // (a'b - ab') / b^2
                let num = sub(mul(a.diff(var), (**b).clone()), mul((**a).clone(), b.diff(var)));
                div(num, pow((**b).clone(), 2))
            }
            Expr::Pow(a, k) => {
                let da = a.diff(var);
                if constant(&da) == Some(0.0) {
                    return Expr::Const(0.0);
                }
                mul(mul(Expr::Const(f64::from(*k)), pow((**a).clone(), k - 1)), da)
            }
            Expr::Func(func, a) => {
                let da = a.diff(var);
                if constant(&da) == Some(0.0) {
                    return Expr::Const(0.0);
                }
                let inner = (**a).clone();
                let outer = match func {
                    Func::Sin => Expr::Func(Func::Cos, Box::new(inner)),
                    Func::Cos => neg(Expr::Func(Func::Sin, Box::new(inner))),
                    Func::Exp => Expr::Func(Func::Exp, Box::new(inner)),
                    Func::Log => div(Expr::Const(1.0), inner),
                    Func::Sqrt => div(
                        Expr::Const(1.0),
                        mul(Expr::Const(2.0), Expr::Func(Func::Sqrt, Box::new(inner))),
                    ),
                };
                mul(outer, da)
            }
        }
    }
}

/// An expression together with its symbolic gradient and (upper-triangle)
/// Hessian, built once and evaluated many times.
#[derive(Debug, Clone)]
pub struct SmoothFn {
    pub expr: Expr,
    grad: Vec<Expr>,
    /// Row-major upper triangle: entry (i, j) with i <= j.
    hess: Vec<Expr>,
    n: usize,
}

impl SmoothFn {
    pub fn new(expr: Expr, n: usize) -> Self {
        let grad: Vec<Expr> = (0..n).map(|i| expr.diff(i)).collect();
        let mut hess = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                hess.push(grad[i].diff(j));
            }
        }
        SmoothFn { expr, grad, hess, n }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn value(&self, x: &[f64]) -> Result<f64, EvalError> {
        self.expr.eval(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<DVector<f64>, EvalError> {
        let mut g = DVector::zeros(self.n);
        for (i, e) in self.grad.iter().enumerate() {
            g[i] = e.eval(x)?;
        }
        Ok(g)
    }

    /// Exactly symmetric: the upper triangle is mirrored.
    pub fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        let mut h = DMatrix::zeros(self.n, self.n);
        let mut k = 0;
        for i in 0..self.n {
            for j in i..self.n {
                let v = self.hess[k].eval(x)?;
                h[(i, j)] = v;
                h[(j, i)] = v;
                k += 1;
            }
        }
        Ok(h)
    }

    /// True when every gradient entry is a constant (the function is affine).
    pub fn is_affine(&self) -> bool {
        self.grad.iter().all(|g| constant(g).is_some())
    }
}

/// Gradient of `e` at `x` by symbolic differentiation.
pub fn gradient(e: &Expr, x: &[f64]) -> Result<DVector<f64>, EvalError> {
    SmoothFn::new(e.clone(), x.len()).gradient(x)
}

/// Hessian of `e` at `x`; the result is bit-for-bit symmetric.
pub fn hessian(e: &Expr, x: &[f64]) -> Result<DMatrix<f64>, EvalError> {
    SmoothFn::new(e.clone(), x.len()).hessian(x)
}
