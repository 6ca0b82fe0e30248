//! Coefficient expressions in the variables `x` and `t`.
//!
//! A small infix language is enough to describe every coefficient of a
//! problem file: numeric literals, `x`, `t`, `pi`, the operators
//! `+ - * / ^` (with `^` binding tighter than unary minus and associating to
//! the right) and the functions `sin cos exp log abs sqrt`.
//!
//! ```
//! use charperiodic::expr::CoefficientExpr;
//!
//! let e = CoefficientExpr::parse("x + sin(t)").unwrap();
//! assert_eq!(e.evaluate(0.5, 0.0).unwrap(), 0.5);
//! ```

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use thiserror::Error;

/// Error produced by [`CoefficientExpr::parse`]. Offsets are byte offsets
/// into the source text.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::UnknownIdentifier { offset, .. } => {
                *offset
            }
        }
    }
}

/// Error produced by [`CoefficientExpr::evaluate`].
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero at (x, t) = ({x}, {t})")]
    DivisionByZero { x: f64, t: f64 },
    #[error("log of non-positive argument {arg} at (x, t) = ({x}, {t})")]
    LogDomain { arg: f64, x: f64, t: f64 },
    #[error("non-finite value at (x, t) = ({x}, {t})")]
    NonFinite { x: f64, t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Abs,
    Sqrt,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
        }
    }
}

/// Expression tree node.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    X,
    T,
    Pi,
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

// Binding strength used by the printer.
const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

impl Node {
    fn eval(&self, x: f64, t: f64) -> Result<f64, EvalError> {
        let v = match self {
            Node::Const(c) => *c,
            Node::X => x,
            Node::T => t,
            Node::Pi => std::f64::consts::PI,
            Node::Neg(a) => -a.eval(x, t)?,
            Node::Binary(op, a, b) => {
                let l = a.eval(x, t)?;
                let r = b.eval(x, t)?;
                match op {
                    BinOp::Add => l + r,
                    BinOp::Sub => l - r,
                    BinOp::Mul => l * r,
                    BinOp::Div => {
                        if r == 0.0 {
                            return Err(EvalError::DivisionByZero { x, t });
                        }
                        l / r
                    }
                    BinOp::Pow => l.powf(r),
                }
            }
            Node::Call(f, a) => {
                let v = a.eval(x, t)?;
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Log => {
                        if v <= 0.0 {
                            return Err(EvalError::LogDomain { arg: v, x, t });
                        }
                        v.ln()
                    }
                    Func::Abs => v.abs(),
                    Func::Sqrt => v.sqrt(),
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite { x, t })
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Node::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => PREC_NEG,
            Node::Const(_) | Node::X | Node::T | Node::Pi | Node::Call(..) => PREC_ATOM,
            Node::Neg(_) => PREC_NEG,
            Node::Binary(BinOp::Add | BinOp::Sub, ..) => PREC_ADD,
            Node::Binary(BinOp::Mul | BinOp::Div, ..) => PREC_MUL,
            Node::Binary(BinOp::Pow, ..) => PREC_POW,
        }
    }

    fn mentions(&self, var: &Node) -> bool {
        match self {
            Node::Const(_) | Node::Pi => false,
            Node::X | Node::T => self == var,
            Node::Neg(a) | Node::Call(_, a) => a.mentions(var),
            Node::Binary(_, a, b) => a.mentions(var) || b.mentions(var),
        }
    }

    fn substitute(&self, x: &Node, t: &Node) -> Node {
        match self {
            Node::X => x.clone(),
            Node::T => t.clone(),
            Node::Const(_) | Node::Pi => self.clone(),
            Node::Neg(a) => Node::Neg(Box::new(a.substitute(x, t))),
            Node::Call(f, a) => Node::Call(*f, Box::new(a.substitute(x, t))),
            Node::Binary(op, a, b) => {
                Node::Binary(*op, Box::new(a.substitute(x, t)), Box::new(b.substitute(x, t)))
            }
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        let paren = self.precedence() < min_prec;
        if paren {
            f.write_str("(")?;
        }
        match self {
            Node::Const(c) => write!(f, "{c:?}")?,
            Node::X => f.write_str("x")?,
            Node::T => f.write_str("t")?,
            Node::Pi => f.write_str("pi")?,
            Node::Neg(a) => {
                f.write_str("-")?;
                a.write(f, PREC_NEG)?;
            }
            Node::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.write(f, 0)?;
                f.write_str(")")?;
            }
            Node::Binary(op, a, b) => {
                let (sym, lp, rp) = match op {
                    BinOp::Add => (" + ", PREC_ADD, PREC_ADD + 1),
                    BinOp::Sub => (" - ", PREC_ADD, PREC_ADD + 1),
                    BinOp::Mul => ("*", PREC_MUL, PREC_MUL + 1),
                    BinOp::Div => ("/", PREC_MUL, PREC_MUL + 1),
                    // base must be an atom, exponent may carry a unary minus
                    BinOp::Pow => ("^", PREC_ATOM, PREC_NEG),
                };
                a.write(f, lp)?;
                f.write_str(sym)?;
                b.write(f, rp)?;
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// A parsed coefficient expression. Cheap to clone; immutable.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientExpr {
    root: Arc<Node>,
}

impl CoefficientExpr {
    pub fn parse(source: &str) -> Result<Self, ParseError> {
        Parser::new(source).parse_all().map(Self::from_node)
    }

    pub fn from_node(node: Node) -> Self {
        CoefficientExpr { root: Arc::new(node) }
    }

    pub fn constant(value: f64) -> Self {
        Self::from_node(Node::Const(value))
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn x() -> Self {
        Self::from_node(Node::X)
    }

    pub fn t() -> Self {
        Self::from_node(Node::T)
    }

    pub fn call(func: Func, arg: CoefficientExpr) -> Self {
        Self::from_node(Node::Call(func, Box::new(arg.into_node())))
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    fn into_node(self) -> Node {
        Arc::try_unwrap(self.root).unwrap_or_else(|rc| (*rc).clone())
    }

    pub fn evaluate(&self, x: f64, t: f64) -> Result<f64, EvalError> {
        self.root.eval(x, t)
    }

    /// The value if the tree is a bare constant.
    pub fn as_constant(&self) -> Option<f64> {
        match *self.root {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    /// Structurally zero (a literal `0`). Used to skip work, never to decide
    /// mathematical identity.
    pub fn is_zero(&self) -> bool {
        self.as_constant() == Some(0.0)
    }

    pub fn depends_on_x(&self) -> bool {
        self.root.mentions(&Node::X)
    }

    pub fn depends_on_t(&self) -> bool {
        self.root.mentions(&Node::T)
    }

    /// Replace every occurrence of `x` and `t` by the given expressions.
    pub fn substitute(&self, x: &CoefficientExpr, t: &CoefficientExpr) -> CoefficientExpr {
        Self::from_node(self.root.substitute(&x.root, &t.root))
    }

    /// `self` with `x` replaced by `x + dx` and `t` by `t + dt`.
    pub fn shifted(&self, dx: f64, dt: f64) -> CoefficientExpr {
        let xs = if dx == 0.0 { Self::x() } else { Self::x() + Self::constant(dx) };
        let ts = if dt == 0.0 { Self::t() } else { Self::t() + Self::constant(dt) };
        self.substitute(&xs, &ts)
    }

    fn binary(op: BinOp, l: CoefficientExpr, r: CoefficientExpr) -> CoefficientExpr {
        if let (Some(a), Some(b)) = (l.as_constant(), r.as_constant()) {
            let folded = Node::Binary(op, Box::new(Node::Const(a)), Box::new(Node::Const(b)));
            if let Ok(v) = folded.eval(0.0, 0.0) {
                return Self::constant(v);
            }
        }
        Self::from_node(Node::Binary(op, Box::new(l.into_node()), Box::new(r.into_node())))
    }
}

impl fmt::Display for CoefficientExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.write(f, 0)
    }
}

impl std::str::FromStr for CoefficientExpr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident, $op:expr) => {
        impl $trait for CoefficientExpr {
            type Output = CoefficientExpr;
            fn $method(self, rhs: CoefficientExpr) -> CoefficientExpr {
                CoefficientExpr::binary($op, self, rhs)
            }
        }
        impl $trait<&CoefficientExpr> for &CoefficientExpr {
            type Output = CoefficientExpr;
            fn $method(self, rhs: &CoefficientExpr) -> CoefficientExpr {
                CoefficientExpr::binary($op, self.clone(), rhs.clone())
            }
        }
    };
}

impl_binop!(Add, add, BinOp::Add);
impl_binop!(Sub, sub, BinOp::Sub);
impl_binop!(Mul, mul, BinOp::Mul);
impl_binop!(Div, div, BinOp::Div);

impl Neg for CoefficientExpr {
    type Output = CoefficientExpr;
    fn neg(self) -> CoefficientExpr {
        match self.as_constant() {
            Some(c) => CoefficientExpr::constant(-c),
            None => CoefficientExpr::from_node(Node::Neg(Box::new(self.into_node()))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    tok: Tok,
    tok_start: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser { src, pos: 0, tok: Tok::End, tok_start: 0 }
    }

    fn err(&self, offset: usize, message: impl Into<String>) -> ParseError {
        // keep offsets inside the source, even for end-of-input errors
        let offset = offset.min(self.src.len().saturating_sub(1));
        ParseError::Syntax { offset, message: message.into() }
    }

    fn advance(&mut self) -> Result<(), ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        self.tok_start = self.pos;
        if self.pos >= bytes.len() {
            self.tok = Tok::End;
            return Ok(());
        }
        let c = bytes[self.pos];
        let single = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = single {
            self.pos += 1;
            self.tok = tok;
            return Ok(());
        }
        if c.is_ascii_digit() || c == b'.' {
            let start = self.pos;
            let mut p = self.pos;
            while p < bytes.len() && bytes[p].is_ascii_digit() {
                p += 1;
            }
            if p < bytes.len() && bytes[p] == b'.' {
                p += 1;
                while p < bytes.len() && bytes[p].is_ascii_digit() {
                    p += 1;
                }
            }
            if p < bytes.len() && (bytes[p] == b'e' || bytes[p] == b'E') {
                let mut q = p + 1;
                if q < bytes.len() && (bytes[q] == b'+' || bytes[q] == b'-') {
                    q += 1;
                }
                if q < bytes.len() && bytes[q].is_ascii_digit() {
                    while q < bytes.len() && bytes[q].is_ascii_digit() {
                        q += 1;
                    }
                    p = q;
                } else {
                    return Err(self.err(q, "malformed exponent"));
                }
            }
            let text = &self.src[start..p];
            let value: f64 = text
                .parse()
                .map_err(|_| self.err(start, format!("malformed number `{text}`")))?;
            self.pos = p;
            self.tok = Tok::Num(value);
            return Ok(());
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = self.pos;
            let mut p = self.pos;
            while p < bytes.len() && (bytes[p].is_ascii_alphanumeric() || bytes[p] == b'_') {
                p += 1;
            }
            self.pos = p;
            self.tok = Tok::Ident(self.src[start..p].to_string());
            return Ok(());
        }
        let ch = self.src[self.pos..].chars().next().unwrap_or('?');
        Err(self.err(self.pos, format!("unexpected character `{ch}`")))
    }

    fn parse_all(mut self) -> Result<Node, ParseError> {
        if self.src.trim().is_empty() {
            return Err(ParseError::Syntax { offset: 0, message: "empty expression".into() });
        }
        self.advance()?;
        let node = self.parse_sum()?;
        if self.tok != Tok::End {
            return Err(self.err(self.tok_start, "unexpected trailing input"));
        }
        Ok(node)
    }

    fn parse_sum(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.parse_product()?;
        loop {
            let op = match self.tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance()?;
            let rhs = self.parse_product()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn parse_product(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.parse_unary()?;
        loop {
            let op = match self.tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.advance()?;
            let rhs = self.parse_unary()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn parse_unary(&mut self) -> Result<Node, ParseError> {
        if self.tok == Tok::Minus {
            self.advance()?;
            let inner = self.parse_unary()?;
            return Ok(Node::Neg(Box::new(inner)));
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Node, ParseError> {
        let base = self.parse_primary()?;
        if self.tok == Tok::Caret {
            self.advance()?;
            let exponent = self.parse_unary()?;
            return Ok(Node::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn parse_primary(&mut self) -> Result<Node, ParseError> {
        let start = self.tok_start;
        match std::mem::replace(&mut self.tok, Tok::End) {
            Tok::Num(v) => {
                self.advance()?;
                Ok(Node::Const(v))
            }
            Tok::LParen => {
                self.advance()?;
                let inner = self.parse_sum()?;
                self.expect_rparen(start)?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.advance()?;
                match name.as_str() {
                    "x" => Ok(Node::X),
                    "t" => Ok(Node::T),
                    "pi" => Ok(Node::Pi),
                    _ => match Func::from_name(&name) {
                        Some(func) => {
                            if self.tok != Tok::LParen {
                                return Err(self.err(
                                    self.tok_start,
                                    format!("expected `(` after function `{name}`"),
                                ));
                            }
                            let open = self.tok_start;
                            self.advance()?;
                            let arg = self.parse_sum()?;
                            self.expect_rparen(open)?;
                            Ok(Node::Call(func, Box::new(arg)))
                        }
                        None => Err(ParseError::UnknownIdentifier { name, offset: start }),
                    },
                }
            }
            Tok::End => Err(self.err(start, "unexpected end of input")),
            other => Err(self.err(start, format!("unexpected token {}", describe(&other)))),
        }
    }

    fn expect_rparen(&mut self, open: usize) -> Result<(), ParseError> {
        if self.tok != Tok::RParen {
            let at = if self.tok == Tok::End { open } else { self.tok_start };
            return Err(self.err(at, "unbalanced parenthesis"));
        }
        self.advance()
    }
}

fn describe(tok: &Tok) -> &'static str {
    match tok {
        Tok::Num(_) => "number",
        Tok::Ident(_) => "identifier",
        Tok::Plus => "`+`",
        Tok::Minus => "`-`",
        Tok::Star => "`*`",
        Tok::Slash => "`/`",
        Tok::Caret => "`^`",
        Tok::LParen => "`(`",
        Tok::RParen => "`)`",
        Tok::End => "end of input",
    }
}
