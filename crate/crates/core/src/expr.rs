//! Untyped arithmetic syntax shared by rate expressions and property atoms.
//!
//! Both front ends parse into [`ArithAst`] and then resolve identifiers and
//! function calls against their own namespaces.

use std::fmt;

use crate::lexer::{Cursor, Pos, Tok};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Min,
    Max,
}

impl BinOp {
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinOp::Add => a + b,
            BinOp::Sub => a - b,
            BinOp::Mul => a * b,
            BinOp::Div => a / b,
            BinOp::Pow => a.powf(b),
            BinOp::Min => a.min(b),
            BinOp::Max => a.max(b),
        }
    }

    fn infix_symbol(self) -> Option<&'static str> {
        match self {
            BinOp::Add => Some("+"),
            BinOp::Sub => Some("-"),
            BinOp::Mul => Some("*"),
            BinOp::Div => Some("/"),
            BinOp::Pow => Some("^"),
            BinOp::Min | BinOp::Max => None,
        }
    }

    fn function_name(self) -> &'static str {
        match self {
            BinOp::Min => "min",
            BinOp::Max => "max",
            _ => unreachable!("infix operator"),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum ArithAst {
    Num(f64),
    Ident(String, Pos),
    Call(String, Vec<ArithAst>, Pos),
    Neg(Box<ArithAst>),
    Bin(BinOp, Box<ArithAst>, Box<ArithAst>),
}

#[derive(Debug, Clone)]
pub(crate) struct SyntaxError {
    pub pos: Pos,
    pub message: String,
}

impl SyntaxError {
    pub fn expected(cur: &Cursor<'_>, what: &str) -> Self {
        SyntaxError {
            pos: cur.pos(),
            message: format!("expected {what}, found {}", cur.describe_next()),
        }
    }
}

/// expr := term (('+' | '-') term)*
pub(crate) fn parse_arith(cur: &mut Cursor<'_>) -> Result<ArithAst, SyntaxError> {
    let mut lhs = parse_term(cur)?;
    loop {
        let op = match cur.peek() {
            Some(Tok::Plus) => BinOp::Add,
            Some(Tok::Minus) => BinOp::Sub,
            _ => return Ok(lhs),
        };
        cur.next();
        let rhs = parse_term(cur)?;
        lhs = ArithAst::Bin(op, Box::new(lhs), Box::new(rhs));
    }
}

fn parse_term(cur: &mut Cursor<'_>) -> Result<ArithAst, SyntaxError> {
    let mut lhs = parse_unary(cur)?;
    loop {
        let op = match cur.peek() {
            Some(Tok::Star) => BinOp::Mul,
            Some(Tok::Slash) => BinOp::Div,
            _ => return Ok(lhs),
        };
        cur.next();
        let rhs = parse_unary(cur)?;
        lhs = ArithAst::Bin(op, Box::new(lhs), Box::new(rhs));
    }
}

fn parse_unary(cur: &mut Cursor<'_>) -> Result<ArithAst, SyntaxError> {
    if cur.eat(&Tok::Minus) {
        return Ok(ArithAst::Neg(Box::new(parse_unary(cur)?)));
    }
    if cur.eat(&Tok::Plus) {
        return parse_unary(cur);
    }
    parse_power(cur)
}

// Right-associative; binds tighter than unary minus on its left (-a^2 = -(a^2)).
fn parse_power(cur: &mut Cursor<'_>) -> Result<ArithAst, SyntaxError> {
    let base = parse_atom(cur)?;
    if cur.eat(&Tok::Caret) {
        let exp = parse_unary(cur)?;
        return Ok(ArithAst::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
    }
    Ok(base)
}

fn parse_atom(cur: &mut Cursor<'_>) -> Result<ArithAst, SyntaxError> {
    let pos = cur.pos();
    match cur.peek() {
        Some(Tok::Number(x)) => {
            let x = *x;
            cur.next();
            Ok(ArithAst::Num(x))
        }
        Some(Tok::Ident(name)) => {
            cur.next();
            if cur.eat(&Tok::LParen) {
                let mut args = vec![parse_arith(cur)?];
                while cur.eat(&Tok::Comma) {
                    args.push(parse_arith(cur)?);
                }
                if !cur.eat(&Tok::RParen) {
                    return Err(SyntaxError::expected(cur, "`)`"));
                }
                Ok(ArithAst::Call(name.clone(), args, pos))
            } else {
                Ok(ArithAst::Ident(name.clone(), pos))
            }
        }
        Some(Tok::LParen) => {
            cur.next();
            let inner = parse_arith(cur)?;
            if !cur.eat(&Tok::RParen) {
                return Err(SyntaxError::expected(cur, "`)`"));
            }
            Ok(inner)
        }
        _ => Err(SyntaxError::expected(cur, "a number, identifier or `(`")),
    }
}

/// Formats a literal so that it parses back to the same `f64`.
pub(crate) fn fmt_number(f: &mut fmt::Formatter<'_>, x: f64) -> fmt::Result {
    if x < 0.0 {
        write!(f, "(-{:?})", -x)
    } else {
        write!(f, "{x:?}")
    }
}

/// Prints a binary node with full parenthesization of infix operators.
pub(crate) fn fmt_binary(
    f: &mut fmt::Formatter<'_>,
    op: BinOp,
    lhs: &dyn fmt::Display,
    rhs: &dyn fmt::Display,
) -> fmt::Result {
    match op.infix_symbol() {
        Some(sym) => write!(f, "({lhs} {sym} {rhs})"),
        None => write!(f, "{}({lhs}, {rhs})", op.function_name()),
    }
}
