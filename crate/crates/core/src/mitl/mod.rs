//! Time-bounded MiTL over piecewise-constant trajectories.
//!
//! Formulas are parsed with named variable references ([`VarRef`]) and then
//! bound against a [`Model`], which resolves every name to an index
//! ([`BoundRef`]). Monitoring computes the full set of satisfying times as an
//! [`IntervalSet`]; truth of the formula is membership of time 0.

mod intervals;
mod monitor;
mod parser;

use std::fmt;

use thiserror::Error;

use crate::expr::{fmt_binary, fmt_number, BinOp};
use crate::lexer::Pos;
use crate::model::Model;

pub use intervals::{Interval, IntervalSet};
pub use monitor::{monitor, sat_intervals, MonitorError, SignalContext};
pub use parser::parse_formula;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

impl CmpOp {
    pub fn holds(self, a: f64, b: f64) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
            CmpOp::Eq => a == b,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "=",
        }
    }
}

/// Variable reference as written in a property file.
#[derive(Debug, Clone, PartialEq)]
pub enum VarRef {
    /// A species or parameter name.
    Name(String),
    /// `mean(X)`
    Mean(String),
    /// `delta(X)`
    Delta(String),
}

impl fmt::Display for VarRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarRef::Name(n) => f.write_str(n),
            VarRef::Mean(n) => write!(f, "mean({n})"),
            VarRef::Delta(n) => write!(f, "delta({n})"),
        }
    }
}

/// Variable reference resolved against a model.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundRef {
    Species(usize),
    Param(usize),
    /// Mean-signal track, looked up by species name.
    Mean(String),
    Delta(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SignalExpr<R> {
    Num(f64),
    Var(R),
    Neg(Box<SignalExpr<R>>),
    Abs(Box<SignalExpr<R>>),
    Binary(BinOp, Box<SignalExpr<R>>, Box<SignalExpr<R>>),
}

impl<R> SignalExpr<R> {
    pub fn eval(&self, lookup: &impl Fn(&R) -> f64) -> f64 {
        match self {
            SignalExpr::Num(x) => *x,
            SignalExpr::Var(r) => lookup(r),
            SignalExpr::Neg(e) => -e.eval(lookup),
            SignalExpr::Abs(e) => e.eval(lookup).abs(),
            SignalExpr::Binary(op, a, b) => op.apply(a.eval(lookup), b.eval(lookup)),
        }
    }

    fn visit<'a>(&'a self, out: &mut impl FnMut(&'a R)) {
        match self {
            SignalExpr::Num(_) => {}
            SignalExpr::Var(r) => out(r),
            SignalExpr::Neg(e) | SignalExpr::Abs(e) => e.visit(out),
            SignalExpr::Binary(_, a, b) => {
                a.visit(out);
                b.visit(out);
            }
        }
    }

    fn try_map<S, E>(&self, f: &impl Fn(&R) -> Result<S, E>) -> Result<SignalExpr<S>, E> {
        Ok(match self {
            SignalExpr::Num(x) => SignalExpr::Num(*x),
            SignalExpr::Var(r) => SignalExpr::Var(f(r)?),
            SignalExpr::Neg(e) => SignalExpr::Neg(Box::new(e.try_map(f)?)),
            SignalExpr::Abs(e) => SignalExpr::Abs(Box::new(e.try_map(f)?)),
            SignalExpr::Binary(op, a, b) => SignalExpr::Binary(*op, Box::new(a.try_map(f)?), Box::new(b.try_map(f)?)),
        })
    }
}

impl<R: fmt::Display> fmt::Display for SignalExpr<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignalExpr::Num(x) => fmt_number(f, *x),
            SignalExpr::Var(r) => write!(f, "{r}"),
            SignalExpr::Neg(e) => write!(f, "(-{e})"),
            SignalExpr::Abs(e) => write!(f, "abs({e})"),
            SignalExpr::Binary(op, a, b) => fmt_binary(f, *op, a.as_ref(), b.as_ref()),
        }
    }
}

/// Atomic proposition `lhs op rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom<R> {
    pub lhs: SignalExpr<R>,
    pub op: CmpOp,
    pub rhs: SignalExpr<R>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Formula<R = VarRef> {
    True,
    Atom(Atom<R>),
    Not(Box<Formula<R>>),
    And(Box<Formula<R>>, Box<Formula<R>>),
    Until {
        lo: f64,
        hi: f64,
        left: Box<Formula<R>>,
        right: Box<Formula<R>>,
    },
    Eventually {
        lo: f64,
        hi: f64,
        inner: Box<Formula<R>>,
    },
    Always {
        lo: f64,
        hi: f64,
        inner: Box<Formula<R>>,
    },
}

pub type BoundFormula = Formula<BoundRef>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormulaError {
    #[error("syntax error at {pos}: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("temporal bound [{lo}, {hi}] at {pos} has lower bound above upper bound")]
    BoundOrder { lo: f64, hi: f64, pos: Pos },
    #[error("temporal bound at {pos} is negative")]
    NegativeBound { pos: Pos },
    #[error("temporal bound at {pos} is not finite")]
    InfiniteBound { pos: Pos },
    #[error("unknown identifier `{0}`: not a species or parameter of the model")]
    UnknownIdentifier(String),
    #[error("`{func}({arg})`: `{arg}` is not a species of the model")]
    NotASpecies { func: &'static str, arg: String },
}

impl<R> Formula<R> {
    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula<R>) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula<R>, b: Formula<R>) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    /// `a | b`, stored as `!(!a & !b)`.
    pub fn or(a: Formula<R>, b: Formula<R>) -> Self {
        Formula::not(Formula::and(Formula::not(a), Formula::not(b)))
    }

    pub fn until(lo: f64, hi: f64, left: Formula<R>, right: Formula<R>) -> Self {
        Formula::Until {
            lo,
            hi,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn eventually(lo: f64, hi: f64, inner: Formula<R>) -> Self {
        Formula::Eventually {
            lo,
            hi,
            inner: Box::new(inner),
        }
    }

    pub fn always(lo: f64, hi: f64, inner: Formula<R>) -> Self {
        Formula::Always {
            lo,
            hi,
            inner: Box::new(inner),
        }
    }

    /// Length of trajectory needed to decide the formula at time 0.
    pub fn horizon(&self) -> f64 {
        match self {
            Formula::True | Formula::Atom(_) => 0.0,
            Formula::Not(f) => f.horizon(),
            Formula::And(a, b) => a.horizon().max(b.horizon()),
            Formula::Until { hi, left, right, .. } => hi + left.horizon().max(right.horizon()),
            Formula::Eventually { hi, inner, .. } | Formula::Always { hi, inner, .. } => hi + inner.horizon(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Formula::True | Formula::Atom(_) => 0,
            Formula::Not(f) => 1 + f.depth(),
            Formula::And(a, b) | Formula::Until { left: a, right: b, .. } => 1 + a.depth().max(b.depth()),
            Formula::Eventually { inner, .. } | Formula::Always { inner, .. } => 1 + inner.depth(),
        }
    }

    fn visit_refs<'a>(&'a self, out: &mut impl FnMut(&'a R)) {
        match self {
            Formula::True => {}
            Formula::Atom(a) => {
                a.lhs.visit(out);
                a.rhs.visit(out);
            }
            Formula::Not(f) => f.visit_refs(out),
            Formula::And(a, b) | Formula::Until { left: a, right: b, .. } => {
                a.visit_refs(out);
                b.visit_refs(out);
            }
            Formula::Eventually { inner, .. } | Formula::Always { inner, .. } => inner.visit_refs(out),
        }
    }

    fn try_map<S, E>(&self, f: &impl Fn(&R) -> Result<S, E>) -> Result<Formula<S>, E> {
        Ok(match self {
            Formula::True => Formula::True,
            Formula::Atom(a) => Formula::Atom(Atom {
                lhs: a.lhs.try_map(f)?,
                op: a.op,
                rhs: a.rhs.try_map(f)?,
            }),
            Formula::Not(g) => Formula::not(g.try_map(f)?),
            Formula::And(a, b) => Formula::and(a.try_map(f)?, b.try_map(f)?),
            Formula::Until { lo, hi, left, right } => Formula::until(*lo, *hi, left.try_map(f)?, right.try_map(f)?),
            Formula::Eventually { lo, hi, inner } => Formula::eventually(*lo, *hi, inner.try_map(f)?),
            Formula::Always { lo, hi, inner } => Formula::always(*lo, *hi, inner.try_map(f)?),
        })
    }
}

impl Formula<VarRef> {
    /// Species whose mean signal the formula reads, without duplicates.
    pub fn mean_species(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        self.visit_refs(&mut |r| {
            if let VarRef::Mean(s) = r {
                if !out.contains(s) {
                    out.push(s.clone());
                }
            }
        });
        out
    }

    /// Resolves every name against the model's species and parameters.
    pub fn bind(&self, model: &Model) -> Result<BoundFormula, FormulaError> {
        self.try_map(&|r: &VarRef| match r {
            VarRef::Name(n) => model
                .species_index(n)
                .map(BoundRef::Species)
                .or_else(|| model.param_index(n).map(BoundRef::Param))
                .ok_or_else(|| FormulaError::UnknownIdentifier(n.clone())),
            VarRef::Mean(n) => model
                .species_index(n)
                .map(|_| BoundRef::Mean(n.clone()))
                .ok_or_else(|| FormulaError::NotASpecies {
                    func: "mean",
                    arg: n.clone(),
                }),
            VarRef::Delta(n) => model
                .species_index(n)
                .map(BoundRef::Delta)
                .ok_or_else(|| FormulaError::NotASpecies {
                    func: "delta",
                    arg: n.clone(),
                }),
        })
    }
}

impl Formula<BoundRef> {
    pub fn mean_species(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        self.visit_refs(&mut |r| {
            if let BoundRef::Mean(s) = r {
                if !out.contains(s) {
                    out.push(s.clone());
                }
            }
        });
        out
    }
}

fn fmt_bounds(f: &mut fmt::Formatter<'_>, lo: f64, hi: f64) -> fmt::Result {
    write!(f, "[{lo:?},{hi:?}]")
}

/// Prints a formula in the property-file syntax, fully parenthesized.
impl fmt::Display for Formula<VarRef> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("tt"),
            Formula::Atom(a) => write!(f, "{} {} {}", a.lhs, a.op.symbol(), a.rhs),
            Formula::Not(g) => write!(f, "!({g})"),
            Formula::And(a, b) => write!(f, "({a}) & ({b})"),
            Formula::Until { lo, hi, left, right } => {
                write!(f, "({left}) U")?;
                fmt_bounds(f, *lo, *hi)?;
                write!(f, " ({right})")
            }
            Formula::Eventually { lo, hi, inner } => {
                f.write_str("F")?;
                fmt_bounds(f, *lo, *hi)?;
                write!(f, " ({inner})")
            }
            Formula::Always { lo, hi, inner } => {
                f.write_str("G")?;
                fmt_bounds(f, *lo, *hi)?;
                write!(f, " ({inner})")
            }
        }
    }
}
