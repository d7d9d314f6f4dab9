use std::fmt;

use thiserror::Error;

use crate::expr::{fmt_binary, fmt_number, BinOp};

/// Rate expression with identifiers resolved to species / parameter indices.
#[derive(Debug, Clone, PartialEq)]
pub enum RateExpr {
    Num(f64),
    Species(usize),
    Param(usize),
    Neg(Box<RateExpr>),
    Binary(BinOp, Box<RateExpr>, Box<RateExpr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RateError {
    #[error("division by zero in rate expression")]
    DivisionByZero,
    #[error("rate evaluated to invalid value {0} (must be finite and non-negative)")]
    InvalidValue(f64),
    #[error("rate expression references species #{0}, which the state does not have")]
    SpeciesOutOfRange(usize),
    #[error("rate expression references parameter #{0}, which the parameter vector does not have")]
    ParamOutOfRange(usize),
}

impl RateExpr {
    /// Evaluates the expression at a state and parameter vector.
    ///
    /// Intermediate values may be negative; only the final value has to be a
    /// finite non-negative rate.
    pub fn eval(&self, state: &[i64], params: &[f64]) -> Result<f64, RateError> {
        let v = self.eval_raw(state, params)?;
        if v.is_finite() && v >= 0.0 {
            // normalizes -0.0
            Ok(v + 0.0)
        } else {
            Err(RateError::InvalidValue(v))
        }
    }

    fn eval_raw(&self, state: &[i64], params: &[f64]) -> Result<f64, RateError> {
        Ok(match self {
            RateExpr::Num(x) => *x,
            RateExpr::Species(i) => *state.get(*i).ok_or(RateError::SpeciesOutOfRange(*i))? as f64,
            RateExpr::Param(i) => *params.get(*i).ok_or(RateError::ParamOutOfRange(*i))?,
            RateExpr::Neg(e) => -e.eval_raw(state, params)?,
            RateExpr::Binary(op, a, b) => {
                let a = a.eval_raw(state, params)?;
                let b = b.eval_raw(state, params)?;
                if *op == BinOp::Div && b == 0.0 {
                    return Err(RateError::DivisionByZero);
                }
                op.apply(a, b)
            }
        })
    }

    /// Visits every species index the expression reads.
    pub fn species_refs(&self, out: &mut Vec<usize>) {
        match self {
            RateExpr::Species(i) => out.push(*i),
            RateExpr::Num(_) | RateExpr::Param(_) => {}
            RateExpr::Neg(e) => e.species_refs(out),
            RateExpr::Binary(_, a, b) => {
                a.species_refs(out);
                b.species_refs(out);
            }
        }
    }

    pub fn param_refs(&self, out: &mut Vec<usize>) {
        match self {
            RateExpr::Param(i) => out.push(*i),
            RateExpr::Num(_) | RateExpr::Species(_) => {}
            RateExpr::Neg(e) => e.param_refs(out),
            RateExpr::Binary(_, a, b) => {
                a.param_refs(out);
                b.param_refs(out);
            }
        }
    }

    /// Renders the expression using the given species and parameter names.
    pub fn display<'a>(&'a self, species: &'a [String], params: &'a [String]) -> impl fmt::Display + 'a {
        RateDisplay {
            expr: self,
            species,
            params,
        }
    }
}

struct RateDisplay<'a> {
    expr: &'a RateExpr,
    species: &'a [String],
    params: &'a [String],
}

impl fmt::Display for RateDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = |e| RateDisplay {
            expr: e,
            species: self.species,
            params: self.params,
        };
        match self.expr {
            RateExpr::Num(x) => fmt_number(f, *x),
            RateExpr::Species(i) => f.write_str(self.species.get(*i).map_or("?", |s| s.as_str())),
            RateExpr::Param(i) => f.write_str(self.params.get(*i).map_or("?", |s| s.as_str())),
            RateExpr::Neg(e) => write!(f, "(-{})", sub(e)),
            RateExpr::Binary(op, a, b) => fmt_binary(f, *op, &sub(a), &sub(b)),
        }
    }
}
