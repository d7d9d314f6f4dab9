//! Smoothed statistical model checking for parametric CTMCs.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod expr;
mod lexer;

pub mod experiment;
pub mod gp;
pub mod mitl;
pub mod model;
pub mod rng;
pub mod smc;
pub mod ssa;

pub use lexer::Pos;
