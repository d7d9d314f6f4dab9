//! Reaction-network CTMC models.
//!
//! A [`Model`] is a population CTMC family: a list of species whose counts form
//! the state, named real parameters, and reactions `r -> s @ rate`. Firing a
//! reaction subtracts the consumed vector and adds the produced vector; its
//! propensity is the rate expression evaluated at the current state and the
//! parameter vector.

mod parser;
mod rate;

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

use crate::lexer::Pos;

pub use parser::parse_model;
pub use rate::{RateError, RateExpr};

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub default: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    /// Reactant coefficients, one entry per species.
    pub consumed: Vec<u32>,
    /// Product coefficients, one entry per species.
    pub produced: Vec<u32>,
    pub rate: RateExpr,
}

impl Reaction {
    /// State change `produced - consumed` applied when the reaction fires.
    pub fn net_change(&self) -> Vec<i64> {
        self.produced
            .iter()
            .zip(&self.consumed)
            .map(|(&p, &c)| i64::from(p) - i64::from(c))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub species: Vec<String>,
    pub parameters: Vec<Parameter>,
    pub reactions: Vec<Reaction>,
    pub initial_state: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DuplicateSpecies(String),
    DuplicateParameter(String),
    SpeciesParameterClash(String),
    InitialStateLength {
        expected: usize,
        actual: usize,
    },
    NegativeInitialCount {
        species: String,
        count: i64,
    },
    ReactionVectorLength {
        reaction: usize,
        side: &'static str,
        expected: usize,
        actual: usize,
    },
    DanglingSpecies {
        reaction: usize,
        index: usize,
    },
    DanglingParameter {
        reaction: usize,
        index: usize,
    },
    NonFiniteDefault(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateSpecies(n) => write!(f, "duplicate species `{n}`"),
            Violation::DuplicateParameter(n) => write!(f, "duplicate parameter `{n}`"),
            Violation::SpeciesParameterClash(n) => {
                write!(f, "`{n}` is declared both as a species and as a parameter")
            }
            Violation::InitialStateLength { expected, actual } => write!(
                f,
                "initial state has length {actual}, expected {expected} (one count per species)"
            ),
            Violation::NegativeInitialCount { species, count } => {
                write!(f, "initial count of `{species}` is negative ({count})")
            }
            Violation::ReactionVectorLength {
                reaction,
                side,
                expected,
                actual,
            } => write!(
                f,
                "reaction {reaction}: {side} vector has length {actual}, expected {expected}"
            ),
            Violation::DanglingSpecies { reaction, index } => {
                write!(f, "reaction {reaction}: rate references undeclared species #{index}")
            }
            Violation::DanglingParameter { reaction, index } => {
                write!(f, "reaction {reaction}: rate references undeclared parameter #{index}")
            }
            Violation::NonFiniteDefault(n) => write!(f, "parameter `{n}` has a non-finite default"),
        }
    }
}

/// Every invariant violation found in a model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} model invariant violation(s)", self.violations.len())?;
        for v in &self.violations {
            write!(f, "\n  - {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationReport {}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("syntax error at {pos}: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("duplicate name `{name}` at {pos}")]
    DuplicateName { name: String, pos: Pos },
    #[error("undeclared identifier `{name}` at {pos}")]
    UndeclaredIdentifier { name: String, pos: Pos },
    #[error("invalid stoichiometry at {pos}: {message}")]
    Stoichiometry { pos: Pos, message: String },
    #[error("missing initial state for species `{species}`")]
    MissingInitialState { species: String },
    #[error(transparent)]
    Invalid(#[from] ValidationReport),
}

impl Model {
    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s == name)
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.parameters.iter().position(|p| p.name == name)
    }

    pub fn param_names(&self) -> Vec<String> {
        self.parameters.iter().map(|p| p.name.clone()).collect()
    }

    /// Parameter vector made of the declared defaults.
    pub fn default_params(&self) -> Vec<f64> {
        self.parameters.iter().map(|p| p.default).collect()
    }

    /// Checks every model invariant and reports all violations at once.
    pub fn validate(&self) -> Result<(), ValidationReport> {
        let mut violations = Vec::new();
        let n = self.species.len();

        let mut seen = HashSet::new();
        for s in &self.species {
            if !seen.insert(s.as_str()) {
                violations.push(Violation::DuplicateSpecies(s.clone()));
            }
        }
        let mut seen_params = HashSet::new();
        for p in &self.parameters {
            if !seen_params.insert(p.name.as_str()) {
                violations.push(Violation::DuplicateParameter(p.name.clone()));
            }
            if seen.contains(p.name.as_str()) {
                violations.push(Violation::SpeciesParameterClash(p.name.clone()));
            }
            if !p.default.is_finite() {
                violations.push(Violation::NonFiniteDefault(p.name.clone()));
            }
        }

        if self.initial_state.len() != n {
            violations.push(Violation::InitialStateLength {
                expected: n,
                actual: self.initial_state.len(),
            });
        }
        for (name, &count) in self.species.iter().zip(&self.initial_state) {
            if count < 0 {
                violations.push(Violation::NegativeInitialCount {
                    species: name.clone(),
                    count,
                });
            }
        }

        for (k, r) in self.reactions.iter().enumerate() {
            for (side, v) in [("consumed", &r.consumed), ("produced", &r.produced)] {
                if v.len() != n {
                    violations.push(Violation::ReactionVectorLength {
                        reaction: k,
                        side,
                        expected: n,
                        actual: v.len(),
                    });
                }
            }
            let mut refs = Vec::new();
            r.rate.species_refs(&mut refs);
            for index in refs.into_iter().filter(|&i| i >= n) {
                violations.push(Violation::DanglingSpecies { reaction: k, index });
            }
            let mut refs = Vec::new();
            r.rate.param_refs(&mut refs);
            for index in refs.into_iter().filter(|&i| i >= self.parameters.len()) {
                violations.push(Violation::DanglingParameter { reaction: k, index });
            }
        }

        if violations.is_empty() {
            Ok(())
        } else {
            Err(ValidationReport { violations })
        }
    }
}

/// Pretty-prints the model in the same line format [`parse_model`] reads.
impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("species")?;
        for (s, c) in self.species.iter().zip(&self.initial_state) {
            write!(f, " {s}={c}")?;
        }
        writeln!(f)?;
        if !self.parameters.is_empty() {
            f.write_str("param")?;
            for p in &self.parameters {
                write!(f, " {}={:?}", p.name, p.default)?;
            }
            writeln!(f)?;
        }
        let params = self.param_names();
        for r in &self.reactions {
            writeln!(
                f,
                "reaction {} -> {} @ {}",
                SideDisplay(&self.species, &r.consumed),
                SideDisplay(&self.species, &r.produced),
                r.rate.display(&self.species, &params)
            )?;
        }
        Ok(())
    }
}

struct SideDisplay<'a>(&'a [String], &'a [u32]);

impl fmt::Display for SideDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (name, &c) in self.0.iter().zip(self.1) {
            if c == 0 {
                continue;
            }
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            if c == 1 {
                f.write_str(name)?;
            } else {
                write!(f, "{c} {name}")?;
            }
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}
