//! Line-oriented model file parser.
//!
//! ```text
//! # SIR epidemic
//! species S=99 I=1 R=0
//! param k_i=0.12 k_r=0.05
//! reaction S + I -> I + I @ k_i*S*I
//! reaction I -> R @ k_r*I
//! ```
//!
//! Declarations may appear in any order; reactions are resolved after all
//! `species` and `param` lines have been read. An empty reaction side is
//! written as nothing or as `0`.

use std::collections::HashMap;

use super::{Model, ModelError, Parameter, RateExpr, Reaction};
use crate::expr::{parse_arith, ArithAst, BinOp, SyntaxError};
use crate::lexer::{end_pos, tokenize, Cursor, Pos, Tok, Token};

struct Line {
    number: usize,
    text: String,
    toks: Vec<Token>,
}

impl Line {
    fn end(&self) -> Pos {
        end_pos(&self.text, self.number)
    }
}

fn syntax(pos: Pos, message: impl Into<String>) -> ModelError {
    ModelError::Syntax {
        pos,
        message: message.into(),
    }
}

impl From<SyntaxError> for ModelError {
    fn from(e: SyntaxError) -> Self {
        syntax(e.pos, e.message)
    }
}

/// Parses and validates a model file.
pub fn parse_model(text: &str) -> Result<Model, ModelError> {
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let toks = tokenize(raw, i + 1).map_err(|e| syntax(e.pos, e.message))?;
        if !toks.is_empty() {
            lines.push(Line {
                number: i + 1,
                text: raw.to_string(),
                toks,
            });
        }
    }

    let mut species: Vec<String> = Vec::new();
    let mut initial: Vec<Option<i64>> = Vec::new();
    let mut parameters: Vec<Parameter> = Vec::new();
    let mut names: HashMap<String, Pos> = HashMap::new();
    let mut reaction_lines = Vec::new();

    for line in &lines {
        let mut cur = Cursor::new(&line.toks, line.end());
        let kw_pos = cur.pos();
        let keyword = match cur.next() {
            Some(Tok::Ident(k)) => k.as_str(),
            _ => return Err(syntax(kw_pos, "expected `species`, `param` or `reaction`")),
        };
        match keyword {
            "species" => {
                parse_declarations(&mut cur, &mut names, |name, value, pos| {
                    let count = match value {
                        None => None,
                        Some(v) if v >= 0.0 && v.fract() == 0.0 && v <= i64::MAX as f64 => Some(v as i64),
                        Some(v) => {
                            return Err(syntax(
                                pos,
                                format!("initial count of `{name}` must be a non-negative integer, got {v}"),
                            ))
                        }
                    };
                    species.push(name);
                    initial.push(count);
                    Ok(())
                })?;
            }
            "param" | "parameter" | "params" => {
                parse_declarations(&mut cur, &mut names, |name, value, pos| {
                    let default = value.ok_or_else(|| syntax(pos, format!("parameter `{name}` needs a value")))?;
                    parameters.push(Parameter { name, default });
                    Ok(())
                })?;
            }
            "reaction" => reaction_lines.push((line, cur.idx)),
            other => {
                return Err(syntax(
                    kw_pos,
                    format!("unknown declaration `{other}`; expected `species`, `param` or `reaction`"),
                ))
            }
        }
    }

    if species.is_empty() {
        return Err(syntax(end_pos(text, 1), "model declares no species"));
    }
    let initial_state = species
        .iter()
        .zip(&initial)
        .map(|(s, c)| c.ok_or_else(|| ModelError::MissingInitialState { species: s.clone() }))
        .collect::<Result<Vec<_>, _>>()?;

    let scope = Scope {
        species: &species,
        params: &parameters,
    };
    let mut reactions = Vec::new();
    for (line, start) in reaction_lines {
        let mut cur = Cursor::new(&line.toks, line.end());
        cur.idx = start;
        reactions.push(parse_reaction(&mut cur, &scope)?);
    }

    let model = Model {
        species,
        parameters,
        reactions,
        initial_state,
    };
    model.validate()?;
    Ok(model)
}

/// `name[=value] name[=value] ...`
fn parse_declarations(
    cur: &mut Cursor<'_>,
    names: &mut HashMap<String, Pos>,
    mut add: impl FnMut(String, Option<f64>, Pos) -> Result<(), ModelError>,
) -> Result<(), ModelError> {
    if cur.at_end() {
        return Err(syntax(cur.pos(), "expected at least one name"));
    }
    while !cur.at_end() {
        let pos = cur.pos();
        let name = match cur.next() {
            Some(Tok::Ident(n)) => n.clone(),
            _ => return Err(syntax(pos, "expected a name")),
        };
        if names.insert(name.clone(), pos).is_some() {
            return Err(ModelError::DuplicateName { name, pos });
        }
        let value = if cur.eat(&Tok::Eq) {
            let negative = cur.eat(&Tok::Minus);
            let vpos = cur.pos();
            match cur.next() {
                Some(Tok::Number(v)) => Some(if negative { -v } else { *v }),
                _ => return Err(syntax(vpos, format!("expected a number after `{name}=`"))),
            }
        } else {
            None
        };
        add(name, value, pos)?;
        cur.eat(&Tok::Comma);
    }
    Ok(())
}

struct Scope<'a> {
    species: &'a [String],
    params: &'a [Parameter],
}

fn parse_reaction(cur: &mut Cursor<'_>, scope: &Scope<'_>) -> Result<Reaction, ModelError> {
    let consumed = parse_side(cur, scope)?;
    if !cur.eat(&Tok::Arrow) {
        return Err(SyntaxError::expected(cur, "`->`").into());
    }
    let produced = parse_side(cur, scope)?;
    if !cur.eat(&Tok::At) {
        return Err(SyntaxError::expected(cur, "`@` followed by a rate expression").into());
    }
    let ast = parse_arith(cur)?;
    if !cur.at_end() {
        return Err(SyntaxError::expected(cur, "end of line").into());
    }
    let rate = resolve_rate(&ast, scope)?;
    Ok(Reaction {
        consumed,
        produced,
        rate,
    })
}

fn parse_side(cur: &mut Cursor<'_>, scope: &Scope<'_>) -> Result<Vec<u32>, ModelError> {
    let mut coeffs = vec![0u32; scope.species.len()];
    // empty side
    if matches!(cur.peek(), Some(Tok::Arrow) | Some(Tok::At)) {
        return Ok(coeffs);
    }
    if matches!(cur.peek(), Some(Tok::Number(x)) if *x == 0.0)
        && matches!(cur.peek_at(1), Some(Tok::Arrow) | Some(Tok::At))
    {
        cur.next();
        return Ok(coeffs);
    }
    loop {
        let pos = cur.pos();
        if cur.peek() == Some(&Tok::Minus) {
            return Err(ModelError::Stoichiometry {
                pos,
                message: "coefficients must be positive integers".into(),
            });
        }
        let coeff = match cur.peek() {
            Some(Tok::Number(x)) => {
                let x = *x;
                cur.next();
                if x < 1.0 || x.fract() != 0.0 || x > f64::from(u32::MAX) {
                    return Err(ModelError::Stoichiometry {
                        pos,
                        message: format!("coefficient {x} is not a positive integer"),
                    });
                }
                x as u32
            }
            _ => 1,
        };
        let name_pos = cur.pos();
        let name = match cur.next() {
            Some(Tok::Ident(n)) => n,
            _ => return Err(syntax(name_pos, "expected a species name")),
        };
        let idx = scope
            .species
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| ModelError::UndeclaredIdentifier {
                name: name.clone(),
                pos: name_pos,
            })?;
        coeffs[idx] = coeffs[idx]
            .checked_add(coeff)
            .ok_or_else(|| ModelError::Stoichiometry {
                pos,
                message: "coefficient overflow".into(),
            })?;
        if !cur.eat(&Tok::Plus) {
            return Ok(coeffs);
        }
    }
}

fn resolve_rate(ast: &ArithAst, scope: &Scope<'_>) -> Result<RateExpr, ModelError> {
    Ok(match ast {
        ArithAst::Num(x) => RateExpr::Num(*x),
        ArithAst::Ident(name, pos) => {
            if let Some(i) = scope.species.iter().position(|s| s == name) {
                RateExpr::Species(i)
            } else if let Some(i) = scope.params.iter().position(|p| &p.name == name) {
                RateExpr::Param(i)
            } else {
                return Err(ModelError::UndeclaredIdentifier {
                    name: name.clone(),
                    pos: *pos,
                });
            }
        }
        ArithAst::Neg(e) => RateExpr::Neg(Box::new(resolve_rate(e, scope)?)),
        ArithAst::Bin(op, a, b) => RateExpr::Binary(
            *op,
            Box::new(resolve_rate(a, scope)?),
            Box::new(resolve_rate(b, scope)?),
        ),
        ArithAst::Call(name, args, pos) => {
            let op = match name.as_str() {
                "min" => BinOp::Min,
                "max" => BinOp::Max,
                _ => {
                    return Err(syntax(
                        *pos,
                        format!("unknown function `{name}` (rates support min and max)"),
                    ))
                }
            };
            if args.len() != 2 {
                return Err(syntax(*pos, format!("`{name}` takes exactly two arguments")));
            }
            RateExpr::Binary(
                op,
                Box::new(resolve_rate(&args[0], scope)?),
                Box::new(resolve_rate(&args[1], scope)?),
            )
        }
    })
}
