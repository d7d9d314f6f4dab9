//! Property-file parser.
//!
//! ```text
//! formula := and ('|' and)*
//! and     := until ('&' until)*
//! until   := unary ('U' bounds until)?
//! unary   := '!' unary | 'F' bounds unary | 'G' bounds unary | primary
//! primary := 'tt' | 'true' | 'ff' | 'false' | arith cmp arith | '(' formula ')'
//! bounds  := '[' number ',' number ']'
//! ```
//!
//! Arithmetic inside atoms accepts species and parameter names, numeric
//! literals, `mean(X)`, `delta(X)`, `abs`, `min` and `max`.

use super::{Atom, CmpOp, Formula, FormulaError, SignalExpr, VarRef};
use crate::expr::{parse_arith, ArithAst, BinOp, SyntaxError};
use crate::lexer::{end_pos, tokenize, Cursor, Pos, Tok};

impl From<SyntaxError> for FormulaError {
    fn from(e: SyntaxError) -> Self {
        FormulaError::Syntax {
            pos: e.pos,
            message: e.message,
        }
    }
}

fn syntax(pos: Pos, message: impl Into<String>) -> FormulaError {
    FormulaError::Syntax {
        pos,
        message: message.into(),
    }
}

pub fn parse_formula(text: &str) -> Result<Formula, FormulaError> {
    let toks = tokenize(text, 1).map_err(|e| syntax(e.pos, e.message))?;
    let mut cur = Cursor::new(&toks, end_pos(text, 1));
    if cur.at_end() {
        return Err(syntax(cur.pos(), "empty formula"));
    }
    let f = parse_or(&mut cur)?;
    if !cur.at_end() {
        return Err(SyntaxError::expected(&cur, "end of formula").into());
    }
    Ok(f)
}

fn parse_or(cur: &mut Cursor<'_>) -> Result<Formula, FormulaError> {
    let mut lhs = parse_and(cur)?;
    while cur.eat(&Tok::Pipe) {
        let rhs = parse_and(cur)?;
        lhs = Formula::or(lhs, rhs);
    }
    Ok(lhs)
}

fn parse_and(cur: &mut Cursor<'_>) -> Result<Formula, FormulaError> {
    let mut lhs = parse_until(cur)?;
    while cur.eat(&Tok::Amp) {
        let rhs = parse_until(cur)?;
        lhs = Formula::and(lhs, rhs);
    }
    Ok(lhs)
}

fn parse_until(cur: &mut Cursor<'_>) -> Result<Formula, FormulaError> {
    let lhs = parse_unary(cur)?;
    if is_temporal(cur, "U") {
        cur.next();
        let (lo, hi) = parse_bounds(cur)?;
        let rhs = parse_until(cur)?;
        return Ok(Formula::until(lo, hi, lhs, rhs));
    }
    Ok(lhs)
}

fn is_temporal(cur: &Cursor<'_>, keyword: &str) -> bool {
    matches!(cur.peek(), Some(Tok::Ident(k)) if k == keyword) && cur.peek_at(1) == Some(&Tok::LBracket)
}

fn parse_unary(cur: &mut Cursor<'_>) -> Result<Formula, FormulaError> {
    if cur.eat(&Tok::Bang) {
        return Ok(Formula::not(parse_unary(cur)?));
    }
    for (kw, always) in [("F", false), ("G", true)] {
        if is_temporal(cur, kw) {
            cur.next();
            let (lo, hi) = parse_bounds(cur)?;
            let inner = parse_unary(cur)?;
            return Ok(if always {
                Formula::always(lo, hi, inner)
            } else {
                Formula::eventually(lo, hi, inner)
            });
        }
    }
    parse_primary(cur)
}

fn parse_bounds(cur: &mut Cursor<'_>) -> Result<(f64, f64), FormulaError> {
    let pos = cur.pos();
    if !cur.eat(&Tok::LBracket) {
        return Err(SyntaxError::expected(cur, "`[`").into());
    }
    let lo = parse_bound(cur)?;
    if !cur.eat(&Tok::Comma) {
        return Err(SyntaxError::expected(cur, "`,`").into());
    }
    let hi = parse_bound(cur)?;
    if !cur.eat(&Tok::RBracket) {
        return Err(SyntaxError::expected(cur, "`]`").into());
    }
    if lo > hi {
        return Err(FormulaError::BoundOrder { lo, hi, pos });
    }
    Ok((lo, hi))
}

fn parse_bound(cur: &mut Cursor<'_>) -> Result<f64, FormulaError> {
    let pos = cur.pos();
    let negative = cur.eat(&Tok::Minus);
    match cur.next() {
        Some(Tok::Number(x)) if negative && *x != 0.0 => Err(FormulaError::NegativeBound { pos }),
        Some(Tok::Number(x)) if x.is_finite() => Ok(*x),
        Some(Tok::Number(_)) => Err(FormulaError::InfiniteBound { pos }),
        _ => Err(syntax(pos, "expected a numeric time bound")),
    }
}

fn parse_primary(cur: &mut Cursor<'_>) -> Result<Formula, FormulaError> {
    if let Some(Tok::Ident(k)) = cur.peek() {
        let constant = match k.as_str() {
            "tt" | "true" => Some(Formula::True),
            "ff" | "false" => Some(Formula::not(Formula::True)),
            _ => None,
        };
        if let Some(f) = constant {
            cur.next();
            return Ok(f);
        }
    }

    // A parenthesis may open either an arithmetic term or a sub-formula, so
    // try the comparison first and fall back. On failure report whichever
    // attempt got further.
    let start = cur.idx;
    let compare_err = match parse_comparison(cur) {
        Ok(f) => return Ok(f),
        Err(e) => e,
    };
    cur.idx = start;
    if !cur.eat(&Tok::LParen) {
        return Err(compare_err);
    }
    let nested = parse_or(cur).and_then(|inner| {
        if cur.eat(&Tok::RParen) {
            Ok(inner)
        } else {
            Err(SyntaxError::expected(cur, "`)`").into())
        }
    });
    nested.map_err(|e| furthest(e, compare_err))
}

fn furthest(a: FormulaError, b: FormulaError) -> FormulaError {
    let key = |e: &FormulaError| match e {
        FormulaError::Syntax { pos, .. } => Some((pos.line, pos.col)),
        _ => None,
    };
    match (key(&a), key(&b)) {
        (Some(ka), Some(kb)) if kb > ka => b,
        _ => a,
    }
}

fn parse_comparison(cur: &mut Cursor<'_>) -> Result<Formula, FormulaError> {
    let lhs = parse_arith(cur)?;
    let op = match cur.peek() {
        Some(Tok::Lt) => CmpOp::Lt,
        Some(Tok::Le) => CmpOp::Le,
        Some(Tok::Gt) => CmpOp::Gt,
        Some(Tok::Ge) => CmpOp::Ge,
        Some(Tok::Eq) => CmpOp::Eq,
        _ => return Err(SyntaxError::expected(cur, "a comparison operator").into()),
    };
    cur.next();
    let rhs = parse_arith(cur)?;
    Ok(Formula::Atom(Atom {
        lhs: to_signal(lhs)?,
        op,
        rhs: to_signal(rhs)?,
    }))
}

fn to_signal(ast: ArithAst) -> Result<SignalExpr<VarRef>, FormulaError> {
    Ok(match ast {
        ArithAst::Num(x) => SignalExpr::Num(x),
        ArithAst::Ident(name, _) => SignalExpr::Var(VarRef::Name(name)),
        ArithAst::Neg(e) => SignalExpr::Neg(Box::new(to_signal(*e)?)),
        ArithAst::Bin(op, a, b) => SignalExpr::Binary(op, Box::new(to_signal(*a)?), Box::new(to_signal(*b)?)),
        ArithAst::Call(name, args, pos) => {
            let arity = |n: usize| {
                if args.len() == n {
                    Ok(())
                } else {
                    Err(syntax(
                        pos,
                        format!("`{name}` takes {n} argument(s), got {}", args.len()),
                    ))
                }
            };
            match name.as_str() {
                "mean" | "delta" => {
                    arity(1)?;
                    let species = match &args[0] {
                        ArithAst::Ident(s, _) => s.clone(),
                        _ => return Err(syntax(pos, format!("`{name}` takes a species name"))),
                    };
                    SignalExpr::Var(if name == "mean" {
                        VarRef::Mean(species)
                    } else {
                        VarRef::Delta(species)
                    })
                }
                "abs" => {
                    arity(1)?;
                    let arg = args.into_iter().next().expect("one argument");
                    SignalExpr::Abs(Box::new(to_signal(arg)?))
                }
                "min" | "max" => {
                    arity(2)?;
                    let op = if name == "min" { BinOp::Min } else { BinOp::Max };
                    let mut it = args.into_iter();
                    let a = to_signal(it.next().expect("two arguments"))?;
                    let b = to_signal(it.next().expect("two arguments"))?;
                    SignalExpr::Binary(op, Box::new(a), Box::new(b))
                }
                _ => {
                    return Err(syntax(
                        pos,
                        format!("unknown function `{name}`; expected mean, delta, abs, min or max"),
                    ))
                }
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(name: &str, op: CmpOp, x: f64) -> Formula {
        Formula::Atom(Atom {
            lhs: SignalExpr::Var(VarRef::Name(name.into())),
            op,
            rhs: SignalExpr::Num(x),
        })
    }

    #[test]
    fn parses_always_with_parenthesized_atom() {
        let f = parse_formula("G[0,1] (N < 4)").unwrap();
        assert_eq!(f, Formula::always(0.0, 1.0, atom("N", CmpOp::Lt, 4.0)));
    }

    #[test]
    fn parses_extinction_conjunction() {
        let f = parse_formula("(F[100,120] I = 0) & (G[0,100] I > 0)").unwrap();
        let want = Formula::and(
            Formula::eventually(100.0, 120.0, atom("I", CmpOp::Eq, 0.0)),
            Formula::always(0.0, 100.0, atom("I", CmpOp::Gt, 0.0)),
        );
        assert_eq!(f, want);
        // parentheses are optional: temporal prefixes bind tighter than `&`
        assert_eq!(parse_formula("F[100,120] I == 0 && G[0,100] I > 0").unwrap(), want);
    }

    #[test]
    fn parses_burst_formula() {
        let f = parse_formula("F[16000,21000] ( delta(LacZ) > 0 & G[10,2000] delta(LacZ) <= 0 )").unwrap();
        let delta = |op, x| {
            Formula::Atom(Atom {
                lhs: SignalExpr::Var(VarRef::Delta("LacZ".into())),
                op,
                rhs: SignalExpr::Num(x),
            })
        };
        let want = Formula::eventually(
            16000.0,
            21000.0,
            Formula::and(
                delta(CmpOp::Gt, 0.0),
                Formula::always(10.0, 2000.0, delta(CmpOp::Le, 0.0)),
            ),
        );
        assert_eq!(f, want);
    }

    #[test]
    fn arithmetic_parentheses_are_not_subformulas() {
        let f = parse_formula("(X + 1) * 2 >= mean(X)").unwrap();
        assert!(matches!(f, Formula::Atom(Atom { op: CmpOp::Ge, .. })));
        let f = parse_formula("((X > 1))").unwrap();
        assert_eq!(f, atom("X", CmpOp::Gt, 1.0));
    }

    #[test]
    fn or_desugars() {
        let f = parse_formula("a > 1 | b > 2").unwrap();
        assert_eq!(f, Formula::or(atom("a", CmpOp::Gt, 1.0), atom("b", CmpOp::Gt, 2.0)));
    }

    #[test]
    fn until_is_right_associative() {
        let f = parse_formula("a > 0 U[0,1] b > 0 U[1,2] c > 0").unwrap();
        let want = Formula::until(
            0.0,
            1.0,
            atom("a", CmpOp::Gt, 0.0),
            Formula::until(1.0, 2.0, atom("b", CmpOp::Gt, 0.0), atom("c", CmpOp::Gt, 0.0)),
        );
        assert_eq!(f, want);
    }

    #[test]
    fn rejects_bad_bounds() {
        assert!(matches!(
            parse_formula("G[1,0] tt"),
            Err(FormulaError::BoundOrder { .. })
        ));
        assert!(matches!(
            parse_formula("F[-1,2] tt"),
            Err(FormulaError::NegativeBound { .. })
        ));
        assert!(parse_formula("F[0,-0] tt").is_ok());
    }

    #[test]
    fn syntax_errors_carry_positions() {
        match parse_formula("G[0,1] (N <") {
            Err(FormulaError::Syntax { pos, .. }) => assert_eq!(pos.col, 12),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_formula(""), Err(FormulaError::Syntax { .. })));
        assert!(matches!(parse_formula("N < 4 )"), Err(FormulaError::Syntax { .. })));
        assert!(matches!(parse_formula("foo(N) < 4"), Err(FormulaError::Syntax { .. })));
        assert!(matches!(
            parse_formula("mean(N + 1) < 4"),
            Err(FormulaError::Syntax { .. })
        ));
    }
}
