//! Brute-force MiTL semantics used as an oracle for the interval monitor.
//!
//! Formulas are generated as their own small AST and rendered to text, so the
//! monitor side goes through the real parser. All jump times and temporal
//! bounds are multiples of 1/2, which makes every truth value piecewise
//! constant between half-grid points; sampling on the quarter grid therefore
//! visits every critical point and one interior point of every open piece.

#![allow(dead_code)]

use rand::Rng;
use smoothck::model::{parse_model, Model};
use smoothck::ssa::Trajectory;

pub const MODEL: &str = "species X=0 Y=0\nparam p=1\nreaction X -> Y @ p*X\n";

pub fn model() -> Model {
    parse_model(MODEL).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cmp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

impl Cmp {
    fn apply(self, a: f64, b: f64) -> bool {
        match self {
            Cmp::Lt => a < b,
            Cmp::Le => a <= b,
            Cmp::Gt => a > b,
            Cmp::Ge => a >= b,
            Cmp::Eq => a == b,
        }
    }

    fn text(self) -> &'static str {
        match self {
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Gt => ">",
            Cmp::Ge => ">=",
            Cmp::Eq => "==",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    X,
    Y,
    P,
    DeltaX,
    DeltaY,
    Sum(Box<Term>, Box<Term>),
    Diff(Box<Term>, Box<Term>),
    Scale(i64, Box<Term>),
    Abs(Box<Term>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prop {
    True,
    Atom(Term, Cmp, i64),
    Not(Box<Prop>),
    And(Box<Prop>, Box<Prop>),
    Or(Box<Prop>, Box<Prop>),
    F(f64, f64, Box<Prop>),
    G(f64, f64, Box<Prop>),
    U(f64, f64, Box<Prop>, Box<Prop>),
}

impl Term {
    pub fn text(&self) -> String {
        match self {
            Term::X => "X".into(),
            Term::Y => "Y".into(),
            Term::P => "p".into(),
            Term::DeltaX => "delta(X)".into(),
            Term::DeltaY => "delta(Y)".into(),
            Term::Sum(a, b) => format!("({} + {})", a.text(), b.text()),
            Term::Diff(a, b) => format!("({} - {})", a.text(), b.text()),
            Term::Scale(k, a) => format!("{k} * {}", a.text()),
            Term::Abs(a) => format!("abs({})", a.text()),
        }
    }
}

impl Prop {
    pub fn text(&self) -> String {
        match self {
            Prop::True => "tt".into(),
            Prop::Atom(t, c, k) => format!("{} {} {k}", t.text(), c.text()),
            Prop::Not(a) => format!("!({})", a.text()),
            Prop::And(a, b) => format!("({}) & ({})", a.text(), b.text()),
            Prop::Or(a, b) => format!("({}) | ({})", a.text(), b.text()),
            Prop::F(a, b, f) => format!("F[{a},{b}] ({})", f.text()),
            Prop::G(a, b, f) => format!("G[{a},{b}] ({})", f.text()),
            Prop::U(a, b, l, r) => format!("({}) U[{a},{b}] ({})", l.text(), r.text()),
        }
    }

    pub fn horizon(&self) -> f64 {
        match self {
            Prop::True | Prop::Atom(..) => 0.0,
            Prop::Not(a) => a.horizon(),
            Prop::And(a, b) | Prop::Or(a, b) => a.horizon().max(b.horizon()),
            Prop::F(_, b, f) | Prop::G(_, b, f) => b + f.horizon(),
            Prop::U(_, b, l, r) => b + l.horizon().max(r.horizon()),
        }
    }
}

/// Trajectory over species `(X, Y)` with a parameter value `p`.
pub struct Path {
    pub times: Vec<f64>,
    pub states: Vec<[i64; 2]>,
    pub horizon: f64,
    pub p: f64,
}

impl Path {
    fn segment(&self, t: f64) -> usize {
        self.times.iter().filter(|&&tj| tj <= t).count()
    }

    fn delta(&self, t: f64, k: usize) -> f64 {
        match self.times.iter().position(|&tj| tj == t) {
            Some(j) => (self.states[j + 1][k] - self.states[j][k]) as f64,
            None => 0.0,
        }
    }

    fn term(&self, term: &Term, t: f64) -> f64 {
        let s = self.states[self.segment(t)];
        match term {
            Term::X => s[0] as f64,
            Term::Y => s[1] as f64,
            Term::P => self.p,
            Term::DeltaX => self.delta(t, 0),
            Term::DeltaY => self.delta(t, 1),
            Term::Sum(a, b) => self.term(a, t) + self.term(b, t),
            Term::Diff(a, b) => self.term(a, t) - self.term(b, t),
            Term::Scale(k, a) => *k as f64 * self.term(a, t),
            Term::Abs(a) => self.term(a, t).abs(),
        }
    }

    pub fn to_trajectory(&self) -> Trajectory {
        let states = self.states.iter().map(|s| s.to_vec()).collect();
        Trajectory::from_parts(self.times.clone(), states, self.horizon).unwrap()
    }
}

/// Quarter-grid points of `[lo, hi]`, both ends being quarter multiples.
fn quarter_points(lo: f64, hi: f64) -> impl Iterator<Item = f64> {
    let (a, b) = ((lo * 4.0).round() as i64, (hi * 4.0).round() as i64);
    (a..=b).map(|k| k as f64 / 4.0)
}

/// Truth of `prop` at time `t` by exhaustive search over the quarter grid.
pub fn holds(prop: &Prop, path: &Path, t: f64) -> bool {
    match prop {
        Prop::True => true,
        Prop::Atom(term, c, k) => c.apply(path.term(term, t), *k as f64),
        Prop::Not(a) => !holds(a, path, t),
        Prop::And(a, b) => holds(a, path, t) && holds(b, path, t),
        Prop::Or(a, b) => holds(a, path, t) || holds(b, path, t),
        Prop::F(a, b, f) => quarter_points(t + a, t + b).any(|s| holds(f, path, s)),
        Prop::G(a, b, f) => quarter_points(t + a, t + b).all(|s| holds(f, path, s)),
        Prop::U(a, b, l, r) => {
            quarter_points(t + a, t + b).any(|s| holds(r, path, s) && quarter_points(t, s).all(|u| holds(l, path, u)))
        }
    }
}

fn bound_pair(rng: &mut impl Rng) -> (f64, f64) {
    let a = rng.random_range(0..=3) as f64 / 2.0;
    let b = a + rng.random_range(0..=3) as f64 / 2.0;
    (a, b)
}

fn random_term(rng: &mut impl Rng, depth: usize) -> Term {
    let leaf = |rng: &mut dyn rand::RngCore| match rng.random_range(0..5) {
        0 => Term::X,
        1 => Term::Y,
        2 => Term::P,
        3 => Term::DeltaX,
        _ => Term::DeltaY,
    };
    if depth == 0 || rng.random_bool(0.5) {
        return leaf(rng);
    }
    let a = Box::new(random_term(rng, depth - 1));
    match rng.random_range(0..4) {
        0 => Term::Sum(a, Box::new(random_term(rng, depth - 1))),
        1 => Term::Diff(a, Box::new(random_term(rng, depth - 1))),
        2 => Term::Scale(rng.random_range(-2..=3), a),
        _ => Term::Abs(a),
    }
}

fn random_atom(rng: &mut impl Rng) -> Prop {
    if rng.random_range(0..12) == 0 {
        return Prop::True;
    }
    let cmp = [Cmp::Lt, Cmp::Le, Cmp::Gt, Cmp::Ge, Cmp::Eq][rng.random_range(0..5)];
    Prop::Atom(random_term(rng, 1), cmp, rng.random_range(-1..=4))
}

/// Random formula of temporal/boolean nesting depth at most `depth`.
pub fn random_prop(rng: &mut impl Rng, depth: usize) -> Prop {
    if depth == 0 || rng.random_range(0..4) == 0 {
        return random_atom(rng);
    }
    let sub = |rng: &mut _| Box::new(random_prop(rng, depth - 1));
    match rng.random_range(0..6) {
        0 => Prop::Not(sub(rng)),
        1 => Prop::And(sub(rng), sub(rng)),
        2 => Prop::Or(sub(rng), sub(rng)),
        3 => {
            let (a, b) = bound_pair(rng);
            Prop::F(a, b, sub(rng))
        }
        4 => {
            let (a, b) = bound_pair(rng);
            Prop::G(a, b, sub(rng))
        }
        _ => {
            let (a, b) = bound_pair(rng);
            Prop::U(a, b, sub(rng), sub(rng))
        }
    }
}

/// Random path with at most `max_jumps` jumps at distinct half-grid times
/// in `(0, horizon]`.
pub fn random_path(rng: &mut impl Rng, horizon: f64, max_jumps: usize) -> Path {
    let slots = (horizon * 2.0).round() as usize;
    let n = rng.random_range(0..=max_jumps.min(slots));
    let mut picks: Vec<usize> = rand::seq::index::sample(rng, slots, n).into_vec();
    picks.sort_unstable();
    let times: Vec<f64> = picks.into_iter().map(|k| (k + 1) as f64 / 2.0).collect();
    let mut s = [rng.random_range(0..4), rng.random_range(0..4)];
    let mut states = vec![s];
    for _ in &times {
        let k = rng.random_range(0..2);
        s[k] = (s[k] + rng.random_range(-2..=2)).max(0);
        states.push(s);
    }
    Path {
        times,
        states,
        horizon,
        p: rng.random_range(0..=3) as f64,
    }
}

/// Random formula and a path long enough to decide it.
pub fn random_case(rng: &mut impl Rng) -> (Prop, Path) {
    let prop = random_prop(rng, 3);
    let horizon = prop.horizon() + rng.random_range(0..=10) as f64 / 2.0 + 1.0;
    let path = random_path(rng, horizon, 20);
    (prop, path)
}

/// Quarter-grid times in `[0, horizon - formula horizon]`.
pub fn check_times(prop: &Prop, path: &Path) -> Vec<f64> {
    quarter_points(0.0, path.horizon - prop.horizon()).collect()
}
