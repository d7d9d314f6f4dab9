//! Exact monitoring by satisfaction-set computation.
//!
//! Every subformula is mapped to the set of times in `[0, T]` at which it
//! holds. Atoms are read off the trajectory segment by segment, boolean
//! connectives become set operations, and the temporal operators become
//! shifts of those sets. The result is exact for piecewise-constant signals;
//! atoms mixing the trajectory with a mean signal are solved by root finding
//! between mean-grid points.

use thiserror::Error;

use super::{Atom, BoundFormula, BoundRef, Formula, Interval, IntervalSet};
use crate::ssa::{MeanSignal, Trajectory};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonitorError {
    #[error("trajectory horizon {available} is shorter than the formula horizon {needed}")]
    HorizonTooShort { needed: f64, available: f64 },
    #[error("formula reads mean({0}) but no mean signal for it was supplied")]
    MissingMeanSignal(String),
    #[error("formula does not match the trajectory: {0}")]
    Mismatch(String),
}

/// Signals a formula is evaluated against.
#[derive(Debug, Clone, Copy)]
pub struct SignalContext<'a> {
    pub trajectory: &'a Trajectory,
    pub params: &'a [f64],
    pub mean: Option<&'a MeanSignal>,
}

impl<'a> SignalContext<'a> {
    pub fn new(trajectory: &'a Trajectory, params: &'a [f64]) -> Self {
        SignalContext {
            trajectory,
            params,
            mean: None,
        }
    }

    pub fn with_mean(mut self, mean: &'a MeanSignal) -> Self {
        self.mean = Some(mean);
        self
    }
}

/// Set of times in `[0, T - horizon(f)]` at which `f` holds.
pub fn sat_intervals(f: &BoundFormula, ctx: &SignalContext<'_>) -> Result<IntervalSet, MonitorError> {
    let end = ctx.trajectory.horizon();
    let needed = f.horizon();
    if end < needed {
        return Err(MonitorError::HorizonTooShort { needed, available: end });
    }
    let eval = Evaluator::new(f, ctx)?;
    Ok(eval.sat(f).clip(end - needed))
}

/// Truth of `f` at time 0.
pub fn monitor(f: &BoundFormula, ctx: &SignalContext<'_>) -> Result<bool, MonitorError> {
    Ok(sat_intervals(f, ctx)?.contains(0.0))
}

/// Samples per open piece when locating sign changes of a mean-dependent atom.
const ROOT_SAMPLES: usize = 32;

struct Evaluator<'a> {
    tr: &'a Trajectory,
    params: &'a [f64],
    mean: Option<&'a MeanSignal>,
    /// `(species name, track index)` for every mean reference.
    tracks: Vec<(String, usize)>,
    end: f64,
}

/// Where an atom is being evaluated: the segment whose state is in force,
/// whether the instant is the jump that opened it, and the time.
#[derive(Clone, Copy)]
struct At {
    segment: usize,
    on_jump: bool,
    t: f64,
}

impl<'a> Evaluator<'a> {
    fn new(f: &BoundFormula, ctx: &SignalContext<'a>) -> Result<Self, MonitorError> {
        let tr = ctx.trajectory;
        let mut problem = None;
        f.visit_refs(&mut |r| {
            let bad = match r {
                BoundRef::Species(i) | BoundRef::Delta(i) => {
                    (*i >= tr.n_species()).then(|| format!("species #{i} is not in the trajectory"))
                }
                BoundRef::Param(i) => {
                    (*i >= ctx.params.len()).then(|| format!("parameter #{i} is not in the parameter vector"))
                }
                BoundRef::Mean(_) => None,
            };
            if problem.is_none() {
                problem = bad;
            }
        });
        if let Some(p) = problem {
            return Err(MonitorError::Mismatch(p));
        }
        let mut tracks = Vec::new();
        for s in f.mean_species() {
            let idx = ctx
                .mean
                .and_then(|m| m.track_index(&s))
                .ok_or_else(|| MonitorError::MissingMeanSignal(s.clone()))?;
            tracks.push((s, idx));
        }
        Ok(Evaluator {
            tr,
            params: ctx.params,
            mean: ctx.mean,
            tracks,
            end: tr.horizon(),
        })
    }

    fn sat(&self, f: &BoundFormula) -> IntervalSet {
        let end = self.end;
        match f {
            Formula::True => IntervalSet::from_interval(Interval::closed(0.0, end)),
            Formula::Atom(a) => self.atom_set(a),
            Formula::Not(g) => self.sat(g).complement(end),
            Formula::And(a, b) => self.sat(a).intersect(&self.sat(b)),
            Formula::Until { lo, hi, left, right } => self.sat(left).until(&self.sat(right), *lo, *hi, end),
            Formula::Eventually { lo, hi, inner } => self.sat(inner).back_shift(*lo, *hi, end),
            Formula::Always { lo, hi, inner } => self.sat(inner).erode(*lo, *hi, end),
        }
    }

    fn lookup(&self, r: &BoundRef, at: At) -> f64 {
        match r {
            BoundRef::Species(i) => self.tr.state(at.segment)[*i] as f64,
            BoundRef::Param(i) => self.params[*i],
            BoundRef::Delta(i) => {
                if at.on_jump && at.segment > 0 {
                    (self.tr.state(at.segment)[*i] - self.tr.state(at.segment - 1)[*i]) as f64
                } else {
                    0.0
                }
            }
            BoundRef::Mean(s) => {
                let track = self
                    .tracks
                    .iter()
                    .find(|(name, _)| name == s)
                    .map(|(_, k)| *k)
                    .expect("mean tracks resolved up front");
                self.mean.expect("mean signal checked up front").value_at(track, at.t)
            }
        }
    }

    fn sides(&self, atom: &Atom<BoundRef>, at: At) -> (f64, f64) {
        let look = |r: &BoundRef| self.lookup(r, at);
        (atom.lhs.eval(&look), atom.rhs.eval(&look))
    }

    fn holds(&self, atom: &Atom<BoundRef>, at: At) -> bool {
        let (l, r) = self.sides(atom, at);
        atom.op.holds(l, r)
    }

    fn atom_set(&self, atom: &Atom<BoundRef>) -> IntervalSet {
        let mut uses_delta = false;
        let mut uses_mean = false;
        let mut note = |r: &BoundRef| match r {
            BoundRef::Delta(_) => uses_delta = true,
            BoundRef::Mean(_) => uses_mean = true,
            _ => {}
        };
        atom.lhs.visit(&mut note);
        atom.rhs.visit(&mut note);

        let times = self.tr.jump_times();
        let k = times.len();
        let mut out = Vec::with_capacity(2 * (k + 1));
        for j in 0..=k {
            let start = if j == 0 { 0.0 } else { times[j - 1] };
            let stop = if j == k { self.end } else { times[j] };
            let last = j == k;
            if !uses_delta && !uses_mean {
                // the atom is constant while the state is
                let at = At {
                    segment: j,
                    on_jump: false,
                    t: start,
                };
                if self.holds(atom, at) {
                    out.push(Interval {
                        lo: start,
                        hi: stop,
                        lo_closed: true,
                        hi_closed: last,
                    });
                }
                continue;
            }
            let at_start = At {
                segment: j,
                on_jump: true,
                t: start,
            };
            if self.holds(atom, at_start) {
                out.push(Interval::point(start));
            }
            if stop > start {
                if uses_mean {
                    self.mean_pieces(atom, j, start, stop, &mut out);
                } else if self.holds(
                    atom,
                    At {
                        on_jump: false,
                        ..at_start
                    },
                ) {
                    out.push(Interval::open(start, stop));
                }
                if last
                    && self.holds(
                        atom,
                        At {
                            segment: j,
                            on_jump: false,
                            t: stop,
                        },
                    )
                {
                    out.push(Interval::point(stop));
                }
            }
        }
        IntervalSet::normalize(out)
    }

    /// Truth set of a mean-dependent atom on the open piece `(a, b)` of segment `j`.
    fn mean_pieces(&self, atom: &Atom<BoundRef>, j: usize, a: f64, b: f64, out: &mut Vec<Interval>) {
        let grid = self.mean.map(|m| m.grid()).unwrap_or(&[]);
        let first = grid.partition_point(|&g| g <= a);
        let mut cuts = vec![a];
        cuts.extend(grid[first..].iter().copied().take_while(|&g| g < b));
        cuts.push(b);
        for (i, w) in cuts.windows(2).enumerate() {
            if i > 0 {
                let at = At {
                    segment: j,
                    on_jump: false,
                    t: w[0],
                };
                if self.holds(atom, at) {
                    out.push(Interval::point(w[0]));
                }
            }
            self.solve_open(atom, j, w[0], w[1], out);
        }
    }

    /// Within `(a, b)` the mean is linear and the state fixed. The sign of
    /// `lhs - rhs` is located by sampling plus bisection, and each piece
    /// between consecutive roots is classified at its midpoint.
    fn solve_open(&self, atom: &Atom<BoundRef>, j: usize, a: f64, b: f64, out: &mut Vec<Interval>) {
        let at = |t| At {
            segment: j,
            on_jump: false,
            t,
        };
        let diff = |t: f64| {
            let (l, r) = self.sides(atom, at(t));
            l - r
        };
        let samples: Vec<f64> = (0..=ROOT_SAMPLES)
            .map(|i| {
                if i == ROOT_SAMPLES {
                    b
                } else {
                    a + (b - a) * i as f64 / ROOT_SAMPLES as f64
                }
            })
            .collect();
        let values: Vec<f64> = samples.iter().map(|&t| diff(t)).collect();

        let mut roots = Vec::new();
        for i in 0..ROOT_SAMPLES {
            let (x0, x1) = (samples[i], samples[i + 1]);
            let (d0, d1) = (values[i], values[i + 1]);
            if i > 0 && d0 == 0.0 {
                roots.push(x0);
            } else if d0 * d1 < 0.0 {
                roots.push(bisect(&diff, x0, x1, d0));
            }
        }
        roots.dedup();

        let at_root = atom.op.holds(0.0, 0.0);
        let mut lo = a;
        for &r in roots.iter().chain(std::iter::once(&b)) {
            if r > lo && self.holds(atom, at(0.5 * (lo + r))) {
                out.push(Interval::open(lo, r));
            }
            if r < b && at_root {
                out.push(Interval::point(r));
            }
            lo = r;
        }
    }
}

fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, f_lo: f64) -> f64 {
    let lo_negative = f_lo < 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if v == 0.0 {
            return mid;
        }
        if (v < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mitl::parse_formula;
    use crate::model::parse_model;

    fn model() -> crate::model::Model {
        parse_model("species N=0 A=0 B=0\nparam mu=1\nreaction 0 -> N @ mu").unwrap()
    }

    fn bound(s: &str) -> BoundFormula {
        parse_formula(s).unwrap().bind(&model()).unwrap()
    }

    fn traj(times: &[f64], states: &[[i64; 3]], end: f64) -> Trajectory {
        Trajectory::from_parts(times.to_vec(), states.iter().map(|s| s.to_vec()).collect(), end).unwrap()
    }

    const P: [f64; 1] = [1.0];

    #[test]
    fn constant_trajectory_satisfies_everywhere() {
        let tr = traj(&[], &[[3, 0, 0]], 2.0);
        let s = sat_intervals(&bound("N < 4"), &SignalContext::new(&tr, &P)).unwrap();
        assert_eq!(s.intervals(), &[Interval::closed(0.0, 2.0)]);
    }

    #[test]
    fn jump_breaks_the_always() {
        let tr = traj(&[0.5], &[[3, 0, 0], [4, 0, 0]], 2.0);
        let ctx = SignalContext::new(&tr, &P);
        let s = sat_intervals(&bound("G[0,1] (N < 4)"), &ctx).unwrap();
        assert!(!s.contains(0.0));
        assert!(!monitor(&bound("G[0,1] (N < 4)"), &ctx).unwrap());
        assert!(monitor(&bound("F[0,1] (N = 4)"), &ctx).unwrap());
    }

    #[test]
    fn until_finds_interior_witness() {
        // A on [0,1), B on [0.8,1.2]
        let tr = traj(&[0.8, 1.0, 1.2], &[[0, 1, 0], [0, 1, 1], [0, 0, 1], [0, 0, 0]], 3.0);
        let ctx = SignalContext::new(&tr, &P);
        let f = bound("A > 0 U[0.5,1] B > 0");
        assert!(monitor(&f, &ctx).unwrap());
        let s = sat_intervals(&f, &ctx).unwrap();
        assert_eq!(s.intervals(), &[Interval::closed_open(0.0, 0.5)]);
    }

    #[test]
    fn constants() {
        let tr = traj(&[], &[[0, 0, 0]], 1.0);
        let ctx = SignalContext::new(&tr, &P);
        assert!(monitor(&bound("tt"), &ctx).unwrap());
        assert!(!monitor(&bound("!tt"), &ctx).unwrap());
        assert!(!monitor(&bound("ff"), &ctx).unwrap());
    }

    #[test]
    fn delta_holds_only_on_jumps() {
        let tr = traj(&[1.0, 2.0], &[[0, 0, 0], [1, 0, 0], [0, 0, 0]], 3.0);
        let ctx = SignalContext::new(&tr, &P);
        let up = sat_intervals(&bound("delta(N) > 0"), &ctx).unwrap();
        assert_eq!(up.intervals(), &[Interval::point(1.0)]);
        let down = sat_intervals(&bound("delta(N) < 0"), &ctx).unwrap();
        assert_eq!(down.intervals(), &[Interval::point(2.0)]);
        let flat = sat_intervals(&bound("delta(N) = 0"), &ctx).unwrap();
        assert_eq!(flat.intervals().len(), 3);
        assert!(!flat.contains(1.0) && flat.contains(1.5) && flat.contains(3.0));
        // a burst: production followed by at least 0.5 time units without one
        assert!(monitor(&bound("F[0,1.5] (delta(N) > 0 & G[0.1,0.5] delta(N) <= 0)"), &ctx).unwrap());
    }

    #[test]
    fn mean_atoms_are_solved_between_grid_points() {
        let tr = traj(&[], &[[2, 0, 0]], 4.0);
        // mean rises linearly from 0 to 4; N = 2 crosses it at t = 2
        let mean = MeanSignal::new(vec![0.0, 4.0], "N", vec![0.0, 4.0]).unwrap();
        let ctx = SignalContext::new(&tr, &P).with_mean(&mean);
        let s = sat_intervals(&bound("N > mean(N)"), &ctx).unwrap();
        assert_eq!(s.intervals().len(), 1);
        let i = s.intervals()[0];
        assert_eq!((i.lo, i.lo_closed, i.hi_closed), (0.0, true, false));
        assert!((i.hi - 2.0).abs() < 1e-12);
        let s = sat_intervals(&bound("abs(N - mean(N)) <= 0.5"), &ctx).unwrap();
        let i = s.intervals()[0];
        assert!((i.lo - 1.5).abs() < 1e-12 && (i.hi - 2.5).abs() < 1e-12);
        assert!(i.lo_closed && i.hi_closed);
    }

    #[test]
    fn errors() {
        let tr = traj(&[], &[[0, 0, 0]], 1.0);
        let ctx = SignalContext::new(&tr, &P);
        assert_eq!(
            monitor(&bound("F[0,2] N > 0"), &ctx),
            Err(MonitorError::HorizonTooShort {
                needed: 2.0,
                available: 1.0
            })
        );
        assert_eq!(
            monitor(&bound("N < mean(N)"), &ctx),
            Err(MonitorError::MissingMeanSignal("N".into()))
        );
        assert!(matches!(
            monitor(&bound("N < mu"), &SignalContext::new(&tr, &[])),
            Err(MonitorError::Mismatch(_))
        ));
    }

    #[test]
    fn result_is_limited_to_decidable_times() {
        let tr = traj(&[], &[[0, 0, 0]], 10.0);
        let s = sat_intervals(&bound("G[0,4] N = 0"), &SignalContext::new(&tr, &P)).unwrap();
        assert_eq!(s.intervals(), &[Interval::closed(0.0, 6.0)]);
    }
}
