//! Finite unions of real intervals with explicit endpoint inclusivity.

use std::cmp::Ordering;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Interval {
            lo,
            hi,
            lo_closed: true,
            hi_closed: true,
        }
    }

    pub fn open(lo: f64, hi: f64) -> Self {
        Interval {
            lo,
            hi,
            lo_closed: false,
            hi_closed: false,
        }
    }

    /// `[lo, hi)`
    pub fn closed_open(lo: f64, hi: f64) -> Self {
        Interval {
            lo,
            hi,
            lo_closed: true,
            hi_closed: false,
        }
    }

    pub fn point(t: f64) -> Self {
        Interval::closed(t, t)
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && !(self.lo_closed && self.hi_closed))
    }

    pub fn contains(&self, t: f64) -> bool {
        let above = if self.lo_closed { t >= self.lo } else { t > self.lo };
        let below = if self.hi_closed { t <= self.hi } else { t < self.hi };
        above && below
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        let (lo, lo_closed) = match self.lo.partial_cmp(&other.lo) {
            Some(Ordering::Greater) => (self.lo, self.lo_closed),
            Some(Ordering::Less) => (other.lo, other.lo_closed),
            _ => (self.lo, self.lo_closed && other.lo_closed),
        };
        let (hi, hi_closed) = match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Less) => (self.hi, self.hi_closed),
            Some(Ordering::Greater) => (other.hi, other.hi_closed),
            _ => (self.hi, self.hi_closed && other.hi_closed),
        };
        Interval {
            lo,
            hi,
            lo_closed,
            hi_closed,
        }
    }

    /// `{s - d : s in self, d in [a, b]}` (Minkowski difference with a closed window).
    pub fn back_shift(&self, a: f64, b: f64) -> Interval {
        Interval {
            lo: self.lo - b,
            hi: self.hi - a,
            lo_closed: self.lo_closed,
            hi_closed: self.hi_closed,
        }
    }

    /// `{t : [t + a, t + b] is contained in self}`.
    pub fn erode(&self, a: f64, b: f64) -> Interval {
        Interval {
            lo: self.lo - a,
            hi: self.hi - b,
            lo_closed: self.lo_closed,
            hi_closed: self.hi_closed,
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_closed { '[' } else { '(' },
            self.lo,
            self.hi,
            if self.hi_closed { ']' } else { ')' }
        )
    }
}

/// Sorted, pairwise disjoint, non-adjacent, non-empty intervals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntervalSet {
    intervals: Vec<Interval>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        IntervalSet::default()
    }

    pub fn from_interval(i: Interval) -> Self {
        IntervalSet::normalize(vec![i])
    }

    /// Sorts and merges intervals into canonical form.
    pub fn normalize(mut intervals: Vec<Interval>) -> Self {
        intervals.retain(|i| !i.is_empty());
        intervals.sort_by(|a, b| {
            a.lo.partial_cmp(&b.lo)
                .unwrap_or(Ordering::Equal)
                .then_with(|| b.lo_closed.cmp(&a.lo_closed))
        });
        let mut out: Vec<Interval> = Vec::with_capacity(intervals.len());
        for next in intervals {
            if let Some(cur) = out.last_mut() {
                let touches = next.lo < cur.hi || (next.lo == cur.hi && (cur.hi_closed || next.lo_closed));
                if touches {
                    match next.hi.partial_cmp(&cur.hi) {
                        Some(Ordering::Greater) => {
                            cur.hi = next.hi;
                            cur.hi_closed = next.hi_closed;
                        }
                        Some(Ordering::Equal) => cur.hi_closed |= next.hi_closed,
                        _ => {}
                    }
                    continue;
                }
            }
            out.push(next);
        }
        IntervalSet { intervals: out }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, t: f64) -> bool {
        // first interval whose upper end is not below t
        let k = self.intervals.partition_point(|i| i.hi < t);
        self.intervals[k..].iter().take(2).any(|i| i.contains(t))
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        let mut all = self.intervals.clone();
        all.extend_from_slice(&other.intervals);
        IntervalSet::normalize(all)
    }

    pub fn intersect(&self, other: &IntervalSet) -> IntervalSet {
        let (a, b) = (&self.intervals, &other.intervals);
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            let x = a[i].intersect(&b[j]);
            if !x.is_empty() {
                out.push(x);
            }
            // advance whichever ends first
            let a_first = match a[i].hi.partial_cmp(&b[j].hi) {
                Some(Ordering::Less) => true,
                Some(Ordering::Greater) => false,
                _ => !a[i].hi_closed || b[j].hi_closed,
            };
            if a_first {
                i += 1;
            } else {
                j += 1;
            }
        }
        IntervalSet::normalize(out)
    }

    /// Complement relative to the closed domain `[0, end]`.
    pub fn complement(&self, end: f64) -> IntervalSet {
        let mut out = Vec::new();
        let (mut lo, mut lo_closed) = (0.0, true);
        for i in &self.intervals {
            out.push(Interval {
                lo,
                hi: i.lo,
                lo_closed,
                hi_closed: !i.lo_closed,
            });
            lo = i.hi;
            lo_closed = !i.hi_closed;
        }
        out.push(Interval {
            lo,
            hi: end,
            lo_closed,
            hi_closed: true,
        });
        IntervalSet::normalize(out).clip(end)
    }

    /// Intersection with `[0, end]`.
    pub fn clip(&self, end: f64) -> IntervalSet {
        let dom = Interval::closed(0.0, end);
        let clipped = self
            .intervals
            .iter()
            .map(|i| i.intersect(&dom))
            .filter(|i| !i.is_empty())
            .collect();
        IntervalSet { intervals: clipped }
    }

    /// Times `t` for which some member lies in `[t + a, t + b]`, within `[0, end]`.
    pub fn back_shift(&self, a: f64, b: f64, end: f64) -> IntervalSet {
        IntervalSet::normalize(self.intervals.iter().map(|i| i.back_shift(a, b)).collect()).clip(end)
    }

    /// Times `t` for which `[t + a, t + b]` lies entirely inside the set, within `[0, end]`.
    pub fn erode(&self, a: f64, b: f64, end: f64) -> IntervalSet {
        IntervalSet::normalize(self.intervals.iter().map(|i| i.erode(a, b)).collect()).clip(end)
    }

    /// Times `t` satisfying `self U[a,b] goal`: some `t1` in `[t + a, t + b]`
    /// lies in `goal` and `[t, t1]` lies inside `self`.
    pub fn until(&self, goal: &IntervalSet, a: f64, b: f64, end: f64) -> IntervalSet {
        let mut out = Vec::new();
        let g = &goal.intervals;
        for hold in &self.intervals {
            let start = g.partition_point(|j| j.hi < hold.lo);
            for target in g[start..].iter().take_while(|j| j.lo <= hold.hi) {
                let witness = hold.intersect(target);
                if witness.is_empty() {
                    continue;
                }
                let starts = witness.back_shift(a, b).intersect(hold);
                if !starts.is_empty() {
                    out.push(starts);
                }
            }
        }
        IntervalSet::normalize(out).clip(end)
    }
}

impl fmt::Display for IntervalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.intervals.is_empty() {
            return f.write_str("{}");
        }
        for (k, i) in self.intervals.iter().enumerate() {
            if k > 0 {
                f.write_str(" u ")?;
            }
            write!(f, "{i}")?;
        }
        Ok(())
    }
}
