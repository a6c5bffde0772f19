//! Finite disjunctions of closed integer intervals with infinite bounds.

use std::cmp::{max, min};
use std::fmt;

use num_bigint::BigInt;
use num_traits::ToPrimitive;

/// At most this many disjuncts are kept; larger sets collapse to their hull.
pub const MAX_DISJUNCTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Bound {
    NegInf,
    Fin(i128),
    PosInf,
}

impl Bound {
    pub fn fin(self) -> Option<i128> {
        match self {
            Bound::Fin(v) => Some(v),
            _ => None,
        }
    }

    fn neg(self) -> Bound {
        match self {
            Bound::NegInf => Bound::PosInf,
            Bound::PosInf => Bound::NegInf,
            Bound::Fin(v) => v.checked_neg().map_or(Bound::PosInf, Bound::Fin),
        }
    }

    fn signum(self) -> i32 {
        match self {
            Bound::NegInf => -1,
            Bound::PosInf => 1,
            Bound::Fin(v) => v.signum() as i32,
        }
    }

    fn inf_of_sign(s: i32) -> Bound {
        if s < 0 {
            Bound::NegInf
        } else {
            Bound::PosInf
        }
    }

    /// Sum, where an infinite operand dominates. Never called with opposite
    /// infinities by the interval operations.
    fn add(self, o: Bound) -> Bound {
        match (self, o) {
            (Bound::Fin(a), Bound::Fin(b)) => a
                .checked_add(b)
                .map_or(Bound::inf_of_sign(a.signum() as i32), Bound::Fin),
            (Bound::Fin(_), inf) | (inf, _) => inf,
        }
    }

    fn mul(self, o: Bound) -> Bound {
        match (self, o) {
            (Bound::Fin(a), Bound::Fin(b)) => a
                .checked_mul(b)
                .map_or(Bound::inf_of_sign(self.signum() * o.signum()), Bound::Fin),
            (Bound::Fin(0), _) | (_, Bound::Fin(0)) => Bound::Fin(0),
            _ => Bound::inf_of_sign(self.signum() * o.signum()),
        }
    }

    fn succ(self) -> Bound {
        self.add(Bound::Fin(1))
    }

    fn pred(self) -> Bound {
        self.add(Bound::Fin(-1))
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::NegInf => write!(f, "-inf"),
            Bound::PosInf => write!(f, "+inf"),
            Bound::Fin(v) => write!(f, "{v}"),
        }
    }
}

/// A non-empty closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Interval {
    pub lo: Bound,
    pub hi: Bound,
}

impl Interval {
    /// Builds an interval, or `None` if it is empty. A lower bound of `+inf`
    /// (or upper bound of `-inf`) arising from overflow is clamped to the
    /// extreme finite value, which keeps the result an over-approximation.
    pub fn new(lo: Bound, hi: Bound) -> Option<Interval> {
        let lo = if lo == Bound::PosInf {
            Bound::Fin(i128::MAX)
        } else {
            lo
        };
        let hi = if hi == Bound::NegInf {
            Bound::Fin(i128::MIN)
        } else {
            hi
        };
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn point(v: i128) -> Interval {
        Interval {
            lo: Bound::Fin(v),
            hi: Bound::Fin(v),
        }
    }

    pub fn top() -> Interval {
        Interval {
            lo: Bound::NegInf,
            hi: Bound::PosInf,
        }
    }

    pub fn contains(&self, v: i128) -> bool {
        self.lo <= Bound::Fin(v) && Bound::Fin(v) <= self.hi
    }

    fn includes(&self, o: &Interval) -> bool {
        self.lo <= o.lo && o.hi <= self.hi
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// A set of integers as a sorted list of disjoint, non-adjacent intervals.
/// The empty list is bottom.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct IntervalSet {
    parts: Vec<Interval>,
}

impl IntervalSet {
    pub fn bottom() -> IntervalSet {
        IntervalSet { parts: Vec::new() }
    }

    pub fn top() -> IntervalSet {
        IntervalSet {
            parts: vec![Interval::top()],
        }
    }

    pub fn point(v: i128) -> IntervalSet {
        IntervalSet {
            parts: vec![Interval::point(v)],
        }
    }

    pub fn range(lo: Bound, hi: Bound) -> IntervalSet {
        IntervalSet::from_intervals(Interval::new(lo, hi))
    }

    /// `[lo, hi]` with finite bounds.
    pub fn closed(lo: i128, hi: i128) -> IntervalSet {
        IntervalSet::range(Bound::Fin(lo), Bound::Fin(hi))
    }

    pub fn boolean() -> IntervalSet {
        IntervalSet::closed(0, 1)
    }

    pub fn from_bool(b: bool) -> IntervalSet {
        IntervalSet::point(b as i128)
    }

    /// Normalizes an arbitrary collection of intervals.
    pub fn from_intervals(items: impl IntoIterator<Item = Interval>) -> IntervalSet {
        let mut v: Vec<Interval> = items.into_iter().collect();
        v.sort();
        let mut parts: Vec<Interval> = Vec::with_capacity(v.len());
        for iv in v {
            if let Some(last) = parts.last_mut() {
                if iv.lo <= last.hi.succ() {
                    last.hi = max(last.hi, iv.hi);
                    continue;
                }
            }
            parts.push(iv);
        }
        let mut s = IntervalSet { parts };
        if s.parts.len() > MAX_DISJUNCTS {
            s = s.hull();
        }
        s
    }

    pub fn from_bigint(v: &BigInt) -> IntervalSet {
        match v.to_i128() {
            Some(x) => IntervalSet::point(x),
            None if v.sign() == num_bigint::Sign::Minus => {
                IntervalSet::range(Bound::NegInf, Bound::Fin(i128::MIN))
            }
            None => IntervalSet::range(Bound::Fin(i128::MAX), Bound::PosInf),
        }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.parts
    }

    pub fn is_bottom(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn is_top(&self) -> bool {
        self.parts == [Interval::top()]
    }

    pub fn lo(&self) -> Option<Bound> {
        self.parts.first().map(|i| i.lo)
    }

    pub fn hi(&self) -> Option<Bound> {
        self.parts.last().map(|i| i.hi)
    }

    /// The single value, if the set is a singleton.
    pub fn as_point(&self) -> Option<i128> {
        match self.parts.as_slice() {
            [Interval {
                lo: Bound::Fin(a),
                hi: Bound::Fin(b),
            }] if a == b => Some(*a),
            _ => None,
        }
    }

    pub fn contains(&self, v: i128) -> bool {
        self.parts.iter().any(|i| i.contains(v))
    }

    pub fn contains_bigint(&self, v: &BigInt) -> bool {
        match v.to_i128() {
            Some(x) => self.contains(x),
            None if v.sign() == num_bigint::Sign::Minus => self.lo() == Some(Bound::NegInf),
            None => self.hi() == Some(Bound::PosInf),
        }
    }

    /// Set inclusion `other ⊆ self`.
    pub fn includes(&self, other: &IntervalSet) -> bool {
        other
            .parts
            .iter()
            .all(|o| self.parts.iter().any(|s| s.includes(o)))
    }

    pub fn hull(&self) -> IntervalSet {
        match (self.lo(), self.hi()) {
            (Some(lo), Some(hi)) => IntervalSet {
                parts: vec![Interval { lo, hi }],
            },
            _ => IntervalSet::bottom(),
        }
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        IntervalSet::from_intervals(self.parts.iter().chain(&other.parts).copied())
    }

    pub fn intersect(&self, other: &IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        for a in &self.parts {
            for b in &other.parts {
                if let Some(i) = Interval::new(max(a.lo, b.lo), min(a.hi, b.hi)) {
                    if max(a.lo, b.lo) <= min(a.hi, b.hi) {
                        out.push(i);
                    }
                }
            }
        }
        IntervalSet::from_intervals(out)
    }

    /// Removes a single value.
    pub fn remove(&self, v: i128) -> IntervalSet {
        let mut out = Vec::new();
        for i in &self.parts {
            if !i.contains(v) {
                out.push(*i);
                continue;
            }
            if let Some(l) = Interval::new(i.lo, Bound::Fin(v).pred()) {
                if i.lo < Bound::Fin(v) {
                    out.push(l);
                }
            }
            if let Some(r) = Interval::new(Bound::Fin(v).succ(), i.hi) {
                if Bound::Fin(v) < i.hi {
                    out.push(r);
                }
            }
        }
        IntervalSet::from_intervals(out)
    }

    /// Values strictly below `b`.
    pub fn below(b: Bound) -> IntervalSet {
        IntervalSet::range(Bound::NegInf, b.pred())
    }

    /// Values strictly above `b`.
    pub fn above(b: Bound) -> IntervalSet {
        IntervalSet::range(b.succ(), Bound::PosInf)
    }

    /// Values `>= b`.
    pub fn at_least(b: Bound) -> IntervalSet {
        IntervalSet::range(b, Bound::PosInf)
    }

    /// Values `<= b`.
    pub fn at_most(b: Bound) -> IntervalSet {
        IntervalSet::range(Bound::NegInf, b)
    }

    /// Directional widening: bounds of `next` beyond the hull of `self` jump
    /// to infinity, the others stay; the result is a single interval.
    pub fn widen(&self, next: &IntervalSet) -> IntervalSet {
        if self.is_bottom() {
            return next.hull();
        }
        if next.is_bottom() {
            return self.hull();
        }
        let (lo0, hi0) = (self.lo().unwrap(), self.hi().unwrap());
        let (lo1, hi1) = (next.lo().unwrap(), next.hi().unwrap());
        let lo = if lo1 < lo0 { Bound::NegInf } else { lo0 };
        let hi = if hi1 > hi0 { Bound::PosInf } else { hi0 };
        IntervalSet::range(lo, hi)
    }

    fn pairwise(&self, o: &IntervalSet, f: impl Fn(&Interval, &Interval) -> IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        for a in &self.parts {
            for b in &o.parts {
                out.extend(f(a, b).parts);
            }
        }
        IntervalSet::from_intervals(out)
    }

    fn map(&self, f: impl Fn(&Interval) -> Option<Interval>) -> IntervalSet {
        IntervalSet::from_intervals(self.parts.iter().filter_map(f))
    }

    pub fn neg(&self) -> IntervalSet {
        self.map(|i| Interval::new(i.hi.neg(), i.lo.neg()))
    }

    pub fn add(&self, o: &IntervalSet) -> IntervalSet {
        self.pairwise(o, |a, b| IntervalSet::from_intervals(Interval::new(a.lo.add(b.lo), a.hi.add(b.hi))))
    }

    pub fn mul(&self, o: &IntervalSet) -> IntervalSet {
        self.pairwise(o, |a, b| {
            let c = [a.lo.mul(b.lo), a.lo.mul(b.hi), a.hi.mul(b.lo), a.hi.mul(b.hi)];
            let lo = *c.iter().min().unwrap();
            let hi = *c.iter().max().unwrap();
            IntervalSet::from_intervals(Interval::new(lo, hi))
        })
    }

    /// Division truncating towards zero; a divisor that may be zero gives top.
    pub fn div(&self, o: &IntervalSet) -> IntervalSet {
        if self.is_bottom() || o.is_bottom() {
            return IntervalSet::bottom();
        }
        if o.contains(0) {
            return IntervalSet::top();
        }
        self.pairwise(o, |a, b| {
            if b.hi < Bound::Fin(0) {
                // a / b == -(a / -b)
                let nb = Interval::new(b.hi.neg(), b.lo.neg()).unwrap();
                return IntervalSet::from_intervals([*a]).div_pos(&nb).neg();
            }
            IntervalSet::from_intervals([*a]).div_pos(b)
        })
    }

    fn div_pos(&self, b: &Interval) -> IntervalSet {
        let tdiv = |x: Bound, y: Bound| -> Bound {
            match (x, y) {
                (Bound::Fin(x), Bound::Fin(y)) => Bound::Fin(x / y),
                (_, Bound::PosInf) => Bound::Fin(0),
                (inf, _) => inf,
            }
        };
        self.map(|a| {
            let c = [tdiv(a.lo, b.lo), tdiv(a.lo, b.hi), tdiv(a.hi, b.lo), tdiv(a.hi, b.hi)];
            Interval::new(*c.iter().min().unwrap(), *c.iter().max().unwrap())
        })
    }

    /// Euclidean remainder; a divisor that may be zero gives top.
    pub fn rem(&self, o: &IntervalSet) -> IntervalSet {
        if self.is_bottom() || o.is_bottom() {
            return IntervalSet::bottom();
        }
        if o.contains(0) {
            return IntervalSet::top();
        }
        if let (Some(a), Some(b)) = (self.as_point(), o.as_point()) {
            return IntervalSet::point(a.rem_euclid(b.abs()));
        }
        let abs = o.abs();
        let max_abs = abs.hi().unwrap();
        let min_abs = abs.lo().unwrap();
        let range = IntervalSet::range(Bound::Fin(0), max_abs.pred());
        // a value already in [0, |b|) is its own remainder
        if let (Some(lo), Some(hi)) = (self.lo(), self.hi()) {
            if lo >= Bound::Fin(0) && hi < min_abs {
                return self.clone();
            }
        }
        range
    }

    pub fn abs(&self) -> IntervalSet {
        let neg = self.intersect(&IntervalSet::below(Bound::Fin(0))).neg();
        let pos = self.intersect(&IntervalSet::at_least(Bound::Fin(0)));
        neg.union(&pos)
    }

    pub fn bit_not(&self) -> IntervalSet {
        self.neg().add(&IntervalSet::point(-1))
    }

    pub fn bit_and(&self, o: &IntervalSet) -> IntervalSet {
        if self.is_bottom() || o.is_bottom() {
            return IntervalSet::bottom();
        }
        if let (Some(a), Some(b)) = (self.as_point(), o.as_point()) {
            return IntervalSet::point(a & b);
        }
        // x & y with y >= 0 lies in [0, y]
        let nonneg_hi = [self, o]
            .iter()
            .filter(|s| s.lo().unwrap() >= Bound::Fin(0))
            .map(|s| s.hi().unwrap())
            .min();
        match nonneg_hi {
            Some(hi) => IntervalSet::range(Bound::Fin(0), hi),
            None => IntervalSet::top(),
        }
    }

    pub fn bit_or(&self, o: &IntervalSet) -> IntervalSet {
        self.bitwise_points(o, |a, b| a | b)
    }

    pub fn bit_xor(&self, o: &IntervalSet) -> IntervalSet {
        self.bitwise_points(o, |a, b| a ^ b)
    }

    fn bitwise_points(&self, o: &IntervalSet, f: fn(i128, i128) -> i128) -> IntervalSet {
        if self.is_bottom() || o.is_bottom() {
            return IntervalSet::bottom();
        }
        match (self.as_point(), o.as_point()) {
            (Some(a), Some(b)) => IntervalSet::point(f(a, b)),
            _ => IntervalSet::top(),
        }
    }

    /// Shift by a singleton amount of at most 64; anything else is top.
    pub fn shl(&self, o: &IntervalSet) -> IntervalSet {
        if self.is_bottom() || o.is_bottom() {
            return IntervalSet::bottom();
        }
        match o.as_point() {
            Some(k) if (0..=64).contains(&k) => self.mul(&IntervalSet::point(1i128 << k)),
            Some(k) if (-64..0).contains(&k) => self.shr(&IntervalSet::point(-k)),
            _ => IntervalSet::top(),
        }
    }

    /// Arithmetic shift right, i.e. floor division by a power of two.
    pub fn shr(&self, o: &IntervalSet) -> IntervalSet {
        if self.is_bottom() || o.is_bottom() {
            return IntervalSet::bottom();
        }
        match o.as_point() {
            Some(k) if (0..=126).contains(&k) => {
                let d = 1i128 << k;
                let fdiv = |x: Bound| match x {
                    Bound::Fin(v) => Bound::Fin(v.div_euclid(d)),
                    inf => inf,
                };
                self.map(|a| Interval::new(fdiv(a.lo), fdiv(a.hi)))
            }
            Some(k) if (-64..0).contains(&k) => self.shl(&IntervalSet::point(-k)),
            _ => IntervalSet::top(),
        }
    }

    /// Truth value: `Some(true)` if every member is non-zero, `Some(false)`
    /// if the set is `{0}`, `None` otherwise (or when bottom).
    pub fn truth(&self) -> Option<bool> {
        if self.is_bottom() {
            None
        } else if self.as_point() == Some(0) {
            Some(false)
        } else if !self.contains(0) {
            Some(true)
        } else {
            None
        }
    }

    fn of_truth(t: Option<bool>) -> IntervalSet {
        match t {
            Some(b) => IntervalSet::from_bool(b),
            None => IntervalSet::boolean(),
        }
    }

    pub fn eq_cmp(&self, o: &IntervalSet) -> IntervalSet {
        if self.is_bottom() || o.is_bottom() {
            return IntervalSet::bottom();
        }
        let t = match (self.as_point(), o.as_point()) {
            (Some(a), Some(b)) => Some(a == b),
            _ if self.intersect(o).is_bottom() => Some(false),
            _ => None,
        };
        IntervalSet::of_truth(t)
    }

    pub fn lt_cmp(&self, o: &IntervalSet) -> IntervalSet {
        if self.is_bottom() || o.is_bottom() {
            return IntervalSet::bottom();
        }
        let t = if self.hi().unwrap() < o.lo().unwrap() {
            Some(true)
        } else if self.lo().unwrap() >= o.hi().unwrap() {
            Some(false)
        } else {
            None
        };
        IntervalSet::of_truth(t)
    }

    pub fn logical_not(&self) -> IntervalSet {
        if self.is_bottom() {
            return IntervalSet::bottom();
        }
        IntervalSet::of_truth(self.truth().map(|b| !b))
    }

    pub fn logical_and(&self, o: &IntervalSet) -> IntervalSet {
        if self.is_bottom() || o.is_bottom() {
            return IntervalSet::bottom();
        }
        let t = match (self.truth(), o.truth()) {
            (Some(false), _) | (_, Some(false)) => Some(false),
            (Some(true), Some(true)) => Some(true),
            _ => None,
        };
        IntervalSet::of_truth(t)
    }

    pub fn logical_or(&self, o: &IntervalSet) -> IntervalSet {
        if self.is_bottom() || o.is_bottom() {
            return IntervalSet::bottom();
        }
        let t = match (self.truth(), o.truth()) {
            (Some(true), _) | (_, Some(true)) => Some(true),
            (Some(false), Some(false)) => Some(false),
            _ => None,
        };
        IntervalSet::of_truth(t)
    }
}

impl fmt::Display for IntervalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.parts.is_empty() {
            return write!(f, "{{}}");
        }
        let parts: Vec<String> = self.parts.iter().map(|i| i.to_string()).collect();
        write!(f, "{}", parts.join(" v "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(lo: i128, hi: i128) -> IntervalSet {
        IntervalSet::closed(lo, hi)
    }

    #[test]
    fn union_keeps_gaps_and_merges_overlaps() {
        let u = iv(1, 1).union(&iv(3, 3));
        assert_eq!(u.intervals().len(), 2);
        assert_eq!(iv(0, 5).union(&iv(4, 9)), iv(0, 9));
        // adjacent intervals merge
        assert_eq!(iv(0, 2).union(&iv(3, 4)), iv(0, 4));
    }

    #[test]
    fn arithmetic() {
        assert_eq!(iv(1, 4).add(&IntervalSet::point(1)), iv(2, 5));
        assert_eq!(iv(-2, 3).mul(&iv(-1, 2)), iv(-4, 6));
        assert_eq!(iv(-7, 7).div(&IntervalSet::point(2)), iv(-3, 3));
        assert_eq!(iv(1, 10).div(&iv(-2, 2)), IntervalSet::top());
        assert_eq!(iv(0, 3).rem(&IntervalSet::point(5)), iv(0, 3));
        assert_eq!(iv(-9, 9).rem(&IntervalSet::point(5)), iv(0, 4));
        assert_eq!(iv(-8, 7).shr(&IntervalSet::point(1)), iv(-4, 3));
    }

    #[test]
    fn infinite_bounds() {
        let pos = IntervalSet::at_least(Bound::Fin(1));
        assert_eq!(pos.add(&IntervalSet::point(1)), IntervalSet::at_least(Bound::Fin(2)));
        assert_eq!(pos.neg(), IntervalSet::at_most(Bound::Fin(-1)));
        assert_eq!(pos.mul(&IntervalSet::point(0)), IntervalSet::point(0));
        assert_eq!(
            IntervalSet::closed(i128::MAX - 1, i128::MAX).add(&IntervalSet::point(5)),
            IntervalSet::range(Bound::Fin(i128::MAX), Bound::PosInf)
        );
    }

    #[test]
    fn widening_is_directional() {
        assert_eq!(iv(1, 1).widen(&iv(1, 2)), IntervalSet::at_least(Bound::Fin(1)));
        assert_eq!(iv(1, 4).widen(&iv(1, 4)), iv(1, 4));
        let gap = IntervalSet::point(0).union(&IntervalSet::point(5));
        assert_eq!(gap.widen(&iv(0, 5)), iv(0, 5));
    }

    #[test]
    fn comparisons() {
        assert_eq!(IntervalSet::point(1).eq_cmp(&IntervalSet::point(4)), IntervalSet::point(0));
        assert_eq!(iv(1, 4).lt_cmp(&iv(5, 6)), IntervalSet::point(1));
        assert_eq!(iv(1, 5).lt_cmp(&iv(5, 6)), IntervalSet::boolean());
    }

    #[test]
    fn remove_point() {
        assert_eq!(iv(0, 2).remove(1), IntervalSet::point(0).union(&IntervalSet::point(2)));
        assert_eq!(iv(0, 0).remove(0), IntervalSet::bottom());
        assert_eq!(IntervalSet::top().remove(0).intervals().len(), 2);
    }

    #[test]
    fn cap_collapses_to_hull() {
        let many = IntervalSet::from_intervals((0..20).map(|i| Interval::point(3 * i)));
        assert_eq!(many, iv(0, 57));
        let few = IntervalSet::from_intervals((0..16).map(|i| Interval::point(3 * i)));
        assert_eq!(few.intervals().len(), 16);
    }
}
