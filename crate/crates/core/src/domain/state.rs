use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::cfa::{Edge, Loc, Op};
use crate::expr::{BinOp, Expr, UnOp};

use super::interval::IntervalSet;
use super::symexpr::SymExpr;

/// Evaluation of a binding chain stops after this many variable hops.
const EVAL_DEPTH: usize = 8;

/// Precision `(Y, n, w)`: important variables, maximal expression depth and
/// whether merging at loop heads widens.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Precision {
    pub y: BTreeSet<String>,
    pub n: usize,
    pub w: bool,
}

impl Precision {
    pub fn initial() -> Precision {
        Precision {
            y: BTreeSet::new(),
            n: 1,
            w: true,
        }
    }

    pub fn new<S: Into<String>>(y: impl IntoIterator<Item = S>, n: usize, w: bool) -> Precision {
        Precision {
            y: y.into_iter().map(Into::into).collect(),
            n,
            w,
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let y: Vec<&str> = self.y.iter().map(String::as_str).collect();
        write!(f, "({{{}}}, {}, {})", y.join(", "), self.n, self.w)
    }
}

/// A location with a total map from variables to value descriptions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AbstractState {
    pub loc: Loc,
    map: BTreeMap<String, SymExpr>,
}

impl AbstractState {
    /// Every variable unconstrained.
    pub fn top<S: AsRef<str>>(loc: Loc, vars: &[S]) -> AbstractState {
        AbstractState {
            loc,
            map: vars
                .iter()
                .map(|v| (v.as_ref().to_string(), SymExpr::top()))
                .collect(),
        }
    }

    /// Builder used mostly by tests.
    pub fn with(mut self, var: &str, value: SymExpr) -> AbstractState {
        self.map.insert(var.to_string(), value);
        self
    }

    pub fn get(&self, var: &str) -> &SymExpr {
        static TOP: std::sync::OnceLock<SymExpr> = std::sync::OnceLock::new();
        self.map
            .get(var)
            .unwrap_or_else(|| TOP.get_or_init(SymExpr::top))
    }

    pub fn set(&mut self, var: &str, value: SymExpr) {
        self.map.insert(var.to_string(), value);
    }

    pub fn vars(&self) -> impl Iterator<Item = &String> {
        self.map.keys()
    }

    pub fn bindings(&self) -> impl Iterator<Item = (&String, &SymExpr)> {
        self.map.iter()
    }

    pub fn is_bottom(&self) -> bool {
        self.map.keys().any(|v| self.value_of(v).is_bottom())
    }

    /// The set of values `var` may take.
    pub fn value_of(&self, var: &str) -> IntervalSet {
        self.eval_var(var, EVAL_DEPTH)
    }

    fn eval_var(&self, var: &str, fuel: usize) -> IntervalSet {
        match self.map.get(var) {
            None => IntervalSet::top(),
            Some(SymExpr::Intervals(s)) => s.clone(),
            Some(_) if fuel == 0 => IntervalSet::top(),
            Some(e) => e.eval(&|v| self.eval_var(v, fuel - 1)),
        }
    }

    /// Evaluates an abstract expression over this state.
    pub fn eval(&self, e: &SymExpr) -> IntervalSet {
        e.eval(&|v| self.value_of(v))
    }

    /// Lifts a program expression, inlining variables bound to a constant.
    fn lift(&self, e: &Expr) -> SymExpr {
        SymExpr::from_expr(e, &|v| match self.get(v).as_point() {
            Some(c) => SymExpr::point(c),
            None => SymExpr::var(v),
        })
        .fold()
    }

    /// Like [`Self::lift`], additionally inlining exact relational bindings
    /// so that syntactically equal values compare equal.
    fn lift_resolved(&self, e: &Expr) -> SymExpr {
        SymExpr::from_expr(e, &|v| match self.get(v) {
            b if b.as_point().is_some() => b.clone(),
            b @ (SymExpr::Unary(..) | SymExpr::Binary(..) | SymExpr::Var(_)) if b.is_exact() => {
                b.clone()
            }
            _ => SymExpr::var(v),
        })
        .fold()
    }

    /// Abstract value of a program expression in this state.
    pub fn eval_expr(&self, e: &Expr) -> IntervalSet {
        self.eval(&self.lift_resolved(e))
    }

    /// Rebinds `var`, rewriting the other bindings that refer to its old value.
    fn rebind(&mut self, var: &str, value: SymExpr, n: usize) {
        let old = self.get(var).clone();
        // a binding never refers to its own variable
        let old = if old.mentions(var) { SymExpr::top() } else { old };
        let value = value.substitute(var, &old);
        let mut changed = vec![var.to_string()];
        for (k, b) in self.map.iter_mut() {
            if k != var && b.mentions(var) {
                *b = b.substitute(var, &old);
                changed.push(k.clone());
            }
        }
        let value = if value.mentions(var) {
            SymExpr::top()
        } else {
            value
        };
        self.map.insert(var.to_string(), value);
        let snapshot = self.clone();
        for k in changed {
            let t = self.map[&k].truncate(n, &|v| snapshot.value_of(v));
            self.map.insert(k, t);
        }
    }

    /// Intersects the value of `var` with `set`. Relational bindings are
    /// only replaced when the result is empty or a single value.
    fn constrain(&mut self, var: &str, set: &IntervalSet) {
        let cur = self.value_of(var);
        let new = cur.intersect(set);
        if new == cur {
            return;
        }
        let binding = self.get(var);
        if binding.as_intervals().is_some() || new.is_bottom() || new.as_point().is_some() {
            self.map.insert(var.to_string(), SymExpr::Intervals(new));
        }
    }

    /// Narrows the state under the assumption that `e` is non-zero
    /// (`positive`) or zero.
    fn refine(&mut self, e: &Expr, positive: bool) {
        match e {
            Expr::Unary(UnOp::Not, a) => self.refine(a, !positive),
            Expr::Binary(BinOp::And, a, b) if positive => {
                self.refine(a, true);
                self.refine(b, true);
            }
            Expr::Binary(BinOp::Or, a, b) if !positive => {
                self.refine(a, false);
                self.refine(b, false);
            }
            Expr::Var(x) => {
                if positive {
                    let s = self.value_of(x).remove(0);
                    self.constrain(x, &s);
                } else {
                    self.constrain(x, &IntervalSet::point(0));
                }
            }
            Expr::Binary(BinOp::Eq, a, b) => {
                let va = self.eval_expr(a);
                let vb = self.eval_expr(b);
                if positive {
                    if let Expr::Var(x) = &**a {
                        self.constrain(x, &vb);
                    }
                    if let Expr::Var(y) = &**b {
                        self.constrain(y, &va);
                    }
                } else {
                    if let (Expr::Var(x), Some(c)) = (&**a, vb.as_point()) {
                        let s = self.value_of(x).remove(c);
                        self.constrain(x, &s);
                    }
                    if let (Expr::Var(y), Some(c)) = (&**b, va.as_point()) {
                        let s = self.value_of(y).remove(c);
                        self.constrain(y, &s);
                    }
                }
            }
            Expr::Binary(BinOp::Lt, a, b) => {
                let va = self.eval_expr(a);
                let vb = self.eval_expr(b);
                if va.is_bottom() || vb.is_bottom() {
                    return;
                }
                let (amin, amax) = (va.lo().unwrap(), va.hi().unwrap());
                let (bmin, bmax) = (vb.lo().unwrap(), vb.hi().unwrap());
                if positive {
                    // a < b
                    if let Expr::Var(x) = &**a {
                        self.constrain(x, &IntervalSet::below(bmax));
                    }
                    if let Expr::Var(y) = &**b {
                        self.constrain(y, &IntervalSet::above(amin));
                    }
                } else {
                    // a >= b
                    if let Expr::Var(x) = &**a {
                        self.constrain(x, &IntervalSet::at_least(bmin));
                    }
                    if let Expr::Var(y) = &**b {
                        self.constrain(y, &IntervalSet::at_most(amax));
                    }
                }
            }
            _ => {}
        }
    }

    fn with_loc(mut self, loc: Loc) -> AbstractState {
        self.loc = loc;
        self
    }
}

impl fmt::Display for AbstractState {
    /// `loc: var ∈ set, ...`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .map
            .keys()
            .map(|v| format!("{v} ∈ {}", self.value_of(v)))
            .collect();
        write!(f, "{}: {}", self.loc, parts.join(", "))
    }
}

/// Abstract post-state of `state` along `edge`, or `None` if the edge
/// cannot be taken.
pub fn transfer(state: &AbstractState, edge: &Edge, prec: &Precision) -> Option<AbstractState> {
    let mut out = state.clone().with_loc(edge.dst);
    match &edge.op {
        Op::Assume(c) => {
            let truth = state.eval_expr(c);
            if truth.is_bottom() || truth.truth() == Some(false) {
                return None;
            }
            out.refine(c, true);
            if out.is_bottom() {
                return None;
            }
        }
        Op::Assign(x, e) => {
            let v = state.lift(e);
            out.rebind(x, v, prec.n);
            if out.is_bottom() {
                return None;
            }
        }
        Op::Havoc(x) => out.rebind(x, SymExpr::top(), prec.n),
    }
    Some(out)
}

/// Per-variable join; identical bindings are kept, others are evaluated and
/// united.
pub fn union_states(e1: &AbstractState, e2: &AbstractState) -> AbstractState {
    join_with(e1, e2, |a, b| a.union(b))
}

/// Per-variable single-interval widening from `e1` towards `e2`.
pub fn widen_states(e1: &AbstractState, e2: &AbstractState) -> AbstractState {
    join_with(e1, e2, |a, b| a.widen(b))
}

fn join_with(
    e1: &AbstractState,
    e2: &AbstractState,
    f: impl Fn(&IntervalSet, &IntervalSet) -> IntervalSet,
) -> AbstractState {
    if e1.is_bottom() {
        return e2.clone();
    }
    if e2.is_bottom() {
        return e1.clone();
    }
    let keys: BTreeSet<&String> = e1.map.keys().chain(e2.map.keys()).collect();
    let mut map = BTreeMap::new();
    for k in keys {
        let (a, b) = (e1.get(k), e2.get(k));
        // identical relational bindings survive, everything else is evaluated
        let v = if a == b && a.as_intervals().is_none() {
            a.clone()
        } else {
            SymExpr::Intervals(f(&e1.value_of(k), &e2.value_of(k)))
        };
        map.insert(k.clone(), v);
    }
    AbstractState { loc: e1.loc, map }
}

/// True if some important variable has structurally different bindings.
pub fn differ(e1: &AbstractState, e2: &AbstractState, prec: &Precision) -> bool {
    prec.y.iter().any(|v| e1.get(v) != e2.get(v))
}

/// Merge operator: keep states separate when they differ on `Y`, otherwise
/// widen (if `w`) or unite.
pub fn merge(e1: &AbstractState, e2: &AbstractState, prec: &Precision) -> AbstractState {
    if differ(e1, e2, prec) {
        e2.clone()
    } else if prec.w {
        widen_states(e1, e2)
    } else {
        union_states(e1, e2)
    }
}

fn covers(big: &AbstractState, small: &AbstractState, var: &str) -> bool {
    let b = big.get(var);
    if b.is_top() || b == small.get(var) {
        return true;
    }
    match b.as_intervals() {
        Some(set) => set.includes(&small.value_of(var)),
        None => false,
    }
}

/// True if `state` is bottom or covered by a reached state at its location.
pub fn stop<'a>(state: &AbstractState, reached: impl IntoIterator<Item = &'a AbstractState>) -> bool {
    if state.is_bottom() {
        return true;
    }
    reached.into_iter().any(|r| {
        r.loc == state.loc && state.map.keys().chain(r.map.keys()).all(|v| covers(r, state, v))
    })
}

/// Whether a concrete environment lies in the concretization of `state`.
pub fn contains_concrete(state: &AbstractState, env: &dyn Fn(&str) -> Option<num_bigint::BigInt>) -> bool {
    use num_traits::ToPrimitive;
    let point = |v: &str| match env(v) {
        Some(x) => match x.to_i128() {
            Some(i) => IntervalSet::point(i),
            None => IntervalSet::from_bigint(&x),
        },
        None => IntervalSet::top(),
    };
    state.map.iter().all(|(v, b)| match env(v) {
        Some(x) => b.eval(&point).contains_bigint(&x),
        None => true,
    })
}
