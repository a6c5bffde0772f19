use std::collections::BTreeSet;
use std::fmt;

use crate::expr::{BinOp, Expr, UnOp};

use super::interval::IntervalSet;

/// Binary operators of the abstract expression language: the program
/// operators plus set union.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SymOp {
    Bin(BinOp),
    Union,
}

impl fmt::Display for SymOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SymOp::Bin(op) => write!(f, "{}", op.symbol()),
            SymOp::Union => write!(f, "∪"),
        }
    }
}

/// Value description of one variable: the variable's current value lies in
/// the set this expression evaluates to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SymExpr {
    Var(String),
    Intervals(IntervalSet),
    Unary(UnOp, Box<SymExpr>),
    Binary(SymOp, Box<SymExpr>, Box<SymExpr>),
}

impl SymExpr {
    pub fn top() -> SymExpr {
        SymExpr::Intervals(IntervalSet::top())
    }

    pub fn point(v: i128) -> SymExpr {
        SymExpr::Intervals(IntervalSet::point(v))
    }

    pub fn closed(lo: i128, hi: i128) -> SymExpr {
        SymExpr::Intervals(IntervalSet::closed(lo, hi))
    }

    pub fn var(name: impl Into<String>) -> SymExpr {
        SymExpr::Var(name.into())
    }

    pub fn binary(op: SymOp, l: SymExpr, r: SymExpr) -> SymExpr {
        SymExpr::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn unary(op: UnOp, e: SymExpr) -> SymExpr {
        SymExpr::Unary(op, Box::new(e))
    }

    pub fn is_top(&self) -> bool {
        matches!(self, SymExpr::Intervals(s) if s.is_top())
    }

    pub fn is_bottom(&self) -> bool {
        matches!(self, SymExpr::Intervals(s) if s.is_bottom())
    }

    pub fn as_intervals(&self) -> Option<&IntervalSet> {
        match self {
            SymExpr::Intervals(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_point(&self) -> Option<i128> {
        self.as_intervals().and_then(IntervalSet::as_point)
    }

    /// Leaves count 1, each operator adds 1.
    pub fn depth(&self) -> usize {
        match self {
            SymExpr::Var(_) | SymExpr::Intervals(_) => 1,
            SymExpr::Unary(_, e) => 1 + e.depth(),
            SymExpr::Binary(_, l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    pub fn mentions(&self, var: &str) -> bool {
        match self {
            SymExpr::Var(v) => v == var,
            SymExpr::Intervals(_) => false,
            SymExpr::Unary(_, e) => e.mentions(var),
            SymExpr::Binary(_, l, r) => l.mentions(var) || r.mentions(var),
        }
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            SymExpr::Var(v) => {
                out.insert(v.clone());
            }
            SymExpr::Intervals(_) => {}
            SymExpr::Unary(_, e) => e.collect_vars(out),
            SymExpr::Binary(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
        }
    }

    /// Replaces every occurrence of `var` by `by`.
    pub fn substitute(&self, var: &str, by: &SymExpr) -> SymExpr {
        match self {
            SymExpr::Var(v) if v == var => by.clone(),
            SymExpr::Var(_) | SymExpr::Intervals(_) => self.clone(),
            SymExpr::Unary(op, e) => SymExpr::unary(*op, e.substitute(var, by)),
            SymExpr::Binary(op, l, r) => {
                SymExpr::binary(*op, l.substitute(var, by), r.substitute(var, by))
            }
        }
    }

    /// Expressions whose value in a concrete environment is a single number
    /// given exactly by arithmetic: variables, singletons, and operators
    /// that are total and exactly representable in linear/nonlinear
    /// integer arithmetic.
    pub fn is_exact(&self) -> bool {
        match self {
            SymExpr::Var(_) => true,
            SymExpr::Intervals(s) => s.as_point().is_some(),
            SymExpr::Unary(_, e) => e.is_exact(),
            SymExpr::Binary(SymOp::Union, ..) => false,
            SymExpr::Binary(SymOp::Bin(op), l, r) => {
                let ok_op = match op {
                    BinOp::Add
                    | BinOp::Mul
                    | BinOp::Eq
                    | BinOp::Lt
                    | BinOp::And
                    | BinOp::Or => true,
                    BinOp::Div | BinOp::Rem => r.as_point().is_some_and(|d| d != 0),
                    BinOp::Shl | BinOp::Shr => r.as_point().is_some_and(|k| (0..=64).contains(&k)),
                    BinOp::BitAnd | BinOp::BitOr | BinOp::BitXor => false,
                };
                ok_op && l.is_exact() && r.is_exact()
            }
        }
    }

    /// Evaluates to a set, with `env` giving the set of each variable.
    pub fn eval(&self, env: &dyn Fn(&str) -> IntervalSet) -> IntervalSet {
        match self {
            SymExpr::Var(v) => env(v),
            SymExpr::Intervals(s) => s.clone(),
            SymExpr::Unary(op, e) => {
                let a = e.eval(env);
                match op {
                    UnOp::Not => a.logical_not(),
                    UnOp::BitNot => a.bit_not(),
                    UnOp::Neg => a.neg(),
                }
            }
            SymExpr::Binary(op, l, r) => {
                // an exact term compared with itself
                if l == r && l.is_exact() {
                    match op {
                        SymOp::Bin(BinOp::Eq) => return IntervalSet::point(1),
                        SymOp::Bin(BinOp::Lt) => return IntervalSet::point(0),
                        _ => {}
                    }
                }
                let a = l.eval(env);
                let b = r.eval(env);
                apply(*op, &a, &b)
            }
        }
    }

    /// Evaluates variable-free sub-expressions to interval sets.
    pub fn fold(&self) -> SymExpr {
        if self.is_closed() {
            return SymExpr::Intervals(self.eval(&|_| IntervalSet::top()));
        }
        match self {
            SymExpr::Unary(op, e) => SymExpr::unary(*op, e.fold()),
            SymExpr::Binary(op, l, r) => SymExpr::binary(*op, l.fold(), r.fold()),
            _ => self.clone(),
        }
    }

    fn is_closed(&self) -> bool {
        match self {
            SymExpr::Var(_) => false,
            SymExpr::Intervals(_) => true,
            SymExpr::Unary(_, e) => e.is_closed(),
            SymExpr::Binary(_, l, r) => l.is_closed() && r.is_closed(),
        }
    }

    /// Limits the nesting depth to `n` by evaluating the sub-expressions
    /// that do not fit.
    pub fn truncate(&self, n: usize, env: &dyn Fn(&str) -> IntervalSet) -> SymExpr {
        let e = self.fold();
        e.truncate_folded(n.max(1), env)
    }

    fn truncate_folded(&self, n: usize, env: &dyn Fn(&str) -> IntervalSet) -> SymExpr {
        if self.depth() <= n {
            return self.clone();
        }
        if n == 1 {
            return SymExpr::Intervals(self.eval(env));
        }
        match self {
            SymExpr::Unary(op, e) => SymExpr::unary(*op, e.truncate_folded(n - 1, env)).fold(),
            SymExpr::Binary(op, l, r) => SymExpr::binary(
                *op,
                l.truncate_folded(n - 1, env),
                r.truncate_folded(n - 1, env),
            )
            .fold(),
            leaf => leaf.clone(),
        }
    }

    /// Lifts a program expression; `leaf` decides how each variable is
    /// represented.
    pub fn from_expr(e: &Expr, leaf: &dyn Fn(&str) -> SymExpr) -> SymExpr {
        match e {
            Expr::Const(c) => SymExpr::point(*c as i128),
            Expr::Var(v) => leaf(v),
            Expr::Unary(op, a) => SymExpr::unary(*op, SymExpr::from_expr(a, leaf)),
            Expr::Binary(op, a, b) => SymExpr::binary(
                SymOp::Bin(*op),
                SymExpr::from_expr(a, leaf),
                SymExpr::from_expr(b, leaf),
            ),
        }
    }
}

/// Applies an abstract binary operator to two sets.
pub fn apply(op: SymOp, a: &IntervalSet, b: &IntervalSet) -> IntervalSet {
    match op {
        SymOp::Union => a.union(b),
        SymOp::Bin(op) => match op {
            BinOp::Add => a.add(b),
            BinOp::Mul => a.mul(b),
            BinOp::Div => a.div(b),
            BinOp::Rem => a.rem(b),
            BinOp::Eq => a.eq_cmp(b),
            BinOp::Lt => a.lt_cmp(b),
            BinOp::BitXor => a.bit_xor(b),
            BinOp::BitOr => a.bit_or(b),
            BinOp::Or => a.logical_or(b),
            BinOp::BitAnd => a.bit_and(b),
            BinOp::And => a.logical_and(b),
            BinOp::Shr => a.shr(b),
            BinOp::Shl => a.shl(b),
        },
    }
}

impl fmt::Display for SymExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SymExpr::Var(v) => write!(f, "{v}"),
            SymExpr::Intervals(s) => write!(f, "{s}"),
            SymExpr::Unary(op, e) => write!(f, "{}({e})", op.symbol()),
            SymExpr::Binary(op, l, r) => write!(f, "({l} {op} {r})"),
        }
    }
}
