//! Quantifier-free first-order terms over mathematical integers and their
//! SMT-LIB2 rendering.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sort {
    Int,
    Bool,
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Int => write!(f, "Int"),
            Sort::Bool => write!(f, "Bool"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Bool(bool),
    Int(BigInt),
    Const(String, Sort),
    Not(Box<Term>),
    And(Vec<Term>),
    Or(Vec<Term>),
    Eq(Box<Term>, Box<Term>),
    Le(Box<Term>, Box<Term>),
    Lt(Box<Term>, Box<Term>),
    Add(Vec<Term>),
    Mul(Vec<Term>),
    Neg(Box<Term>),
    /// Euclidean division as in SMT-LIB `div`.
    Div(Box<Term>, Box<Term>),
    /// Euclidean remainder as in SMT-LIB `mod`.
    Mod(Box<Term>, Box<Term>),
    Ite(Box<Term>, Box<Term>, Box<Term>),
    /// Uninterpreted `Int^n -> Int` function.
    App(String, Vec<Term>),
}

/// Concrete value of a term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Int(BigInt),
    Bool(bool),
}

impl Value {
    pub fn as_int(&self) -> Option<&BigInt> {
        match self {
            Value::Int(v) => Some(v),
            Value::Bool(_) => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            Value::Int(_) => None,
        }
    }
}

impl Term {
    pub fn tt() -> Term {
        Term::Bool(true)
    }

    pub fn ff() -> Term {
        Term::Bool(false)
    }

    pub fn int(v: impl Into<BigInt>) -> Term {
        Term::Int(v.into())
    }

    pub fn int_var(name: impl Into<String>) -> Term {
        Term::Const(name.into(), Sort::Int)
    }

    pub fn bool_var(name: impl Into<String>) -> Term {
        Term::Const(name.into(), Sort::Bool)
    }

    pub fn is_true(&self) -> bool {
        *self == Term::Bool(true)
    }

    pub fn is_false(&self) -> bool {
        *self == Term::Bool(false)
    }

    pub fn not(t: Term) -> Term {
        match t {
            Term::Bool(b) => Term::Bool(!b),
            Term::Not(inner) => *inner,
            other => Term::Not(Box::new(other)),
        }
    }

    pub fn and(items: impl IntoIterator<Item = Term>) -> Term {
        let mut out = Vec::new();
        for t in items {
            match t {
                Term::Bool(true) => {}
                Term::Bool(false) => return Term::ff(),
                Term::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Term::tt(),
            1 => out.pop().unwrap(),
            _ => Term::And(out),
        }
    }

    pub fn or(items: impl IntoIterator<Item = Term>) -> Term {
        let mut out = Vec::new();
        for t in items {
            match t {
                Term::Bool(false) => {}
                Term::Bool(true) => return Term::tt(),
                Term::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Term::ff(),
            1 => out.pop().unwrap(),
            _ => Term::Or(out),
        }
    }

    pub fn implies(a: Term, b: Term) -> Term {
        Term::or([Term::not(a), b])
    }

    pub fn eq(a: Term, b: Term) -> Term {
        if a == b {
            return Term::tt();
        }
        match (&a, &b) {
            (Term::Int(x), Term::Int(y)) => Term::Bool(x == y),
            (Term::Bool(x), Term::Bool(y)) => Term::Bool(x == y),
            _ => Term::Eq(Box::new(a), Box::new(b)),
        }
    }

    pub fn ne(a: Term, b: Term) -> Term {
        Term::not(Term::eq(a, b))
    }

    pub fn le(a: Term, b: Term) -> Term {
        match (&a, &b) {
            (Term::Int(x), Term::Int(y)) => Term::Bool(x <= y),
            _ => Term::Le(Box::new(a), Box::new(b)),
        }
    }

    pub fn lt(a: Term, b: Term) -> Term {
        match (&a, &b) {
            (Term::Int(x), Term::Int(y)) => Term::Bool(x < y),
            _ => Term::Lt(Box::new(a), Box::new(b)),
        }
    }

    pub fn ge(a: Term, b: Term) -> Term {
        Term::le(b, a)
    }

    pub fn add(items: impl IntoIterator<Item = Term>) -> Term {
        let mut out = Vec::new();
        let mut c = BigInt::zero();
        for t in items {
            match t {
                Term::Int(v) => c += v,
                Term::Add(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        if !c.is_zero() || out.is_empty() {
            out.push(Term::Int(c));
        }
        if out.len() == 1 {
            out.pop().unwrap()
        } else {
            Term::Add(out)
        }
    }

    pub fn mul(a: Term, b: Term) -> Term {
        match (&a, &b) {
            (Term::Int(x), Term::Int(y)) => Term::Int(x * y),
            (Term::Int(x), _) if x.is_zero() => Term::int(0),
            (_, Term::Int(y)) if y.is_zero() => Term::int(0),
            (Term::Int(x), _) if *x == BigInt::from(1) => b,
            (_, Term::Int(y)) if *y == BigInt::from(1) => a,
            _ => Term::Mul(vec![a, b]),
        }
    }

    pub fn neg(a: Term) -> Term {
        match a {
            Term::Int(v) => Term::Int(-v),
            Term::Neg(inner) => *inner,
            other => Term::Neg(Box::new(other)),
        }
    }

    pub fn div(a: Term, b: Term) -> Term {
        Term::Div(Box::new(a), Box::new(b))
    }

    pub fn modulo(a: Term, b: Term) -> Term {
        Term::Mod(Box::new(a), Box::new(b))
    }

    pub fn ite(c: Term, t: Term, e: Term) -> Term {
        match c {
            Term::Bool(true) => t,
            Term::Bool(false) => e,
            _ if t == e => t,
            c => Term::Ite(Box::new(c), Box::new(t), Box::new(e)),
        }
    }

    pub fn app(f: impl Into<String>, args: Vec<Term>) -> Term {
        Term::App(f.into(), args)
    }

    fn children(&self) -> Vec<&Term> {
        match self {
            Term::Bool(_) | Term::Int(_) | Term::Const(..) => vec![],
            Term::Not(a) | Term::Neg(a) => vec![a],
            Term::And(v) | Term::Or(v) | Term::Add(v) | Term::Mul(v) | Term::App(_, v) => {
                v.iter().collect()
            }
            Term::Eq(a, b) | Term::Le(a, b) | Term::Lt(a, b) | Term::Div(a, b) | Term::Mod(a, b) => {
                vec![a, b]
            }
            Term::Ite(c, t, e) => vec![c, t, e],
        }
    }

    /// Free constants with their sorts.
    pub fn constants(&self, out: &mut BTreeMap<String, Sort>) {
        let mut stack = vec![self];
        while let Some(t) = stack.pop() {
            if let Term::Const(n, s) = t {
                out.insert(n.clone(), *s);
            }
            stack.extend(t.children());
        }
    }

    /// Uninterpreted functions with their arities.
    pub fn functions(&self, out: &mut BTreeMap<String, usize>) {
        let mut stack = vec![self];
        while let Some(t) = stack.pop() {
            if let Term::App(f, args) = t {
                out.insert(f.clone(), args.len());
            }
            stack.extend(t.children());
        }
    }

    /// True if some product has two non-constant factors, or a division or
    /// remainder has a non-constant divisor.
    pub fn is_nonlinear(&self) -> bool {
        let mut stack = vec![self];
        while let Some(t) = stack.pop() {
            match t {
                Term::Mul(v) if v.iter().filter(|x| !matches!(x, Term::Int(_))).count() > 1 => {
                    return true
                }
                Term::Div(_, b) | Term::Mod(_, b) if !matches!(**b, Term::Int(_)) => return true,
                _ => {}
            }
            stack.extend(t.children());
        }
        false
    }

    /// Renames every constant.
    pub fn rename(&self, f: &dyn Fn(&str) -> String) -> Term {
        self.map_consts(&|n, s| Term::Const(f(n), s))
    }

    /// Replaces every constant by the term `f` returns for it.
    pub fn map_consts(&self, f: &dyn Fn(&str, Sort) -> Term) -> Term {
        let m = |t: &Term| t.map_consts(f);
        let b = |t: &Term| Box::new(t.map_consts(f));
        match self {
            Term::Bool(_) | Term::Int(_) => self.clone(),
            Term::Const(n, s) => f(n, *s),
            Term::Not(a) => Term::Not(b(a)),
            Term::Neg(a) => Term::Neg(b(a)),
            Term::And(v) => Term::And(v.iter().map(m).collect()),
            Term::Or(v) => Term::Or(v.iter().map(m).collect()),
            Term::Add(v) => Term::Add(v.iter().map(m).collect()),
            Term::Mul(v) => Term::Mul(v.iter().map(m).collect()),
            Term::App(g, v) => Term::App(g.clone(), v.iter().map(m).collect()),
            Term::Eq(x, y) => Term::Eq(b(x), b(y)),
            Term::Le(x, y) => Term::Le(b(x), b(y)),
            Term::Lt(x, y) => Term::Lt(b(x), b(y)),
            Term::Div(x, y) => Term::Div(b(x), b(y)),
            Term::Mod(x, y) => Term::Mod(b(x), b(y)),
            Term::Ite(c, t, e) => Term::Ite(b(c), b(t), b(e)),
        }
    }

    /// Evaluates under `env`; `None` if a constant is unbound or the term
    /// involves an unspecified value (division by zero, uninterpreted
    /// functions).
    pub fn eval(&self, env: &dyn Fn(&str) -> Option<Value>) -> Option<Value> {
        let int = |t: &Term| t.eval(env).and_then(|v| v.as_int().cloned());
        let boolean = |t: &Term| t.eval(env).and_then(|v| v.as_bool());
        Some(match self {
            Term::Bool(b) => Value::Bool(*b),
            Term::Int(v) => Value::Int(v.clone()),
            Term::Const(n, _) => return env(n),
            Term::Not(a) => Value::Bool(!boolean(a)?),
            Term::And(v) => {
                for t in v {
                    if !boolean(t)? {
                        return Some(Value::Bool(false));
                    }
                }
                Value::Bool(true)
            }
            Term::Or(v) => {
                for t in v {
                    if boolean(t)? {
                        return Some(Value::Bool(true));
                    }
                }
                Value::Bool(false)
            }
            Term::Eq(a, b) => Value::Bool(a.eval(env)? == b.eval(env)?),
            Term::Le(a, b) => Value::Bool(int(a)? <= int(b)?),
            Term::Lt(a, b) => Value::Bool(int(a)? < int(b)?),
            Term::Add(v) => {
                let mut s = BigInt::zero();
                for t in v {
                    s += int(t)?;
                }
                Value::Int(s)
            }
            Term::Mul(v) => {
                let mut s = BigInt::from(1);
                for t in v {
                    s *= int(t)?;
                }
                Value::Int(s)
            }
            Term::Neg(a) => Value::Int(-int(a)?),
            Term::Div(a, b) => {
                let (a, b) = (int(a)?, int(b)?);
                if b.is_zero() {
                    return None;
                }
                let r = a.mod_floor(&b.abs());
                Value::Int((a - r) / b)
            }
            Term::Mod(a, b) => {
                let (a, b) = (int(a)?, int(b)?);
                if b.is_zero() {
                    return None;
                }
                Value::Int(a.mod_floor(&b.abs()))
            }
            Term::Ite(c, t, e) => {
                if boolean(c)? {
                    t.eval(env)?
                } else {
                    e.eval(env)?
                }
            }
            Term::App(..) => return None,
        })
    }

    pub fn write_smt(&self, out: &mut String) {
        let list = |out: &mut String, head: &str, items: &[&Term]| {
            out.push('(');
            out.push_str(head);
            for t in items {
                out.push(' ');
                t.write_smt(out);
            }
            out.push(')');
        };
        match self {
            Term::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Term::Int(v) => {
                if v.is_negative() {
                    let _ = write!(out, "(- {})", -v);
                } else {
                    let _ = write!(out, "{v}");
                }
            }
            Term::Const(n, _) => out.push_str(&quote_symbol(n)),
            Term::Not(a) => list(out, "not", &[a]),
            Term::Neg(a) => list(out, "-", &[a]),
            Term::And(v) => list(out, "and", &v.iter().collect::<Vec<_>>()),
            Term::Or(v) => list(out, "or", &v.iter().collect::<Vec<_>>()),
            Term::Add(v) => list(out, "+", &v.iter().collect::<Vec<_>>()),
            Term::Mul(v) => list(out, "*", &v.iter().collect::<Vec<_>>()),
            Term::App(f, v) => list(out, &quote_symbol(f), &v.iter().collect::<Vec<_>>()),
            Term::Eq(a, b) => list(out, "=", &[a, b]),
            Term::Le(a, b) => list(out, "<=", &[a, b]),
            Term::Lt(a, b) => list(out, "<", &[a, b]),
            Term::Div(a, b) => list(out, "div", &[a, b]),
            Term::Mod(a, b) => list(out, "mod", &[a, b]),
            Term::Ite(c, t, e) => list(out, "ite", &[c, t, e]),
        }
    }

    pub fn to_smt(&self) -> String {
        let mut s = String::new();
        self.write_smt(&mut s);
        s
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_smt())
    }
}

/// Quotes a symbol with `|...|` unless it is a valid simple symbol.
pub fn quote_symbol(s: &str) -> String {
    let simple = !s.is_empty()
        && !s.starts_with(|c: char| c.is_ascii_digit())
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || "~!@$%^&*_-+=<>.?/".contains(c));
    if simple {
        s.to_string()
    } else {
        format!("|{s}|")
    }
}

/// A formula with top-level definitions. `defs` are conjuncts that only fix
/// auxiliary constants as functions of the others; negating the formula
/// negates `body` alone.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Formula {
    pub defs: Vec<Term>,
    pub body: Term,
}

impl Formula {
    pub fn new(body: Term) -> Formula {
        Formula {
            defs: Vec::new(),
            body,
        }
    }

    pub fn tt() -> Formula {
        Formula::new(Term::tt())
    }

    /// Conjunction; definitions are concatenated.
    pub fn and(mut self, other: Formula) -> Formula {
        self.defs.extend(other.defs);
        self.body = Term::and([self.body, other.body]);
        self
    }

    pub fn negate(mut self) -> Formula {
        self.body = Term::not(self.body);
        self
    }

    /// All conjuncts to assert: the definitions followed by the body.
    pub fn assertions(&self) -> impl Iterator<Item = &Term> {
        self.defs.iter().chain(std::iter::once(&self.body))
    }

    pub fn constants(&self) -> BTreeMap<String, Sort> {
        let mut out = BTreeMap::new();
        for t in self.assertions() {
            t.constants(&mut out);
        }
        out
    }

    pub fn functions(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for t in self.assertions() {
            t.functions(&mut out);
        }
        out
    }

    pub fn is_nonlinear(&self) -> bool {
        self.assertions().any(Term::is_nonlinear)
    }

    /// Standalone SMT-LIB2 script checking satisfiability.
    pub fn to_script(&self, logic: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "(set-logic {logic})");
        for (f, arity) in self.functions() {
            let args = vec!["Int"; arity].join(" ");
            let _ = writeln!(s, "(declare-fun {} ({args}) Int)", quote_symbol(&f));
        }
        for (c, sort) in self.constants() {
            let _ = writeln!(s, "(declare-const {} {sort})", quote_symbol(&c));
        }
        for t in self.assertions() {
            let _ = writeln!(s, "(assert {})", t.to_smt());
        }
        s.push_str("(check-sat)\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smart_constructors_simplify() {
        let x = Term::int_var("x");
        assert!(Term::and([Term::tt(), Term::tt()]).is_true());
        assert!(Term::and([Term::le(x.clone(), x.clone()), Term::ff()]).is_false());
        assert_eq!(Term::not(Term::not(x.clone())), x);
        assert_eq!(Term::add([Term::int(1), Term::int(2)]), Term::int(3));
    }

    #[test]
    fn renders_negative_literals() {
        let t = Term::eq(Term::int_var("x@0"), Term::int(-3));
        assert_eq!(t.to_smt(), "(= x@0 (- 3))");
    }

    #[test]
    fn euclidean_division_semantics() {
        let env = |_: &str| None;
        let d = Term::div(Term::int(-7), Term::int(2)).eval(&env).unwrap();
        let m = Term::modulo(Term::int(-7), Term::int(2)).eval(&env).unwrap();
        assert_eq!(d, Value::Int(BigInt::from(-4)));
        assert_eq!(m, Value::Int(BigInt::from(1)));
        let d = Term::div(Term::int(7), Term::int(-2)).eval(&env).unwrap();
        assert_eq!(d, Value::Int(BigInt::from(-3)));
    }

    #[test]
    fn quoting() {
        assert_eq!(quote_symbol("x@1"), "x@1");
        assert_eq!(quote_symbol("a b"), "|a b|");
    }
}
