//! SSA encoding of a normalized CFA into the formulas checked by k-induction.
//!
//! A frame is one visit of the loop head. Frame `i` owns the constants
//! `x@i` for every state variable. The code between two consecutive visits
//! (and the code from the entry to the first visit) is acyclic once edges
//! into the loop head are cut, so each such region is encoded in
//! topological order: every location gets a reach guard, every edge a
//! taken condition, and values are merged with `ite` where paths join.
//!
//! Symbol naming, with `tag` either `pre`, `init` or a frame index:
//! `x@tag.h<e>` havoc value of edge `e`, `x@tag.a<e>` assigned value,
//! `x@tag.m<l>` merged value at location `l`, `g!tag.<l>` reach guard,
//! `t!tag.<e>` edge taken. Program identifiers cannot contain `@` or `!`,
//! so none of these clash with program variables.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::cfa::{Loc, Op};
use crate::expr::{BinOp, Expr, UnOp};
use crate::formula::{Formula, Term};
use crate::interp::{apply_binop, Interpreter, Outcome, Trace, MAX_SHIFT};
use crate::normalize::NormalizedCfa;

/// Which variables the step case leaves unconstrained at its first frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum HavocStrategy {
    /// Every state variable is free.
    #[default]
    SoundAll,
    /// Variables written in the loop are free; the rest keep the values
    /// they have on first reaching the loop head.
    SoundLoopModified,
    /// Only variables read by loop exit conditions are free. Unsound.
    UnsoundTerminationVars,
}

impl HavocStrategy {
    pub fn is_sound(self) -> bool {
        !matches!(self, HavocStrategy::UnsoundTerminationVars)
    }
}

impl fmt::Display for HavocStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HavocStrategy::SoundAll => "all",
            HavocStrategy::SoundLoopModified => "loop-modified",
            HavocStrategy::UnsoundTerminationVars => "termination-vars",
        })
    }
}

impl FromStr for HavocStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => Ok(HavocStrategy::SoundAll),
            "loop-modified" => Ok(HavocStrategy::SoundLoopModified),
            "termination-vars" => Ok(HavocStrategy::UnsoundTerminationVars),
            other => Err(format!(
                "unknown havoc strategy `{other}` (expected all, loop-modified or termination-vars)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("cycle between loop-head visits through {0}")]
    Cyclic(Loc),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("model has no value for `{0}`")]
    ModelIncomplete(String),
    #[error("replayed trace does not reach the error location")]
    ReplayFailed,
}

/// Step-case query split for incremental solving: `persistent` holds the
/// unrolled frames, `delta` the invariant instances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepQuery {
    pub persistent: Formula,
    pub delta: Formula,
}

impl StepQuery {
    pub fn monolithic(&self) -> Formula {
        self.persistent.clone().and(self.delta.clone())
    }
}

/// Encoding of one acyclic region.
struct Region {
    defs: Vec<Term>,
    /// Reaches the loop head again.
    arrive: Term,
    /// State-variable values on arrival.
    next: BTreeMap<String, Term>,
    /// Reaches the error location.
    error: Term,
}

type Vals = BTreeMap<String, Term>;

/// The loop as a transition system over loop-head frames.
#[derive(Debug, Clone)]
pub struct TransitionSystem {
    ncfa: NormalizedCfa,
    state_vars: Vec<String>,
    pre_order: Vec<Loc>,
    body_order: Vec<Loc>,
}

impl TransitionSystem {
    pub fn new(ncfa: &NormalizedCfa) -> Result<TransitionSystem, EncodeError> {
        let mut ts = TransitionSystem {
            ncfa: ncfa.clone(),
            state_vars: ncfa.state_vars(),
            pre_order: Vec::new(),
            body_order: Vec::new(),
        };
        if !ts.loop_at_entry() {
            ts.pre_order = ts.region_order(ncfa.cfa.entry())?;
        }
        ts.body_order = ts.region_order(ncfa.loop_head)?;
        Ok(ts)
    }

    pub fn ncfa(&self) -> &NormalizedCfa {
        &self.ncfa
    }

    pub fn state_vars(&self) -> &[String] {
        &self.state_vars
    }

    fn head(&self) -> Loc {
        self.ncfa.loop_head
    }

    fn loop_at_entry(&self) -> bool {
        self.head() == self.ncfa.cfa.entry()
    }

    /// Name of the frame copy of a state variable.
    pub fn frame_var(var: &str, frame: usize) -> String {
        format!("{var}@{frame}")
    }

    fn frame_vals(&self, frame: &str) -> Vals {
        self.state_vars
            .iter()
            .map(|v| (v.clone(), Term::int_var(format!("{v}@{frame}"))))
            .collect()
    }

    /// Topological order of the locations reachable from `start` without
    /// re-entering the loop head.
    fn region_order(&self, start: Loc) -> Result<Vec<Loc>, EncodeError> {
        let cfa = &self.ncfa.cfa;
        let head = self.head();
        let mut members = BTreeSet::from([start]);
        let mut stack = vec![start];
        while let Some(l) = stack.pop() {
            for &e in cfa.out_edges(l) {
                let d = cfa.edge(e).dst;
                if d != head && members.insert(d) {
                    stack.push(d);
                }
            }
        }
        let mut indeg: HashMap<Loc, usize> = members.iter().map(|&l| (l, 0)).collect();
        for &l in &members {
            for &e in cfa.out_edges(l) {
                let d = cfa.edge(e).dst;
                if d != head && d != start {
                    *indeg.get_mut(&d).unwrap() += 1;
                }
            }
        }
        let mut order = Vec::new();
        let mut ready = vec![start];
        while let Some(l) = ready.pop() {
            order.push(l);
            for &e in cfa.out_edges(l) {
                let d = cfa.edge(e).dst;
                if d == head || d == start {
                    continue;
                }
                let n = indeg.get_mut(&d).unwrap();
                *n -= 1;
                if *n == 0 {
                    ready.push(d);
                }
            }
        }
        if order.len() != members.len() {
            let stuck = members
                .iter()
                .find(|l| !order.contains(l))
                .copied()
                .unwrap_or(start);
            return Err(EncodeError::Cyclic(stuck));
        }
        Ok(order)
    }

    fn encode_region(&self, order: &[Loc], inputs: Vals, tag: &str) -> Region {
        let cfa = &self.ncfa.cfa;
        let head = self.head();
        let start = order[0];
        let mut defs = Vec::new();
        let mut guard: HashMap<Loc, Term> = HashMap::new();
        let mut vals: HashMap<Loc, Vals> = HashMap::new();
        // (edge, taken, values after the edge) per target
        let mut pending: HashMap<Loc, Vec<(usize, Term, Vals)>> = HashMap::new();
        let mut arrivals = Vec::new();

        for &l in order {
            if l == start {
                guard.insert(l, Term::tt());
                vals.insert(l, inputs.clone());
            } else {
                let incoming = pending.remove(&l).unwrap_or_default();
                let (g, v) = self.join(incoming, &l.0.to_string(), tag, &mut defs);
                guard.insert(l, g);
                vals.insert(l, v);
            }
            if l == cfa.error() {
                continue;
            }
            let g = guard[&l].clone();
            if g.is_false() {
                continue;
            }
            for &e in cfa.out_edges(l) {
                let (cond, post) = self.edge_post(e, &vals[&l], tag, &mut defs);
                let taken = Term::and([g.clone(), cond]);
                if taken.is_false() {
                    continue;
                }
                let d = cfa.edge(e).dst;
                if d == head {
                    arrivals.push((e, taken, post));
                } else {
                    pending.entry(d).or_default().push((e, taken, post));
                }
            }
        }

        let error = guard.get(&cfa.error()).cloned().unwrap_or_else(Term::ff);
        let (arrive, all) = self.join(arrivals, "next", tag, &mut defs);
        let next = self
            .state_vars
            .iter()
            .map(|v| (v.clone(), all.get(v).cloned().unwrap_or_else(|| Term::int(0))))
            .collect();
        Region {
            defs,
            arrive,
            next,
            error,
        }
    }

    /// Joins the incoming edges of a location into a reach guard and merged
    /// values.
    fn join(
        &self,
        mut incoming: Vec<(usize, Term, Vals)>,
        at: &str,
        tag: &str,
        defs: &mut Vec<Term>,
    ) -> (Term, Vals) {
        match incoming.len() {
            0 => (Term::ff(), Vals::new()),
            1 => {
                let (_, taken, vals) = incoming.pop().unwrap();
                (define(defs, Term::bool_var(format!("g!{tag}.{at}")), taken), vals)
            }
            _ => {
                let mut conds = Vec::new();
                for (e, taken, _) in &incoming {
                    conds.push(define(defs, Term::bool_var(format!("t!{tag}.{e}")), taken.clone()));
                }
                let g = define(defs, Term::bool_var(format!("g!{tag}.{at}")), Term::or(conds.clone()));
                let mut merged = Vals::new();
                let vars: BTreeSet<&String> = incoming.iter().flat_map(|(_, _, v)| v.keys()).collect();
                for var in vars {
                    let values: Vec<Term> = incoming
                        .iter()
                        .map(|(_, _, v)| v.get(var).cloned().unwrap_or_else(|| Term::int(0)))
                        .collect();
                    if values.iter().all(|t| *t == values[0]) {
                        merged.insert(var.clone(), values[0].clone());
                        continue;
                    }
                    let mut it = values.iter().zip(&conds).rev();
                    let (last, _) = it.next().unwrap();
                    let mut term = last.clone();
                    for (v, c) in it {
                        term = Term::ite(c.clone(), v.clone(), term);
                    }
                    let m = define(defs, Term::int_var(format!("{var}@{tag}.m{at}")), term);
                    merged.insert(var.clone(), m);
                }
                (g, merged)
            }
        }
    }

    /// Condition under which edge `e` fires and the values after it.
    fn edge_post(&self, e: usize, vals: &Vals, tag: &str, defs: &mut Vec<Term>) -> (Term, Vals) {
        match &self.ncfa.cfa.edge(e).op {
            Op::Assume(c) => {
                let (b, d) = lower_bool(c, vals);
                (Term::and([d, b]), vals.clone())
            }
            Op::Assign(x, rhs) => {
                let (v, d) = lower_int(rhs, vals);
                let v = match v {
                    Term::Int(_) | Term::Const(..) => v,
                    other => define(defs, Term::int_var(format!("{x}@{tag}.a{e}")), other),
                };
                let mut next = vals.clone();
                next.insert(x.clone(), v);
                (d, next)
            }
            Op::Havoc(x) => {
                let mut next = vals.clone();
                next.insert(x.clone(), Term::int_var(havoc_symbol(x, tag, e)));
                (Term::tt(), next)
            }
        }
    }

    fn zero_inputs(&self) -> Vals {
        self.ncfa
            .cfa
            .vars()
            .iter()
            .map(|v| (v.clone(), Term::int(0)))
            .collect()
    }

    fn inputs_from(&self, frame: &str) -> Vals {
        let mut vals = self.zero_inputs();
        vals.extend(self.frame_vals(frame));
        vals
    }

    /// Initial-state predicate targeting the frame named `frame`, together
    /// with the condition that the pre-loop code itself reaches the error.
    fn init_into(&self, frame: &str, tag: &str) -> (Formula, Term) {
        let target = self.frame_vals(frame);
        if self.loop_at_entry() {
            let body = Term::and(target.values().map(|t| Term::eq(t.clone(), Term::int(0))));
            return (Formula::new(body), Term::ff());
        }
        let r = self.encode_region(&self.pre_order, self.zero_inputs(), tag);
        let body = Term::and(
            std::iter::once(r.arrive).chain(
                self.state_vars
                    .iter()
                    .map(|v| Term::eq(target[v].clone(), r.next[v].clone())),
            ),
        );
        (
            Formula {
                defs: r.defs,
                body,
            },
            r.error,
        )
    }

    /// `I` over frame 0.
    pub fn init(&self) -> Formula {
        self.init_into("0", "pre").0
    }

    /// One loop iteration from frame `i`: defines `tr!i` (reaches frame
    /// `i+1` with the given values) and `er!i` (reaches the error location).
    fn frame(&self, i: usize) -> (Vec<Term>, Term, Term) {
        let r = self.encode_region(&self.body_order, self.inputs_from(&i.to_string()), &i.to_string());
        let next = self.frame_vals(&(i + 1).to_string());
        let mut defs = r.defs;
        let tr_body = Term::and(
            std::iter::once(r.arrive).chain(
                self.state_vars
                    .iter()
                    .map(|v| Term::eq(next[v].clone(), r.next[v].clone())),
            ),
        );
        let tr = define(&mut defs, Term::bool_var(format!("tr!{i}")), tr_body);
        let er = define(&mut defs, Term::bool_var(format!("er!{i}")), r.error);
        (defs, tr, er)
    }

    /// `T(i, i+1)`.
    pub fn transition(&self, i: usize) -> Formula {
        let (defs, tr, _) = self.frame(i);
        Formula { defs, body: tr }
    }

    /// `P(i)`: the iteration starting at frame `i` does not reach the error.
    pub fn property(&self, i: usize) -> Formula {
        let (defs, _, er) = self.frame(i);
        Formula {
            defs,
            body: Term::not(er),
        }
    }

    /// Satisfiable iff an execution reaches the error location within at
    /// most `k` complete loop iterations.
    pub fn encode_base_case(&self, k: usize) -> Formula {
        self.encode_base_case_from(0, k)
    }

    /// Base case restricted to violations in iterations `from..=k`; a
    /// violation before the loop is included only when `from` is 0.
    pub fn encode_base_case_from(&self, from: usize, k: usize) -> Formula {
        // `f.body` says the head is reached; an error before the loop
        // must not depend on that
        let (mut f, pre_err) = self.init_into("0", "pre");
        let mut trs = Vec::new();
        let mut disjuncts = Vec::new();
        // without a loop there is no second visit of the head
        let last = if self.ncfa.has_loop() { k } else { 0 };
        for n in 0..=last {
            let (defs, tr, er) = self.frame(n);
            f.defs.extend(defs);
            if n >= from {
                disjuncts.push(Term::and(trs.iter().cloned().chain([er])));
            }
            trs.push(tr);
        }
        let in_loop = Term::and([f.body, Term::or(disjuncts)]);
        f.body = if from == 0 {
            Term::or([pre_err, in_loop])
        } else {
            in_loop
        };
        f
    }

    /// Satisfiable iff some execution completes `k` loop iterations.
    pub fn encode_forward_condition(&self, k: usize) -> Formula {
        let mut f = self.init();
        let mut trs = Vec::new();
        for n in 0..k {
            let (defs, tr, _) = self.frame(n);
            f.defs.extend(defs);
            trs.push(tr);
        }
        f.body = Term::and(std::iter::once(f.body).chain(trs));
        f
    }

    /// Variables free at the first step-case frame.
    pub fn havoc_set(&self, strategy: HavocStrategy) -> BTreeSet<String> {
        let all: BTreeSet<String> = self.state_vars.iter().cloned().collect();
        match strategy {
            HavocStrategy::SoundAll => all,
            HavocStrategy::SoundLoopModified => {
                let mut s = self.ncfa.loop_modified_vars();
                if self.ncfa.pc_used {
                    s.insert(self.ncfa.pc_var.clone());
                }
                s.intersection(&all).cloned().collect()
            }
            HavocStrategy::UnsoundTerminationVars => self
                .ncfa
                .termination_condition_vars()
                .intersection(&all)
                .cloned()
                .collect(),
        }
    }

    /// `k` safe iterations followed by a violating one, from a start frame
    /// constrained only by the havoc strategy, with `inv` at every frame.
    pub fn encode_step_case(&self, k: usize, inv: &Formula, strategy: HavocStrategy) -> StepQuery {
        let mut persistent = Formula::tt();
        let mut parts = Vec::new();
        let havoc = self.havoc_set(strategy);
        if havoc.len() < self.state_vars.len() {
            let (init, _) = self.init_into("init", "init");
            persistent = persistent.and(init);
            for v in &self.state_vars {
                if !havoc.contains(v) {
                    parts.push(Term::eq(
                        Term::int_var(format!("{v}@0")),
                        Term::int_var(format!("{v}@init")),
                    ));
                }
            }
        }
        if self.ncfa.pc_used {
            for i in 0..=k {
                let pc = Term::int_var(Self::frame_var(&self.ncfa.pc_var, i));
                parts.push(Term::le(Term::int(1), pc.clone()));
                parts.push(Term::le(pc, Term::int(self.ncfa.num_loops as i64)));
            }
        }
        for n in 0..=k {
            let (defs, tr, er) = self.frame(n);
            persistent.defs.extend(defs);
            if n < k {
                parts.push(Term::not(er));
                parts.push(tr);
            } else {
                parts.push(er);
            }
        }
        persistent = persistent.and(Formula::new(Term::and(parts)));
        StepQuery {
            persistent,
            delta: self.instantiate(inv, 0..=k),
        }
    }

    /// Conjunction of `inv` renamed to each of the given frames.
    pub fn instantiate(&self, inv: &Formula, frames: impl IntoIterator<Item = usize>) -> Formula {
        let vars: BTreeSet<&str> = self.state_vars.iter().map(String::as_str).collect();
        let mut out = Formula::tt();
        for i in frames {
            let rename = |c: &str| {
                if vars.contains(c) {
                    Self::frame_var(c, i)
                } else {
                    format!("{c}@inv{i}")
                }
            };
            out = out.and(Formula {
                defs: inv.defs.iter().map(|d| d.rename(&rename)).collect(),
                body: inv.body.rename(&rename),
            });
        }
        out
    }

    /// Rebuilds the counterexample described by a model of the base case by
    /// replaying the program with the model's havoc values. Solvers leave
    /// out values that do not matter; those default to 0, and the replay
    /// decides whether the guess was harmless.
    pub fn extract_trace(
        &self,
        model: &dyn Fn(&str) -> Option<BigInt>,
        k: usize,
    ) -> Result<(Trace, usize), ExtractError> {
        let cfa = &self.ncfa.cfa;
        let interp = Interpreter::new(cfa);
        let head = self.head();
        let at_entry = self.loop_at_entry();
        let mut missing = None;
        let max_steps = (k + 2) * (cfa.num_locations() + 1);
        let run = interp.run_with(max_steps, |e, trace| {
            let visits = trace.steps.iter().filter(|s| s.state.loc == head).count();
            let tag = match (at_entry, visits) {
                (true, n) => n.to_string(),
                (false, 0) => "pre".to_string(),
                (false, n) => (n - 1).to_string(),
            };
            let x = cfa.edge(e).op.written_var().unwrap_or_default();
            let sym = havoc_symbol(x, &tag, e);
            Some(model(&sym).unwrap_or_else(|| {
                missing.get_or_insert(sym);
                BigInt::zero()
            }))
        });
        match run {
            Some(run) if run.outcome == Outcome::ErrorReached => Ok((run.trace, run.iterations)),
            _ => Err(match missing {
                Some(sym) => ExtractError::ModelIncomplete(sym),
                None => ExtractError::ReplayFailed,
            }),
        }
    }
}

/// Builds the transition system of a normalized CFA.
pub fn build_ts(ncfa: &NormalizedCfa) -> Result<TransitionSystem, EncodeError> {
    TransitionSystem::new(ncfa)
}

pub fn havoc_symbol(var: &str, tag: &str, edge: usize) -> String {
    format!("{var}@{tag}.h{edge}")
}

/// Adds `sym = value` to `defs` unless `value` is a literal, and returns
/// the term to use in its place.
fn define(defs: &mut Vec<Term>, sym: Term, value: Term) -> Term {
    match value {
        Term::Bool(_) | Term::Int(_) | Term::Const(..) => value,
        other => {
            defs.push(Term::eq(sym.clone(), other));
            sym
        }
    }
}

fn as_literal(t: &Term) -> Option<&BigInt> {
    match t {
        Term::Int(v) => Some(v),
        _ => None,
    }
}

fn pow2(n: u32) -> Term {
    Term::int(BigInt::one() << n as usize)
}

/// Lowers an expression to an integer term and its definedness condition.
pub fn lower_int(e: &Expr, vals: &Vals) -> (Term, Term) {
    match e {
        Expr::Const(c) => (Term::int(*c), Term::tt()),
        Expr::Var(v) => (vals.get(v).cloned().unwrap_or_else(|| Term::int(0)), Term::tt()),
        Expr::Unary(UnOp::Neg, a) => {
            let (a, d) = lower_int(a, vals);
            (Term::neg(a), d)
        }
        Expr::Unary(UnOp::BitNot, a) => {
            let (a, d) = lower_int(a, vals);
            (Term::add([Term::neg(a), Term::int(-1)]), d)
        }
        Expr::Unary(UnOp::Not, _) | Expr::Binary(BinOp::Eq | BinOp::Lt | BinOp::And | BinOp::Or, ..) => {
            let (b, d) = lower_bool(e, vals);
            (Term::ite(b, Term::int(1), Term::int(0)), d)
        }
        Expr::Binary(op, a, b) => {
            let (a, da) = lower_int(a, vals);
            let (b, db) = lower_int(b, vals);
            let defined = Term::and([da, db]);
            if let (Some(x), Some(y)) = (as_literal(&a), as_literal(&b)) {
                return match apply_binop(*op, x, y) {
                    Ok(v) => (Term::int(v), defined),
                    Err(_) => (Term::int(0), Term::ff()),
                };
            }
            let (t, d) = lower_arith(*op, a, b);
            (t, Term::and([defined, d]))
        }
    }
}

fn lower_arith(op: BinOp, a: Term, b: Term) -> (Term, Term) {
    let nonzero = |b: &Term| Term::ne(b.clone(), Term::int(0));
    match op {
        BinOp::Add => (Term::add([a, b]), Term::tt()),
        BinOp::Mul => (Term::mul(a, b), Term::tt()),
        BinOp::Div => {
            // truncating division from the Euclidean one
            let d = nonzero(&b);
            let t = Term::ite(
                Term::ge(a.clone(), Term::int(0)),
                Term::div(a.clone(), b.clone()),
                Term::neg(Term::div(Term::neg(a), b)),
            );
            (t, d)
        }
        BinOp::Rem => {
            let d = nonzero(&b);
            (Term::modulo(a, b), d)
        }
        BinOp::BitAnd => {
            // `a & (2^z - 1)` is `a mod 2^z` in two's complement
            let mask = |t: &Term| {
                let m1 = as_literal(t).filter(|m| !m.is_negative())? + 1u32;
                let z = m1.trailing_zeros()?;
                (BigInt::one() << z as usize == m1).then_some(z)
            };
            if let Some(z) = mask(&b) {
                (Term::modulo(a, pow2(z as u32)), Term::tt())
            } else if let Some(z) = mask(&a) {
                (Term::modulo(b, pow2(z as u32)), Term::tt())
            } else {
                (Term::app("int_and", vec![a, b]), Term::tt())
            }
        }
        BinOp::BitOr => (Term::app("int_or", vec![a, b]), Term::tt()),
        BinOp::BitXor => (Term::app("int_xor", vec![a, b]), Term::tt()),
        BinOp::Shl | BinOp::Shr => {
            if let Some(c) = as_literal(&b) {
                let Some(c) = c.to_i64().filter(|c| c.unsigned_abs() <= MAX_SHIFT as u64) else {
                    return (Term::int(0), Term::ff());
                };
                let left = if op == BinOp::Shl { c } else { -c };
                let p = pow2(left.unsigned_abs() as u32);
                return if left >= 0 {
                    (Term::mul(a, p), Term::tt())
                } else {
                    (Term::div(a, p), Term::tt())
                };
            }
            let limit = Term::int(MAX_SHIFT as i64);
            let d = Term::and([
                Term::le(Term::neg(limit.clone()), b.clone()),
                Term::le(b.clone(), limit),
            ]);
            let f = if op == BinOp::Shl { "int_shl" } else { "int_shr" };
            (Term::app(f, vec![a, b]), d)
        }
        BinOp::Eq | BinOp::Lt | BinOp::And | BinOp::Or => unreachable!("handled as boolean"),
    }
}

/// Lowers an expression used as a condition to a boolean term and its
/// definedness condition. `&&` and `||` only require their right operand
/// to be defined when it is evaluated.
pub fn lower_bool(e: &Expr, vals: &Vals) -> (Term, Term) {
    match e {
        Expr::Unary(UnOp::Not, a) => {
            let (b, d) = lower_bool(a, vals);
            (Term::not(b), d)
        }
        Expr::Binary(BinOp::Eq, a, b) => {
            let (a, da) = lower_int(a, vals);
            let (b, db) = lower_int(b, vals);
            (Term::eq(a, b), Term::and([da, db]))
        }
        Expr::Binary(BinOp::Lt, a, b) => {
            let (a, da) = lower_int(a, vals);
            let (b, db) = lower_int(b, vals);
            (Term::lt(a, b), Term::and([da, db]))
        }
        Expr::Binary(BinOp::And, a, b) => {
            let (a, da) = lower_bool(a, vals);
            let (b, db) = lower_bool(b, vals);
            let d = Term::and([da, Term::implies(a.clone(), db)]);
            (Term::and([a, b]), d)
        }
        Expr::Binary(BinOp::Or, a, b) => {
            let (a, da) = lower_bool(a, vals);
            let (b, db) = lower_bool(b, vals);
            let d = Term::and([da, Term::or([a.clone(), db])]);
            (Term::or([a, b]), d)
        }
        other => {
            let (t, d) = lower_int(other, vals);
            (Term::ne(t, Term::int(0)), d)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfa::build_cfa;
    use crate::lang::parse;
    use crate::normalize::to_single_loop;
    use crate::programs;
    use crate::smt::{CheckResult, Session, SolverConfig};

    fn ts(src: &str) -> TransitionSystem {
        build_ts(&to_single_loop(&build_cfa(&parse(src).unwrap())).unwrap()).unwrap()
    }

    fn solver() -> Session {
        Session::new(SolverConfig::default()).expect("z3 on PATH")
    }

    fn sat(s: &mut Session, f: &Formula) -> bool {
        match s.check(f).unwrap() {
            CheckResult::Sat(_) => true,
            CheckResult::Unsat => false,
            CheckResult::Unknown(r) => panic!("unknown: {r}"),
        }
    }

    fn formula(t: Term) -> Formula {
        Formula::new(t)
    }

    fn v(name: &str) -> Term {
        Term::int_var(name)
    }

    #[test]
    fn violation_before_a_dead_loop() {
        // no execution reaches the loop head
        let t = ts("int a; a = 0; assert(a >= 1); while (a == 1) { a = 0; }");
        let mut s = solver();
        assert!(sat(&mut s, &t.encode_base_case(0)));
        assert!(!sat(&mut s, &t.encode_base_case_from(1, 3)));
        assert!(!sat(&mut s, &t.encode_forward_condition(1)));
    }

    #[test]
    fn increment_body_relates_consecutive_frames() {
        let t = ts("int x; while (nondet()) { x = x + 1; }");
        let mut s = solver();
        let step = t.transition(0).and(formula(Term::eq(v("x@0"), Term::int(5))));
        assert!(sat(&mut s, &step));
        let wrong = step.and(formula(Term::ne(v("x@1"), Term::int(6))));
        assert!(!sat(&mut s, &wrong));
    }

    #[test]
    fn pre_loop_code_is_the_initial_predicate() {
        let t = ts(programs::EXAMPLE_SAFE);
        let mut s = solver();
        assert!(sat(&mut s, &t.init()));
        let expected = Term::and([
            Term::eq(v("s@0"), Term::int(1)),
            Term::eq(v("x1@0"), Term::int(0)),
            Term::eq(v("x2@0"), Term::int(0)),
        ]);
        assert!(!sat(&mut s, &t.init().and(formula(Term::not(expected)))));
    }

    #[test]
    fn error_branch_needs_state_one_and_unequal_counters() {
        let t = ts(programs::EXAMPLE_SAFE);
        let mut s = solver();
        let p = t.property(0).negate();
        // violating from s = 4 with x1 != x2
        let bad = p.clone().and(formula(Term::and([
            Term::eq(v("s@0"), Term::int(4)),
            Term::eq(v("x1@0"), Term::int(1)),
            Term::eq(v("x2@0"), Term::int(0)),
        ])));
        assert!(sat(&mut s, &bad));
        let good = p.and(formula(Term::and([
            Term::eq(v("s@0"), Term::int(4)),
            Term::eq(v("x1@0"), v("x2@0")),
        ])));
        assert!(!sat(&mut s, &good));
    }

    #[test]
    fn unsafe_base_case_needs_three_iterations() {
        let t = ts(programs::EXAMPLE_UNSAFE);
        let mut s = solver();
        assert!(!sat(&mut s, &t.encode_base_case(2)));
        let CheckResult::Sat(m) = s.check(&t.encode_base_case(3)).unwrap() else {
            panic!("expected sat")
        };
        let (trace, iters) = t.extract_trace(&|n| m.int(n), 3).unwrap();
        assert_eq!(iters, 3);
        assert!(crate::interp::replays_to_error(&t.ncfa().cfa, &trace));
    }

    #[test]
    fn omitted_depths_still_find_the_violation() {
        let t = ts(programs::EXAMPLE_UNSAFE);
        let mut s = solver();
        assert!(sat(&mut s, &t.encode_base_case_from(3, 3)));
        assert!(!sat(&mut s, &t.encode_base_case_from(4, 4)));
        assert!(!sat(&mut s, &t.encode_base_case_from(0, 1)));
    }

    #[test]
    fn safe_base_case_is_unsat() {
        let t = ts(programs::EXAMPLE_SAFE);
        let mut s = solver();
        for k in 1..=8 {
            assert!(!sat(&mut s, &t.encode_base_case(k)), "k = {k}");
        }
    }

    #[test]
    fn loop_free_violation_has_zero_iterations() {
        let t = ts("int x; x = nondet(); assert(x < 1);");
        let mut s = solver();
        let CheckResult::Sat(m) = s.check(&t.encode_base_case(1)).unwrap() else {
            panic!("expected sat")
        };
        let (trace, iters) = t.extract_trace(&|n| m.int(n), 1).unwrap();
        assert_eq!(iters, 0);
        assert!(crate::interp::replays_to_error(&t.ncfa().cfa, &trace));
        assert!(matches!(
            t.extract_trace(&|_| None, 1),
            Err(ExtractError::ModelIncomplete(_))
        ));
        // a value the solver left out because it does not matter
        let t = ts("int x; int y; y = nondet(); x = 0; assert(x == 1);");
        let (_, iters) = t.extract_trace(&|_| None, 1).unwrap();
        assert_eq!(iters, 0);
    }

    #[test]
    fn forward_condition_counts_iterations() {
        let t = ts("int i; i = 0; while (i < 2) { i = i + 1; }");
        let mut s = solver();
        assert!(sat(&mut s, &t.encode_forward_condition(2)));
        assert!(!sat(&mut s, &t.encode_forward_condition(3)));
        let safe = ts(programs::EXAMPLE_SAFE);
        for k in [1, 5, 10] {
            assert!(sat(&mut s, &safe.encode_forward_condition(k)));
        }
    }

    fn s_at_least_one() -> Formula {
        formula(Term::ge(v("s"), Term::int(1)))
    }

    fn strong_inv() -> Formula {
        formula(Term::and([
            Term::ge(v("s"), Term::int(1)),
            Term::le(v("s"), Term::int(4)),
            Term::implies(Term::ne(v("s"), Term::int(2)), Term::eq(v("x1"), v("x2"))),
        ]))
    }

    #[test]
    fn safe_step_case_follows_the_invariant_ladder() {
        let t = ts(programs::EXAMPLE_SAFE);
        let mut s = solver();
        let all = HavocStrategy::SoundAll;
        assert!(sat(&mut s, &t.encode_step_case(4, &Formula::tt(), all).monolithic()));
        assert!(!sat(&mut s, &t.encode_step_case(4, &s_at_least_one(), all).monolithic()));
        assert!(sat(&mut s, &t.encode_step_case(3, &s_at_least_one(), all).monolithic()));
        assert!(!sat(&mut s, &t.encode_step_case(2, &strong_inv(), all).monolithic()));
    }

    #[test]
    fn termination_vars_havoc_misses_the_bug() {
        let t = ts(programs::EXAMPLE_UNSAFE);
        assert!(t.havoc_set(HavocStrategy::UnsoundTerminationVars).is_empty());
        let mut s = solver();
        for k in [1, 2, 4, 5] {
            let q = t.encode_step_case(k, &Formula::tt(), HavocStrategy::UnsoundTerminationVars);
            assert!(!sat(&mut s, &q.monolithic()), "k = {k}");
        }
    }

    #[test]
    fn havoc_sets_are_nested() {
        let t = ts(programs::EXAMPLE_SAFE);
        let all = t.havoc_set(HavocStrategy::SoundAll);
        let lm = t.havoc_set(HavocStrategy::SoundLoopModified);
        let tv = t.havoc_set(HavocStrategy::UnsoundTerminationVars);
        assert!(lm.is_subset(&all));
        assert!(tv.is_subset(&lm));
    }

    #[test]
    fn lowering_matches_interpreter_on_literals() {
        let vals = Vals::new();
        for (src, expect) in [("-7 / 2", -3), ("-7 % 2", 1), ("7 % -2", 1), ("-8 >> 1", -4), ("3 << 2", 12), ("6 & 3", 2)] {
            let ast = parse(&format!("int x; x = {src};")).unwrap();
            let cfa = build_cfa(&ast);
            let Op::Assign(_, e) = &cfa.edge(0).op else { panic!() };
            let (t, d) = lower_int(e, &vals);
            assert!(d.is_true());
            assert_eq!(t, Term::int(expect), "{src}");
        }
    }

    #[test]
    fn variable_shifts_and_masks_are_lowered_exactly() {
        let t = ts("int x; int y; x = nondet(); y = (x & 7) + (x >> 2); assert(y < 100);");
        let mut s = solver();
        let CheckResult::Sat(m) = s.check(&t.encode_base_case(1)).unwrap() else {
            panic!("expected sat")
        };
        let (trace, _) = t.extract_trace(&|n| m.int(n), 1).unwrap();
        assert!(crate::interp::replays_to_error(&t.ncfa().cfa, &trace));
    }

    #[test]
    fn division_by_zero_blocks_the_path() {
        let t = ts("int x; int y; x = nondet(); y = 1 / x; error;");
        let mut s = solver();
        let f = t
            .encode_base_case(1)
            .and(formula(Term::eq(v("x@0.h0"), Term::int(0))));
        assert!(!sat(&mut s, &f));
    }
}
