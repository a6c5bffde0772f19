//! Concrete interpreter over unbounded integers and a bounded brute-force
//! counterexample search. Both serve as ground truth for the symbolic parts.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::cfa::{Cfa, Loc, Op};
use crate::expr::{BinOp, Expr, UnOp};

/// Shift amounts beyond this magnitude trap instead of allocating.
pub const MAX_SHIFT: u32 = 4096;

/// Evaluation failure that halts a path without reaching the error location.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trap {
    DivisionByZero,
    ShiftOutOfRange,
}

/// Program location plus a value for every CFA variable, in `cfa.vars()` order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConcreteState {
    pub loc: Loc,
    pub env: Vec<BigInt>,
}

impl ConcreteState {
    pub fn initial(cfa: &Cfa) -> ConcreteState {
        ConcreteState {
            loc: cfa.entry(),
            env: vec![BigInt::zero(); cfa.vars().len()],
        }
    }

    pub fn value(&self, cfa: &Cfa, var: &str) -> Option<&BigInt> {
        cfa.var_index(var).map(|i| &self.env[i])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub edge: usize,
    pub state: ConcreteState,
}

/// An execution: the initial state and each edge taken with the state after it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub initial: ConcreteState,
    pub steps: Vec<Step>,
    /// Values consumed by havoc edges, in order.
    pub choices: Vec<BigInt>,
}

impl Trace {
    pub fn last_state(&self) -> &ConcreteState {
        self.steps.last().map(|s| &s.state).unwrap_or(&self.initial)
    }

    /// All states in order, starting with the initial one.
    pub fn states(&self) -> impl Iterator<Item = &ConcreteState> {
        std::iter::once(&self.initial).chain(self.steps.iter().map(|s| &s.state))
    }

    pub fn display<'a>(&'a self, cfa: &'a Cfa) -> TraceDisplay<'a> {
        TraceDisplay { trace: self, cfa }
    }
}

pub struct TraceDisplay<'a> {
    trace: &'a Trace,
    cfa: &'a Cfa,
}

impl fmt::Display for TraceDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fmt_state = |s: &ConcreteState| {
            let vals: Vec<String> = self
                .cfa
                .vars()
                .iter()
                .zip(&s.env)
                .filter(|(v, _)| !self.cfa.is_synthetic(v))
                .map(|(v, x)| format!("{v}={x}"))
                .collect();
            format!("{}: {}", s.loc, vals.join(", "))
        };
        writeln!(f, "{}", fmt_state(&self.trace.initial))?;
        for step in &self.trace.steps {
            writeln!(f, "  {}", self.cfa.edge(step.edge).op)?;
            writeln!(f, "{}", fmt_state(&step.state))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    ErrorReached,
    Completed,
    StepBudgetExhausted,
    Trapped(Trap),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunResult {
    pub outcome: Outcome,
    pub trace: Trace,
    /// Number of back edges traversed.
    pub iterations: usize,
}

fn bool_int(b: bool) -> BigInt {
    if b {
        BigInt::one()
    } else {
        BigInt::zero()
    }
}

fn shift_amount(b: &BigInt) -> Result<i64, Trap> {
    match b.to_i64() {
        Some(v) if v.unsigned_abs() <= MAX_SHIFT as u64 => Ok(v),
        _ => Err(Trap::ShiftOutOfRange),
    }
}

fn shl(a: &BigInt, amount: i64) -> BigInt {
    if amount >= 0 {
        a << (amount as usize)
    } else {
        a.div_floor(&(BigInt::one() << (amount.unsigned_abs() as usize)))
    }
}

/// Applies a binary operator to two evaluated operands (not used for the
/// short-circuit operators).
pub fn apply_binop(op: BinOp, a: &BigInt, b: &BigInt) -> Result<BigInt, Trap> {
    Ok(match op {
        BinOp::Add => a + b,
        BinOp::Mul => a * b,
        BinOp::Div => {
            if b.is_zero() {
                return Err(Trap::DivisionByZero);
            }
            a / b
        }
        BinOp::Rem => {
            if b.is_zero() {
                return Err(Trap::DivisionByZero);
            }
            a.mod_floor(&b.abs())
        }
        BinOp::Eq => bool_int(a == b),
        BinOp::Lt => bool_int(a < b),
        BinOp::BitXor => a ^ b,
        BinOp::BitOr => a | b,
        BinOp::BitAnd => a & b,
        BinOp::Or => bool_int(!a.is_zero() || !b.is_zero()),
        BinOp::And => bool_int(!a.is_zero() && !b.is_zero()),
        BinOp::Shl => shl(a, shift_amount(b)?),
        BinOp::Shr => shl(a, -shift_amount(b)?),
    })
}

pub fn apply_unop(op: UnOp, a: &BigInt) -> BigInt {
    match op {
        UnOp::Not => bool_int(a.is_zero()),
        UnOp::BitNot => -a - 1,
        UnOp::Neg => -a,
    }
}

/// Evaluates an expression; `lookup` supplies variable values.
pub fn eval_with(e: &Expr, lookup: &dyn Fn(&str) -> BigInt) -> Result<BigInt, Trap> {
    match e {
        Expr::Const(c) => Ok(BigInt::from(*c)),
        Expr::Var(v) => Ok(lookup(v)),
        Expr::Unary(op, a) => Ok(apply_unop(*op, &eval_with(a, lookup)?)),
        Expr::Binary(BinOp::And, a, b) => {
            if eval_with(a, lookup)?.is_zero() {
                Ok(BigInt::zero())
            } else {
                Ok(bool_int(!eval_with(b, lookup)?.is_zero()))
            }
        }
        Expr::Binary(BinOp::Or, a, b) => {
            if !eval_with(a, lookup)?.is_zero() {
                Ok(BigInt::one())
            } else {
                Ok(bool_int(!eval_with(b, lookup)?.is_zero()))
            }
        }
        Expr::Binary(op, a, b) => {
            let a = eval_with(a, lookup)?;
            let b = eval_with(b, lookup)?;
            apply_binop(*op, &a, &b)
        }
    }
}

/// Evaluates an expression in a concrete environment.
pub fn eval(cfa: &Cfa, env: &[BigInt], e: &Expr) -> Result<BigInt, Trap> {
    eval_with(e, &|v| {
        cfa.var_index(v)
            .map(|i| env[i].clone())
            .unwrap_or_else(BigInt::zero)
    })
}

/// Result of trying to take one edge.
enum Fire {
    Disabled,
    Taken(Vec<BigInt>),
    Trapped(Trap),
}

/// Interpreter bound to one CFA; precomputes the back-edge set.
pub struct Interpreter<'a> {
    cfa: &'a Cfa,
    back_edges: BTreeSet<usize>,
}

impl<'a> Interpreter<'a> {
    pub fn new(cfa: &'a Cfa) -> Self {
        Interpreter {
            cfa,
            back_edges: cfa.back_edges().into_iter().collect(),
        }
    }

    pub fn cfa(&self) -> &Cfa {
        self.cfa
    }

    pub fn is_back_edge(&self, edge: usize) -> bool {
        self.back_edges.contains(&edge)
    }

    fn fire(&self, edge: usize, env: &[BigInt], havoc_value: impl FnOnce() -> BigInt) -> Fire {
        let e = self.cfa.edge(edge);
        match &e.op {
            Op::Assume(c) => match eval(self.cfa, env, c) {
                Ok(v) if v.is_zero() => Fire::Disabled,
                Ok(_) => Fire::Taken(env.to_vec()),
                Err(t) => Fire::Trapped(t),
            },
            Op::Assign(x, rhs) => match eval(self.cfa, env, rhs) {
                Ok(v) => {
                    let mut next = env.to_vec();
                    if let Some(i) = self.cfa.var_index(x) {
                        next[i] = v;
                    }
                    Fire::Taken(next)
                }
                Err(t) => Fire::Trapped(t),
            },
            Op::Havoc(x) => {
                let mut next = env.to_vec();
                if let Some(i) = self.cfa.var_index(x) {
                    next[i] = havoc_value();
                }
                Fire::Taken(next)
            }
        }
    }

    /// Runs from the initial state. Havoc edges consume `choices` in order
    /// and read 0 once they are used up.
    pub fn run(&self, choices: &[BigInt], max_steps: usize) -> RunResult {
        let mut next_choice = 0;
        self.run_with(max_steps, |_edge, _trace| {
            let v = choices.get(next_choice).cloned().unwrap_or_default();
            next_choice += 1;
            Some(v)
        })
        .expect("choice source never fails")
    }

    /// Runs with a havoc oracle called with the index of each havoc edge and
    /// the trace so far; `None` from the oracle aborts the run.
    pub fn run_with(
        &self,
        max_steps: usize,
        mut havoc: impl FnMut(usize, &Trace) -> Option<BigInt>,
    ) -> Option<RunResult> {
        let cfa = self.cfa;
        let mut state = ConcreteState::initial(cfa);
        let mut trace = Trace {
            initial: state.clone(),
            steps: Vec::new(),
            choices: Vec::new(),
        };
        let mut iterations = 0;
        let outcome = loop {
            if state.loc == cfa.error() {
                break Outcome::ErrorReached;
            }
            if trace.steps.len() >= max_steps {
                break Outcome::StepBudgetExhausted;
            }
            let mut taken = None;
            let mut trap = None;
            for &e in cfa.out_edges(state.loc) {
                let is_havoc = matches!(cfa.edge(e).op, Op::Havoc(_));
                let mut picked = None;
                let fire = self.fire(e, &state.env, || {
                    let v = havoc(e, &trace);
                    picked = v.clone();
                    v.unwrap_or_default()
                });
                if is_havoc {
                    match picked {
                        Some(v) => trace.choices.push(v),
                        None => return None,
                    }
                }
                match fire {
                    Fire::Disabled => continue,
                    Fire::Taken(env) => {
                        taken = Some((e, env));
                        break;
                    }
                    Fire::Trapped(t) => {
                        trap = Some(t);
                        break;
                    }
                }
            }
            if let Some(t) = trap {
                break Outcome::Trapped(t);
            }
            let Some((e, env)) = taken else {
                break Outcome::Completed;
            };
            if self.back_edges.contains(&e) {
                iterations += 1;
            }
            state = ConcreteState {
                loc: cfa.edge(e).dst,
                env,
            };
            trace.steps.push(Step {
                edge: e,
                state: state.clone(),
            });
        };
        Some(RunResult {
            outcome,
            trace,
            iterations,
        })
    }

    /// Breadth-first search (0-1 BFS on back-edge count) for an error trace
    /// with the fewest loop iterations, at most `max_iterations`, where each
    /// havoc draws from `domain`.
    pub fn shortest_cex(&self, domain: &[BigInt], max_iterations: usize) -> Option<(Trace, usize)> {
        let cfa = self.cfa;
        let start = ConcreteState::initial(cfa);
        // node -> (iterations, parent node index, edge, choice)
        let mut nodes: Vec<(ConcreteState, usize, Option<(usize, usize, Option<BigInt>)>)> =
            vec![(start.clone(), 0, None)];
        let mut best: HashMap<ConcreteState, usize> = HashMap::from([(start, 0)]);
        let mut deque = VecDeque::from([0usize]);
        while let Some(idx) = deque.pop_front() {
            let (state, iters, _) = nodes[idx].clone();
            if best.get(&state).is_some_and(|&b| b < iters) {
                continue;
            }
            if state.loc == cfa.error() {
                return Some((self.rebuild(&nodes, idx), iters));
            }
            for &e in cfa.out_edges(state.loc) {
                let values: Vec<Option<BigInt>> = match cfa.edge(e).op {
                    Op::Havoc(_) => domain.iter().cloned().map(Some).collect(),
                    _ => vec![None],
                };
                for choice in values {
                    let fire = self.fire(e, &state.env, || choice.clone().unwrap_or_default());
                    let Fire::Taken(env) = fire else { continue };
                    let back = self.back_edges.contains(&e);
                    let n_iters = iters + usize::from(back);
                    if n_iters > max_iterations {
                        continue;
                    }
                    let next = ConcreteState {
                        loc: cfa.edge(e).dst,
                        env,
                    };
                    if best.get(&next).is_some_and(|&b| b <= n_iters) {
                        continue;
                    }
                    best.insert(next.clone(), n_iters);
                    nodes.push((next, n_iters, Some((idx, e, choice))));
                    let id = nodes.len() - 1;
                    if back {
                        deque.push_back(id);
                    } else {
                        deque.push_front(id);
                    }
                }
            }
        }
        None
    }

    fn rebuild(
        &self,
        nodes: &[(ConcreteState, usize, Option<(usize, usize, Option<BigInt>)>)],
        mut idx: usize,
    ) -> Trace {
        let mut steps = Vec::new();
        let mut choices = Vec::new();
        while let Some((parent, edge, choice)) = &nodes[idx].2 {
            steps.push(Step {
                edge: *edge,
                state: nodes[idx].0.clone(),
            });
            if let Some(c) = choice {
                choices.push(c.clone());
            }
            idx = *parent;
        }
        steps.reverse();
        choices.reverse();
        Trace {
            initial: nodes[idx].0.clone(),
            steps,
            choices,
        }
    }

    /// Explores every reachable state with havoc values from `domain`.
    /// Returns `Some(true)` if the error location is reachable, `Some(false)`
    /// if the full state space was explored without reaching it, and `None`
    /// if more than `max_states` states exist.
    pub fn exhaustive_error_reachable(&self, domain: &[BigInt], max_states: usize) -> Option<bool> {
        let start = ConcreteState::initial(self.cfa);
        let mut seen = std::collections::HashSet::from([start.clone()]);
        let mut queue = VecDeque::from([start]);
        while let Some(state) = queue.pop_front() {
            if state.loc == self.cfa.error() {
                return Some(true);
            }
            for &e in self.cfa.out_edges(state.loc) {
                let values: Vec<BigInt> = match self.cfa.edge(e).op {
                    Op::Havoc(_) => domain.to_vec(),
                    _ => vec![BigInt::zero()],
                };
                for v in values {
                    if let Fire::Taken(env) = self.fire(e, &state.env, || v.clone()) {
                        let next = ConcreteState {
                            loc: self.cfa.edge(e).dst,
                            env,
                        };
                        if seen.insert(next.clone()) {
                            if seen.len() > max_states {
                                return None;
                            }
                            queue.push_back(next);
                        }
                    }
                }
            }
        }
        Some(false)
    }

    /// Every state visited by some run of at most `max_steps` steps with
    /// havoc values from `domain`.
    pub fn bounded_states(&self, domain: &[BigInt], max_steps: usize) -> Vec<ConcreteState> {
        let start = ConcreteState::initial(self.cfa);
        let mut seen = std::collections::HashSet::from([start.clone()]);
        let mut out = vec![start.clone()];
        let mut frontier = vec![start];
        for _ in 0..max_steps {
            let mut next_frontier = Vec::new();
            for state in &frontier {
                for &e in self.cfa.out_edges(state.loc) {
                    let values: Vec<BigInt> = match self.cfa.edge(e).op {
                        Op::Havoc(_) => domain.to_vec(),
                        _ => vec![BigInt::zero()],
                    };
                    for v in values {
                        if let Fire::Taken(env) = self.fire(e, &state.env, || v.clone()) {
                            let next = ConcreteState {
                                loc: self.cfa.edge(e).dst,
                                env,
                            };
                            if seen.insert(next.clone()) {
                                out.push(next.clone());
                                next_frontier.push(next);
                            }
                        }
                    }
                }
            }
            frontier = next_frontier;
        }
        out
    }
}

/// Replays a trace's choices and reports whether it reaches the error location.
pub fn replays_to_error(cfa: &Cfa, trace: &Trace) -> bool {
    let interp = Interpreter::new(cfa);
    let res = interp.run(&trace.choices, trace.steps.len());
    res.outcome == Outcome::ErrorReached && res.trace == *trace
}

/// Convenience for building choice vectors from small integers.
pub fn choices(values: &[i64]) -> Vec<BigInt> {
    values.iter().map(|&v| BigInt::from(v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfa::build_cfa;
    use crate::lang::parse;
    use crate::normalize::to_single_loop;
    use crate::programs;

    fn cfa_of(src: &str) -> Cfa {
        build_cfa(&parse(src).unwrap())
    }

    #[test]
    fn example_unsafe_fails_after_three_iterations() {
        let cfa = cfa_of(programs::EXAMPLE_UNSAFE);
        let interp = Interpreter::new(&cfa);
        let r = interp.run(&choices(&[1, 1, 1, 0]), 1000);
        assert_eq!(r.outcome, Outcome::ErrorReached);
        assert_eq!(r.iterations, 3);
        assert_eq!(r.trace.last_state().loc, cfa.error());
        assert!(replays_to_error(&cfa, &r.trace));
    }

    #[test]
    fn zero_step_budget_is_exhausted_immediately() {
        let cfa = cfa_of(programs::EXAMPLE_SAFE);
        let r = Interpreter::new(&cfa).run(&[], 0);
        assert_eq!(r.outcome, Outcome::StepBudgetExhausted);
        assert!(r.trace.steps.is_empty());
    }

    #[test]
    fn example_safe_never_fails_for_short_choice_vectors() {
        let cfa = cfa_of(programs::EXAMPLE_SAFE);
        let interp = Interpreter::new(&cfa);
        for len in 0..=12 {
            for bits in 0u32..(1 << len) {
                let ch: Vec<BigInt> = (0..len).map(|i| BigInt::from((bits >> i) & 1)).collect();
                let r = interp.run(&ch, 10_000);
                assert_ne!(r.outcome, Outcome::ErrorReached, "choices {ch:?}");
            }
        }
    }

    #[test]
    fn shortest_cex_of_example_unsafe_uses_three_iterations() {
        let cfa = cfa_of(programs::EXAMPLE_UNSAFE);
        let interp = Interpreter::new(&cfa);
        let (trace, iters) = interp.shortest_cex(&choices(&[0, 1]), 6).unwrap();
        assert_eq!(iters, 3);
        assert!(replays_to_error(&cfa, &trace));
    }

    #[test]
    fn shortest_cex_of_example_safe_is_none() {
        let cfa = cfa_of(programs::EXAMPLE_SAFE);
        assert!(Interpreter::new(&cfa).shortest_cex(&choices(&[0, 1]), 8).is_none());
    }

    #[test]
    fn loop_free_violation_needs_no_iterations() {
        let cfa = cfa_of("int x; x = 1; assert(x == 0);");
        let (trace, iters) = Interpreter::new(&cfa).shortest_cex(&choices(&[0, 1]), 3).unwrap();
        assert_eq!(iters, 0);
        assert_eq!(trace.steps.len(), 2);
    }

    #[test]
    fn division_by_zero_traps() {
        let cfa = cfa_of("int x; int y; x = 1 / y; assert(0);");
        let r = Interpreter::new(&cfa).run(&[], 100);
        assert_eq!(r.outcome, Outcome::Trapped(Trap::DivisionByZero));
    }

    #[test]
    fn operator_semantics() {
        let cfa = cfa_of("int x;");
        let ev = |src: &str| {
            let lowered = cfa_of(&format!("int x; x = {src};"));
            let Op::Assign(_, e) = &lowered.edge(0).op else {
                panic!("expected an assignment")
            };
            eval(&cfa, &[BigInt::zero()], e).map(|v| v.to_i64().unwrap())
        };
        assert_eq!(ev("-7 / 2"), Ok(-3));
        assert_eq!(ev("-7 % 2"), Ok(1));
        assert_eq!(ev("7 % -3"), Ok(1));
        assert_eq!(ev("-8 >> 1"), Ok(-4));
        assert_eq!(ev("-7 >> 1"), Ok(-4));
        assert_eq!(ev("3 << 2"), Ok(12));
        assert_eq!(ev("~5"), Ok(-6));
        assert_eq!(ev("-6 & 3"), Ok(2));
        assert_eq!(ev("0 && 1 / 0"), Ok(0));
        assert_eq!(ev("1 || 1 / 0"), Ok(1));
        assert_eq!(ev("1 << 5000"), Err(Trap::ShiftOutOfRange));
    }

    #[test]
    fn normalization_preserves_error_reachability_of_examples() {
        for src in [programs::EXAMPLE_SAFE, programs::EXAMPLE_UNSAFE] {
            let cfa = cfa_of(src);
            let n = to_single_loop(&cfa).unwrap();
            let a = Interpreter::new(&cfa).shortest_cex(&choices(&[0, 1]), 8).is_some();
            let b = Interpreter::new(&n.cfa).shortest_cex(&choices(&[0, 1]), 8).is_some();
            assert_eq!(a, b);
        }
    }
}
