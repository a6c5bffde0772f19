//! Continuous invariant generation: the reachability analysis is rerun with
//! increasing precision and every round strengthens the loop-head invariant.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use crate::cfa::Op;
use crate::cpa::{cpa_algorithm, Budget, CpaError, Reached};
use crate::domain::{AbstractState, Bound, IntervalSet, Precision, SymExpr, SymOp};
use crate::encode::lower_int;
use crate::expr::Expr;
use crate::formula::{Formula, Term};
use crate::normalize::NormalizedCfa;

/// Up to `count` variables read by assume edges, closest to the error
/// location first.
pub fn select_variables(ncfa: &NormalizedCfa, count: usize) -> Vec<String> {
    let cfa = &ncfa.cfa;
    let mut seen_loc = vec![false; cfa.num_locations()];
    let mut seen_edge = vec![false; cfa.edges().len()];
    let mut out: Vec<String> = Vec::new();
    let mut level = vec![cfa.error()];
    seen_loc[cfa.error().0] = true;
    while !level.is_empty() && out.len() < count {
        // every assume edge entering this level, each with its variables in
        // source order; edges are ordered by their variable lists
        let mut lists: Vec<Vec<String>> = Vec::new();
        let mut next = Vec::new();
        for &l in &level {
            for &e in cfa.in_edges(l) {
                if std::mem::replace(&mut seen_edge[e], true) {
                    continue;
                }
                let edge = cfa.edge(e);
                if let Op::Assume(c) = &edge.op {
                    let vars: Vec<String> = c
                        .vars_in_order()
                        .into_iter()
                        .filter(|v| *v != ncfa.pc_var && !cfa.is_synthetic(v))
                        .collect();
                    if !vars.is_empty() {
                        lists.push(vars);
                    }
                }
                if !std::mem::replace(&mut seen_loc[edge.src.0], true) {
                    next.push(edge.src);
                }
            }
        }
        lists.sort();
        for v in lists.into_iter().flatten() {
            if !out.contains(&v) {
                out.push(v);
            }
        }
        level = next;
    }
    out.truncate(count);
    out
}

/// All variables the analysis may track: program variables and the
/// dispatch variable, without expression temporaries.
pub fn all_variables(ncfa: &NormalizedCfa) -> BTreeSet<String> {
    ncfa.state_vars().into_iter().collect()
}

/// The most precise setting the schedule reaches.
pub fn terminal_precision(ncfa: &NormalizedCfa) -> Precision {
    Precision::new(all_variables(ncfa), 2, false)
}

/// Precision after refinement number `round` (counting from 1), or `None`
/// once `prec` is terminal. Rounds 2 and 4 raise the depth and disable
/// widening; every other round doubles the important variables, switching
/// to all variables when the selection cannot grow any more.
pub fn refine_precision(prec: &Precision, round: usize, ncfa: &NormalizedCfa) -> Option<Precision> {
    if *prec == terminal_precision(ncfa) {
        return None;
    }
    let mut next = prec.clone();
    match round {
        2 => next.n = 2,
        4 => next.w = false,
        _ => {
            let want = (prec.y.len() * 2).max(1);
            let picked: BTreeSet<String> = select_variables(ncfa, want).into_iter().collect();
            next.y = if picked.len() > prec.y.len() && picked.is_superset(&prec.y) {
                picked
            } else {
                all_variables(ncfa)
            };
        }
    }
    Some(next)
}

/// Every distinct precision from the initial one to the terminal one.
pub fn schedule(ncfa: &NormalizedCfa) -> Vec<Precision> {
    let mut out = vec![Precision::initial()];
    let mut round = 1;
    while let Some(p) = refine_precision(out.last().unwrap(), round, ncfa) {
        round += 1;
        if p != *out.last().unwrap() {
            out.push(p);
        }
        if round > 64 {
            break;
        }
    }
    out
}

/// Static `(s, n, w)` setting: `s` important variables by the selection
/// heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StaticPrecision {
    pub s: usize,
    pub n: usize,
    pub w: bool,
}

impl StaticPrecision {
    pub fn precision(&self, ncfa: &NormalizedCfa) -> Precision {
        Precision::new(select_variables(ncfa, self.s), self.n.max(1), self.w)
    }
}

impl fmt::Display for StaticPrecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.s, self.n, if self.w { "t" } else { "f" })
    }
}

impl FromStr for StaticPrecision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [a, b, c] = parts.as_slice() else {
            return Err(format!("expected `s,n,w`, got `{s}`"));
        };
        let s_ = a.parse().map_err(|_| format!("bad variable count `{a}`"))?;
        let n = b.parse().map_err(|_| format!("bad depth `{b}`"))?;
        let w = match *c {
            "t" | "true" => true,
            "f" | "false" => false,
            other => return Err(format!("bad widening flag `{other}` (t or f)")),
        };
        Ok(StaticPrecision { s: s_, n, w })
    }
}

/// Renders one interval set as a constraint on `x`.
fn membership(x: &Term, set: &IntervalSet) -> Term {
    Term::or(set.intervals().iter().map(|i| {
        if let (Bound::Fin(a), Bound::Fin(b)) = (i.lo, i.hi) {
            if a == b {
                return Term::eq(x.clone(), Term::int(a));
            }
        }
        let lo = match i.lo {
            Bound::Fin(a) => Term::ge(x.clone(), Term::int(a)),
            _ => Term::tt(),
        };
        let hi = match i.hi {
            Bound::Fin(b) => Term::le(x.clone(), Term::int(b)),
            _ => Term::tt(),
        };
        Term::and([lo, hi])
    }))
}

/// Program expression with the same value as an exact binding.
fn to_expr(e: &SymExpr) -> Option<Expr> {
    Some(match e {
        SymExpr::Var(v) => Expr::var(v.clone()),
        SymExpr::Intervals(s) => Expr::Const(i64::try_from(s.as_point()?).ok()?),
        SymExpr::Unary(op, a) => Expr::unary(*op, to_expr(a)?),
        SymExpr::Binary(SymOp::Bin(op), a, b) => Expr::binary(*op, to_expr(a)?, to_expr(b)?),
        SymExpr::Binary(SymOp::Union, ..) => return None,
    })
}

/// One abstract state as a constraint over the state variables.
pub fn state_to_term(state: &AbstractState, vars: &BTreeSet<String>) -> Term {
    let mut parts = Vec::new();
    for v in vars {
        let x = Term::int_var(v.clone());
        let b = state.get(v);
        let relational = !matches!(b, SymExpr::Intervals(_))
            && b.is_exact()
            && b.vars().is_subset(vars);
        if relational {
            if let Some(e) = to_expr(b) {
                let env = vars.iter().map(|v| (v.clone(), Term::int_var(v.clone()))).collect();
                let (t, d) = lower_int(&e, &env);
                if d.is_true() {
                    parts.push(Term::eq(x, t));
                    continue;
                }
            }
        }
        let set = state.value_of(v);
        if !set.is_top() {
            parts.push(membership(&x, &set));
        }
    }
    Term::and(parts)
}

/// Disjunction over the given loop-head states; false when there are none.
pub fn states_to_formula<'a>(
    states: impl IntoIterator<Item = &'a AbstractState>,
    vars: &BTreeSet<String>,
) -> Formula {
    let mut seen = BTreeSet::new();
    let mut disjuncts = Vec::new();
    for s in states {
        let t = state_to_term(s, vars);
        if seen.insert(t.to_smt()) {
            disjuncts.push(t);
        }
    }
    Formula::new(Term::or(disjuncts))
}

/// A published invariant version.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvariantSnapshot {
    pub version: u64,
    /// Loop-head invariant over plain variable names.
    pub formula: Formula,
    /// The analysis found the error location unreachable.
    pub proved_safe: bool,
    /// Precision of the round that produced this version.
    pub precision: Option<Precision>,
}

impl InvariantSnapshot {
    fn initial() -> InvariantSnapshot {
        InvariantSnapshot {
            version: 0,
            formula: Formula::tt(),
            proved_safe: false,
            precision: None,
        }
    }
}

#[derive(Debug)]
struct StoreInner {
    history: Vec<InvariantSnapshot>,
    conjuncts: Vec<Term>,
}

/// Shared, append-only sequence of snapshots. Readers always see a
/// consistent (version, formula) pair.
#[derive(Debug, Clone)]
pub struct InvariantStore {
    inner: Arc<Mutex<StoreInner>>,
}

impl Default for InvariantStore {
    fn default() -> Self {
        InvariantStore {
            inner: Arc::new(Mutex::new(StoreInner {
                history: vec![InvariantSnapshot::initial()],
                conjuncts: Vec::new(),
            })),
        }
    }
}

impl InvariantStore {
    pub fn new() -> InvariantStore {
        InvariantStore::default()
    }

    pub fn latest(&self) -> InvariantSnapshot {
        self.inner.lock().unwrap().history.last().unwrap().clone()
    }

    pub fn history(&self) -> Vec<InvariantSnapshot> {
        self.inner.lock().unwrap().history.clone()
    }

    pub fn proved_safe(&self) -> bool {
        self.inner.lock().unwrap().history.last().unwrap().proved_safe
    }

    /// Conjoins `inv` with the current invariant. A new version is created
    /// only when something changes.
    pub fn publish(&self, inv: Term, proved_safe: bool, precision: Option<Precision>) -> u64 {
        let mut g = self.inner.lock().unwrap();
        let last = g.history.last().unwrap().clone();
        let fresh = !inv.is_true() && !g.conjuncts.contains(&inv);
        if !fresh && (last.proved_safe || !proved_safe) {
            return last.version;
        }
        if fresh {
            g.conjuncts.push(inv);
        }
        let snap = InvariantSnapshot {
            version: last.version + 1,
            formula: Formula::new(Term::and(g.conjuncts.clone())),
            proved_safe: last.proved_safe || proved_safe,
            precision,
        };
        g.history.push(snap);
        last.version + 1
    }
}

/// Latest `(version, invariant)`; version 0 is `true`.
pub fn get_currently_known_invariant(store: &InvariantStore) -> (u64, Formula) {
    let s = store.latest();
    (s.version, s.formula)
}

/// Outcome of one analysis round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Round {
    pub precision: Precision,
    pub invariant: Formula,
    pub proved_safe: bool,
    pub reached: usize,
}

/// Initial abstract state: every variable is 0.
pub fn initial_state(ncfa: &NormalizedCfa) -> AbstractState {
    let cfa = &ncfa.cfa;
    let mut s = AbstractState::top(cfa.entry(), cfa.vars());
    for v in cfa.vars() {
        s.set(v, SymExpr::point(0));
    }
    s
}

/// The reached set of one analysis at `prec`, widening at the loop head.
pub fn analyze(
    ncfa: &NormalizedCfa,
    prec: &Precision,
    budget: Budget,
    cancel: &AtomicBool,
) -> Result<Reached, CpaError> {
    let widen_at = if ncfa.has_loop() {
        BTreeSet::from([ncfa.loop_head])
    } else {
        BTreeSet::new()
    };
    cpa_algorithm(&ncfa.cfa, initial_state(ncfa), prec, &widen_at, budget, cancel)
}

/// Runs the analysis once at `prec`.
pub fn run_round(
    ncfa: &NormalizedCfa,
    prec: &Precision,
    budget: Budget,
    cancel: &AtomicBool,
) -> Result<Round, CpaError> {
    let reached = analyze(ncfa, prec, budget, cancel)?;
    let vars = all_variables(ncfa);
    let proved_safe = reached.at(ncfa.cfa.error()).next().is_none();
    Ok(Round {
        precision: prec.clone(),
        invariant: states_to_formula(reached.at(ncfa.loop_head), &vars),
        proved_safe,
        reached: reached.len(),
    })
}

/// Runs the rounds for `precisions` in order and publishes after each. A
/// round that runs out of budget publishes nothing. Stops early on a proof
/// or cancellation; returns the number of rounds that ran.
pub fn generate(
    ncfa: &NormalizedCfa,
    precisions: &[Precision],
    store: &InvariantStore,
    budget: Budget,
    cancel: &AtomicBool,
) -> usize {
    let mut ran = 0;
    for prec in precisions {
        if cancel.load(Ordering::Relaxed) || store.proved_safe() {
            break;
        }
        ran += 1;
        match run_round(ncfa, prec, budget, cancel) {
            Ok(r) => {
                let v = store.publish(r.invariant.body, r.proved_safe, Some(prec.clone()));
                log::debug!("invariant round at {prec}: version {v}, {} states", r.reached);
                if r.proved_safe {
                    break;
                }
            }
            Err(CpaError::Cancelled) => break,
            Err(CpaError::BudgetExhausted) => {
                log::debug!("invariant round at {prec} exhausted its budget");
            }
        }
    }
    ran
}

/// Background invariant generation over the full schedule.
pub struct InvGenWorker {
    cancel: Arc<AtomicBool>,
    handle: Option<JoinHandle<(usize, Duration)>>,
}

impl InvGenWorker {
    pub fn spawn(ncfa: NormalizedCfa, store: InvariantStore, budget: Budget) -> InvGenWorker {
        let cancel = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&cancel);
        let handle = std::thread::spawn(move || {
            let before = crate::smt::thread_cpu_time();
            let precisions = schedule(&ncfa);
            let rounds = generate(&ncfa, &precisions, &store, budget, &flag);
            (rounds, crate::smt::thread_cpu_time().saturating_sub(before))
        });
        InvGenWorker {
            cancel,
            handle: Some(handle),
        }
    }

    /// Cancels and waits; returns the number of rounds started and the
    /// CPU time the worker thread used.
    pub fn stop(mut self) -> (usize, Duration) {
        self.cancel.store(true, Ordering::Relaxed);
        self.handle
            .take()
            .and_then(|h| h.join().ok())
            .unwrap_or((0, Duration::ZERO))
    }
}

impl Drop for InvGenWorker {
    fn drop(&mut self) {
        self.cancel.store(true, Ordering::Relaxed);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}
