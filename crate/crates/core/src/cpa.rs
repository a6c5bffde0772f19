//! Reachability analysis over the interval-expression domain.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::cfa::{Cfa, Loc};
use crate::domain::{differ, stop, transfer, union_states, widen_states, AbstractState, Precision};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum CpaError {
    #[error("analysis budget exhausted")]
    BudgetExhausted,
    #[error("analysis cancelled")]
    Cancelled,
}

/// Limits for one analysis run. The pop limit is deterministic; the wall
/// clock limit is a safety net.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub max_pops: usize,
    pub wall: Option<Duration>,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_pops: 10_000,
            wall: Some(Duration::from_secs(10)),
        }
    }
}

/// The reached set, indexed by location.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Reached {
    states: Vec<AbstractState>,
    by_loc: Vec<Vec<usize>>,
}

impl Reached {
    fn new(num_locations: usize) -> Reached {
        Reached {
            states: Vec::new(),
            by_loc: vec![Vec::new(); num_locations],
        }
    }

    fn add(&mut self, s: AbstractState) -> usize {
        let loc = s.loc.0;
        self.states.push(s);
        let idx = self.states.len() - 1;
        self.by_loc[loc].push(idx);
        idx
    }

    pub fn states(&self) -> &[AbstractState] {
        &self.states
    }

    pub fn at(&self, loc: Loc) -> impl Iterator<Item = &AbstractState> {
        self.by_loc
            .get(loc.0)
            .into_iter()
            .flatten()
            .map(|&i| &self.states[i])
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Text dump, one state per line as `loc: var ∈ set, ...`, omitting
    /// the listed variables.
    pub fn dump(&self, hide: &BTreeSet<String>) -> String {
        let mut out = String::new();
        for locs in &self.by_loc {
            for &i in locs {
                let s = &self.states[i];
                let parts: Vec<String> = s
                    .vars()
                    .filter(|v| !hide.contains(*v))
                    .map(|v| format!("{v} ∈ {}", s.value_of(v)))
                    .collect();
                let _ = writeln!(out, "{}: {}", s.loc, parts.join(", "));
            }
        }
        out
    }
}

/// Runs the worklist algorithm from `init`. Widening is applied only at
/// `widen_at`; other locations unite states.
pub fn cpa_algorithm(
    cfa: &Cfa,
    init: AbstractState,
    prec: &Precision,
    widen_at: &BTreeSet<Loc>,
    budget: Budget,
    cancel: &AtomicBool,
) -> Result<Reached, CpaError> {
    let start = Instant::now();
    let mut reached = Reached::new(cfa.num_locations());
    let mut waiting = vec![false; 0];
    let mut waitlist = VecDeque::new();
    let i = reached.add(init);
    waiting.push(true);
    waitlist.push_back(i);
    let mut pops = 0usize;
    while let Some(idx) = waitlist.pop_front() {
        if cancel.load(Ordering::Relaxed) {
            return Err(CpaError::Cancelled);
        }
        pops += 1;
        if pops > budget.max_pops || budget.wall.is_some_and(|w| start.elapsed() > w) {
            return Err(CpaError::BudgetExhausted);
        }
        waiting[idx] = false;
        let state = reached.states[idx].clone();
        for &e in cfa.out_edges(state.loc) {
            let Some(succ) = transfer(&state, cfa.edge(e), prec) else {
                continue;
            };
            let loc = succ.loc;
            let widen = prec.w && widen_at.contains(&loc);
            let candidates: Vec<usize> = reached.by_loc[loc.0].clone();
            for r in candidates {
                let old = &reached.states[r];
                if differ(old, &succ, prec) {
                    continue;
                }
                let merged = if widen {
                    widen_states(old, &succ)
                } else {
                    union_states(old, &succ)
                };
                if merged != *old {
                    reached.states[r] = merged;
                    if !waiting[r] {
                        waiting[r] = true;
                        waitlist.push_back(r);
                    }
                }
            }
            if !stop(&succ, reached.at(loc)) {
                let n = reached.add(succ);
                waiting.push(true);
                waitlist.push_back(n);
            }
        }
    }
    Ok(reached)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfa::build_cfa;
    use crate::domain::{Bound, IntervalSet};
    use crate::lang::parse;
    use crate::normalize::to_single_loop;
    use crate::programs;

    fn run(src: &str, prec: &Precision) -> (crate::normalize::NormalizedCfa, Reached) {
        let n = to_single_loop(&build_cfa(&parse(src).unwrap())).unwrap();
        let init = AbstractState::top(n.cfa.entry(), n.cfa.vars());
        let heads = BTreeSet::from([n.loop_head]);
        let r = cpa_algorithm(&n.cfa, init, prec, &heads, Budget::default(), &AtomicBool::new(false))
            .unwrap();
        (n, r)
    }

    #[test]
    fn example_safe_loop_head_entails_s_at_least_one() {
        let (n, r) = run(programs::EXAMPLE_SAFE, &Precision::initial());
        let heads: Vec<_> = r.at(n.loop_head).collect();
        assert!(!heads.is_empty());
        for s in heads {
            let v = s.value_of("s");
            assert!(v.lo() >= Some(Bound::Fin(1)), "{s}");
        }
    }

    #[test]
    fn loop_free_program_is_propagated_exactly() {
        let (n, r) = run("int x; int y; x = 2; y = x * 3; assert(y == 6);", &Precision::initial());
        assert_eq!(r.at(n.cfa.error()).count(), 0);
        let last = r.states().last().unwrap();
        assert_eq!(last.value_of("y"), IntervalSet::point(6));
    }

    #[test]
    fn unreachable_error_branch_is_not_reached() {
        let (n, r) = run("int x; x = 0; assert(1);", &Precision::initial());
        assert_eq!(r.at(n.cfa.error()).count(), 0);
    }

    #[test]
    fn example_unsafe_reaches_error() {
        let (n, r) = run(programs::EXAMPLE_UNSAFE, &Precision::initial());
        assert!(r.at(n.cfa.error()).count() > 0);
    }

    #[test]
    fn cancellation_is_observed() {
        let n = to_single_loop(&build_cfa(&parse(programs::EXAMPLE_SAFE).unwrap())).unwrap();
        let init = AbstractState::top(n.cfa.entry(), n.cfa.vars());
        let res = cpa_algorithm(
            &n.cfa,
            init,
            &Precision::initial(),
            &BTreeSet::new(),
            Budget::default(),
            &AtomicBool::new(true),
        );
        assert_eq!(res, Err(CpaError::Cancelled));
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let n = to_single_loop(&build_cfa(&parse(programs::EXAMPLE_SAFE).unwrap())).unwrap();
        let init = AbstractState::top(n.cfa.entry(), n.cfa.vars());
        let res = cpa_algorithm(
            &n.cfa,
            init,
            &Precision::new(["x1"], 1, true),
            &BTreeSet::from([n.loop_head]),
            Budget {
                max_pops: 200,
                wall: None,
            },
            &AtomicBool::new(false),
        );
        assert_eq!(res, Err(CpaError::BudgetExhausted));
    }
}
