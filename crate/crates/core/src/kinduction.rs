//! Iterative-deepening k-induction driven by invariant snapshots.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::AtomicBool;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::cpa::Budget;
use crate::encode::{build_ts, EncodeError, ExtractError, HavocStrategy, TransitionSystem};
use crate::formula::Formula;
use crate::interp::Trace;
use crate::invgen::{self, InvGenWorker, InvariantStore, StaticPrecision};
use crate::normalize::NormalizedCfa;
use crate::smt::{CheckResult, Logic, Session, SmtError, SolverConfig};

pub use crate::invgen::get_currently_known_invariant;

/// Where loop-head invariants come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum InvariantMode {
    Off,
    /// One analysis round at a fixed precision before the first check.
    Static(StaticPrecision),
    /// Rounds of increasing precision alongside the checks.
    #[default]
    Continuous,
}

impl fmt::Display for InvariantMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InvariantMode::Off => write!(f, "off"),
            InvariantMode::Static(p) => write!(f, "static:{p}"),
            InvariantMode::Continuous => write!(f, "continuous"),
        }
    }
}

impl FromStr for InvariantMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "off" | "none" => Ok(InvariantMode::Off),
            "continuous" => Ok(InvariantMode::Continuous),
            other => match other.strip_prefix("static:") {
                Some(p) => Ok(InvariantMode::Static(p.parse()?)),
                None => Err(format!(
                    "unknown invariant mode `{other}` (expected off, static:s,n,w or continuous)"
                )),
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct KInductionConfig {
    pub k_init: usize,
    pub k_max: usize,
    pub havoc: HavocStrategy,
    pub invariants: InvariantMode,
    /// Run this many analysis rounds to completion before the first check
    /// instead of a background worker. Makes continuous mode deterministic.
    pub deterministic_rounds: Option<usize>,
    pub round_budget: Budget,
    /// Skip base-case depths already shown violation-free.
    pub omit_checked: bool,
    /// Keep step-case frames asserted while the invariant changes.
    pub incremental: bool,
    pub solver: SolverConfig,
    /// Overall wall-clock limit.
    pub timeout: Option<Duration>,
    pub dump_smt: Option<PathBuf>,
    /// Invariant published as the first snapshot, for experiments.
    pub injected_invariant: Option<Formula>,
}

impl Default for KInductionConfig {
    fn default() -> Self {
        KInductionConfig {
            k_init: 1,
            k_max: 100,
            havoc: HavocStrategy::SoundAll,
            invariants: InvariantMode::Continuous,
            deterministic_rounds: None,
            round_budget: Budget::default(),
            omit_checked: true,
            incremental: true,
            solver: SolverConfig::default(),
            timeout: None,
            dump_smt: None,
            injected_invariant: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProofSource {
    ForwardCondition,
    Induction,
    InvariantEngine,
}

impl fmt::Display for ProofSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProofSource::ForwardCondition => "forward-condition",
            ProofSource::Induction => "induction",
            ProofSource::InvariantEngine => "invariant-engine",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnknownReason {
    KMaxExhausted,
    Timeout,
    SolverUnknown,
}

impl fmt::Display for UnknownReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UnknownReason::KMaxExhausted => "k_max-exhausted",
            UnknownReason::Timeout => "timeout",
            UnknownReason::SolverUnknown => "solver-unknown",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    True {
        source: ProofSource,
        k: usize,
        inv_version: u64,
    },
    False {
        trace: Trace,
        k: usize,
        /// Loop iterations on the trace.
        iterations: usize,
    },
    Unknown {
        reason: UnknownReason,
        k: usize,
    },
}

impl Verdict {
    pub fn is_true(&self) -> bool {
        matches!(self, Verdict::True { .. })
    }

    pub fn is_false(&self) -> bool {
        matches!(self, Verdict::False { .. })
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self, Verdict::Unknown { .. })
    }

    pub fn final_k(&self) -> usize {
        match self {
            Verdict::True { k, .. } | Verdict::False { k, .. } | Verdict::Unknown { k, .. } => *k,
        }
    }

    /// `TRUE`, `FALSE` or `UNKNOWN`.
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::True { .. } => "TRUE",
            Verdict::False { .. } => "FALSE",
            Verdict::Unknown { .. } => "UNKNOWN",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::True {
                source,
                k,
                inv_version,
            } => write!(f, "TRUE ({source}, k={k}, invariant v{inv_version})"),
            Verdict::False { k, iterations, .. } => {
                write!(f, "FALSE (k={k}, {iterations} loop iterations)")
            }
            Verdict::Unknown { reason, k } => write!(f, "UNKNOWN ({reason}, k={k})"),
        }
    }
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Smt(#[from] SmtError),
    #[error("cannot write SMT dump: {0}")]
    Dump(#[from] std::io::Error),
}

/// Counters collected during one run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerifyStats {
    pub queries: usize,
    pub step_checks: usize,
    pub inv_version: u64,
    pub solver_cpu: Duration,
    /// CPU used by the background invariant worker, if any.
    pub invgen_cpu: Duration,
    pub unknowns: usize,
}

#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub verdict: Verdict,
    pub stats: VerifyStats,
    /// Every snapshot published during the run.
    pub snapshots: Vec<invgen::InvariantSnapshot>,
}

struct Run<'a> {
    ts: TransitionSystem,
    cfg: &'a KInductionConfig,
    session: Session,
    store: InvariantStore,
    stats: VerifyStats,
    deadline: Option<Instant>,
}

impl Run<'_> {
    fn dump(&self, name: &str, f: &Formula) -> Result<(), VerifyError> {
        if let Some(dir) = &self.cfg.dump_smt {
            std::fs::create_dir_all(dir)?;
            let mut script = f.to_script(Logic::of(f).name());
            script.push_str("(exit)\n");
            std::fs::write(dir.join(format!("{name}.smt2")), script)?;
        }
        Ok(())
    }

    fn check(&mut self, name: &str, f: &Formula) -> Result<CheckResult, VerifyError> {
        self.dump(name, f)?;
        self.stats.queries += 1;
        let r = self.session.check(f)?;
        if r.is_unknown() {
            self.stats.unknowns += 1;
        }
        log::debug!("{name}: {}", r.verdict());
        Ok(r)
    }

    fn timed_out(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    fn proved_by_engine(&self, k: usize) -> Option<Verdict> {
        let snap = self.store.latest();
        snap.proved_safe.then_some(Verdict::True {
            source: ProofSource::InvariantEngine,
            k,
            inv_version: snap.version,
        })
    }

    fn step(&mut self, k: usize) -> Result<Option<Verdict>, VerifyError> {
        loop {
            let (version, inv) = get_currently_known_invariant(&self.store);
            self.stats.inv_version = version;
            let q = self.ts.encode_step_case(k, &inv, self.cfg.havoc);
            let name = format!("step_k{k}_v{version}");
            self.stats.step_checks += 1;
            let r = if self.cfg.incremental {
                self.dump(&name, &q.monolithic())?;
                self.stats.queries += 1;
                let r = self.session.check_assuming_incremental(&q.persistent, &q.delta)?;
                if r.is_unknown() {
                    self.stats.unknowns += 1;
                }
                r
            } else {
                self.check(&name, &q.monolithic())?
            };
            match r {
                CheckResult::Unsat => {
                    return Ok(Some(Verdict::True {
                        source: ProofSource::Induction,
                        k,
                        inv_version: version,
                    }))
                }
                CheckResult::Unknown(_) => return Ok(None),
                CheckResult::Sat(_) => {
                    if let Some(v) = self.proved_by_engine(k) {
                        return Ok(Some(v));
                    }
                    if self.store.latest().version == version || self.timed_out() {
                        return Ok(None);
                    }
                }
            }
        }
    }

    fn main_loop(&mut self) -> Result<Verdict, VerifyError> {
        let cfg = self.cfg;
        // last depth up to which the base case is known to be violation-free
        let mut checked: Option<usize> = None;
        let k_init = cfg.k_init.max(1);
        let mut k = k_init;
        let mut last_k = k;
        while k <= cfg.k_max {
            last_k = k;
            if self.timed_out() {
                return Ok(Verdict::Unknown {
                    reason: UnknownReason::Timeout,
                    k,
                });
            }
            if let Some(v) = self.proved_by_engine(k) {
                return Ok(v);
            }

            // base case
            let from = if cfg.omit_checked {
                checked.map_or(0, |c| c + 1)
            } else {
                0
            };
            if from <= k {
                let f = self.ts.encode_base_case_from(from, k);
                match self.check(&format!("base_k{k}"), &f)? {
                    CheckResult::Sat(m) => {
                        match self.ts.extract_trace(&|n| m.int(n), k) {
                            Ok((trace, iterations)) => {
                                return Ok(Verdict::False {
                                    trace,
                                    k,
                                    iterations,
                                })
                            }
                            Err(ExtractError::ModelIncomplete(s)) => {
                                log::warn!("base case model lacks `{s}`");
                                self.stats.unknowns += 1;
                            }
                            Err(ExtractError::ReplayFailed) => {
                                log::warn!("base case model does not replay; treating as unknown");
                                self.stats.unknowns += 1;
                            }
                        }
                    }
                    CheckResult::Unsat => {
                        if from == 0 || checked.is_some_and(|c| c + 1 >= from) {
                            checked = Some(k);
                        }
                    }
                    CheckResult::Unknown(_) => {}
                }
            }
            let base_done = checked.is_some_and(|c| c + 1 >= k);

            // forward condition
            if base_done {
                let f = self.ts.encode_forward_condition(k);
                if self.check(&format!("forward_k{k}"), &f)?.is_unsat() {
                    return Ok(Verdict::True {
                        source: ProofSource::ForwardCondition,
                        k,
                        inv_version: self.store.latest().version,
                    });
                }
            }

            // inductive step
            if let Some(v) = self.proved_by_engine(k) {
                return Ok(v);
            }
            if base_done {
                if let Some(v) = self.step(k)? {
                    return Ok(v);
                }
            }
            k += 1;
        }
        Ok(Verdict::Unknown {
            reason: if self.stats.unknowns > 0 {
                UnknownReason::SolverUnknown
            } else {
                UnknownReason::KMaxExhausted
            },
            k: last_k,
        })
    }
}

/// Checks the program; the first definitive answer wins.
pub fn verify(ncfa: &NormalizedCfa, cfg: &KInductionConfig) -> Result<VerifyOutcome, VerifyError> {
    let start = Instant::now();
    let ts = build_ts(ncfa)?;
    let store = InvariantStore::new();
    if let Some(inv) = &cfg.injected_invariant {
        store.publish(inv.body.clone(), false, None);
    }
    let never = AtomicBool::new(false);
    let mut worker = None;
    match cfg.invariants {
        InvariantMode::Off => {}
        InvariantMode::Static(p) => {
            invgen::generate(ncfa, &[p.precision(ncfa)], &store, cfg.round_budget, &never);
        }
        InvariantMode::Continuous => match cfg.deterministic_rounds {
            Some(r) => {
                let sched = invgen::schedule(ncfa);
                let r = r.min(sched.len());
                invgen::generate(ncfa, &sched[..r], &store, cfg.round_budget, &never);
            }
            None => {
                worker = Some(InvGenWorker::spawn(ncfa.clone(), store.clone(), cfg.round_budget));
            }
        },
    }
    let session = Session::new(cfg.solver.clone())?;
    let mut run = Run {
        ts,
        cfg,
        session,
        store: store.clone(),
        stats: VerifyStats::default(),
        deadline: cfg.timeout.map(|t| start + t),
    };
    let verdict = run.main_loop();
    if let Some(w) = worker {
        run.stats.invgen_cpu = w.stop().1;
    }
    let verdict = verdict?;
    run.stats.solver_cpu = run.session.cpu_time();
    if let Verdict::True { inv_version, .. } = &verdict {
        run.stats.inv_version = *inv_version;
    }
    log::info!("{verdict} after {:?}", start.elapsed());
    Ok(VerifyOutcome {
        verdict,
        stats: run.stats,
        snapshots: store.history(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfa::build_cfa;
    use crate::lang::parse;
    use crate::normalize::to_single_loop;
    use crate::programs;

    fn norm(src: &str) -> NormalizedCfa {
        to_single_loop(&build_cfa(&parse(src).unwrap())).unwrap()
    }

    fn cfg(mode: InvariantMode) -> KInductionConfig {
        KInductionConfig {
            invariants: mode,
            deterministic_rounds: Some(1),
            k_max: 20,
            ..KInductionConfig::default()
        }
    }

    #[test]
    fn safe_example_is_proved_with_invariants() {
        let out = verify(&norm(programs::EXAMPLE_SAFE), &cfg(InvariantMode::Continuous)).unwrap();
        assert!(out.verdict.is_true(), "{}", out.verdict);
        assert!(out.verdict.final_k() <= 4);
    }

    #[test]
    fn safe_example_diverges_without_invariants() {
        let out = verify(&norm(programs::EXAMPLE_SAFE), &cfg(InvariantMode::Off)).unwrap();
        assert_eq!(
            out.verdict,
            Verdict::Unknown {
                reason: UnknownReason::KMaxExhausted,
                k: 20
            }
        );
    }

    #[test]
    fn unsafe_example_is_refuted_with_three_iterations() {
        for havoc in [HavocStrategy::SoundAll, HavocStrategy::SoundLoopModified] {
            let c = KInductionConfig {
                havoc,
                ..cfg(InvariantMode::Continuous)
            };
            let n = norm(programs::EXAMPLE_UNSAFE);
            let out = verify(&n, &c).unwrap();
            let Verdict::False { trace, iterations, .. } = &out.verdict else {
                panic!("{}", out.verdict)
            };
            assert_eq!(*iterations, 3);
            assert!(crate::interp::replays_to_error(&n.cfa, trace));
        }
    }

    #[test]
    fn termination_vars_havoc_gives_the_wrong_proof() {
        let c = KInductionConfig {
            havoc: HavocStrategy::UnsoundTerminationVars,
            ..cfg(InvariantMode::Off)
        };
        let out = verify(&norm(programs::EXAMPLE_UNSAFE), &c).unwrap();
        assert!(out.verdict.is_true(), "{}", out.verdict);
    }

    #[test]
    fn bounded_loop_is_proved_by_the_forward_condition() {
        let out = verify(
            &norm("int i; i = 0; while (i < 2) { i = i + 1; assert(i != -5); }"),
            &cfg(InvariantMode::Off),
        )
        .unwrap();
        assert_eq!(
            out.verdict,
            Verdict::True {
                source: ProofSource::ForwardCondition,
                k: 3,
                inv_version: 0
            }
        );
    }

    #[test]
    fn engine_proof_short_circuits() {
        let out = verify(&norm("int x; x = 1; assert(x == 1);"), &cfg(InvariantMode::Continuous)).unwrap();
        assert!(matches!(
            out.verdict,
            Verdict::True {
                source: ProofSource::InvariantEngine,
                ..
            }
        ));
    }

    #[test]
    fn incremental_and_monolithic_agree() {
        let n = norm(programs::EXAMPLE_SAFE);
        for incremental in [true, false] {
            let c = KInductionConfig {
                incremental,
                ..cfg(InvariantMode::Continuous)
            };
            assert!(verify(&n, &c).unwrap().verdict.is_true());
        }
    }

    #[test]
    fn modes_parse() {
        assert_eq!("off".parse::<InvariantMode>(), Ok(InvariantMode::Off));
        assert_eq!(
            "static:0,1,t".parse::<InvariantMode>().unwrap().to_string(),
            "static:0,1,t"
        );
        assert!("sometimes".parse::<InvariantMode>().is_err());
    }
}
