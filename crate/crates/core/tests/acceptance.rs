//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::sync::atomic::AtomicBool;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use kindle_core::cfa::build_cfa;
use kindle_core::corpus::{generate_corpus, nondet_domain, CorpusConfig, GeneratedProgram};
use kindle_core::cpa::{Budget, CpaError};
use kindle_core::domain::contains_concrete;
use kindle_core::encode::{build_ts, HavocStrategy};
use kindle_core::formula::{Formula, Term};
use kindle_core::harness::{compare_configs, score, standard_configs, Task, TaskResult};
use kindle_core::interp::{replays_to_error, Interpreter};
use kindle_core::invgen::{analyze, schedule, InvariantSnapshot};
use kindle_core::kinduction::{
    verify, InvariantMode, KInductionConfig, ProofSource, UnknownReason, Verdict, VerifyOutcome,
};
use kindle_core::lang::parse;
use kindle_core::normalize::{to_single_loop, NormalizedCfa};
use kindle_core::programs::{EXAMPLE_SAFE, EXAMPLE_UNSAFE};
use kindle_core::smt::{Session, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CORPUS_SEED: u64 = 2015;
const CORPUS_SIZE: usize = 200;
const BASE_K_MAX: usize = 5;
const VERIFY_K_MAX: usize = 8;
const BOUNDED_STEPS: usize = 40;
const SCORE_VECTORS: usize = 1000;
const EXAMPLE_LIMIT: Duration = Duration::from_secs(30);
const BENCH_LIMIT: Duration = Duration::from_secs(15 * 60);
const WORKERS: usize = 4;

fn norm(src: &str) -> NormalizedCfa {
    to_single_loop(&build_cfa(&parse(src).unwrap())).unwrap()
}

fn corpus() -> &'static [GeneratedProgram] {
    static C: OnceLock<Vec<GeneratedProgram>> = OnceLock::new();
    C.get_or_init(|| {
        generate_corpus(&CorpusConfig {
            seed: CORPUS_SEED,
            count: CORPUS_SIZE,
            ..CorpusConfig::default()
        })
    })
}

fn oracle_safe(p: &GeneratedProgram) -> bool {
    p.safe
}

fn v(name: &str) -> Term {
    Term::int_var(name)
}

fn solver() -> Session {
    Session::new(SolverConfig::default()).expect("z3 on PATH")
}

/// Deterministic continuous configuration: every scheduled round runs
/// before the first check.
fn continuous(k_max: usize) -> KInductionConfig {
    KInductionConfig {
        k_max,
        deterministic_rounds: Some(usize::MAX),
        ..KInductionConfig::default()
    }
}

/// Maps `f` over `items` on `WORKERS` threads, keeping the order.
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let next = std::sync::atomic::AtomicUsize::new(0);
    let out = std::sync::Mutex::new(Vec::with_capacity(items.len()));
    std::thread::scope(|s| {
        for _ in 0..WORKERS {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                let Some(item) = items.get(i) else {
                    break;
                };
                let r = f(item);
                out.lock().unwrap().push((i, r));
            });
        }
    });
    let mut v = out.into_inner().unwrap();
    v.sort_by_key(|(i, _)| *i);
    v.into_iter().map(|(_, r)| r).collect()
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn c1_safe_example() -> Outcome {
    let n = norm(EXAMPLE_SAFE);
    let start = Instant::now();
    let cfg = KInductionConfig {
        invariants: InvariantMode::Continuous,
        ..KInductionConfig::default()
    };
    let out = verify(&n, &cfg).unwrap();
    let elapsed = start.elapsed();
    let mut s = solver();
    let goal = Term::ge(v("s"), Term::int(1));
    let implied = out.snapshots.iter().any(|snap| {
        s.check(&snap.formula.clone().and(Formula::new(Term::not(goal.clone()))))
            .unwrap()
            .is_unsat()
    });
    let pass = out.verdict.is_true() && out.verdict.final_k() <= 4 && implied && elapsed < EXAMPLE_LIMIT;
    outcome(
        pass,
        format!(
            "{} ; snapshot implies s >= 1: {implied} ; {:.2}s",
            out.verdict,
            elapsed.as_secs_f64()
        ),
    )
}

fn c2_ladder() -> Outcome {
    let ts = build_ts(&norm(EXAMPLE_SAFE)).unwrap();
    let strong = Formula::new(Term::and([
        Term::ge(v("s"), Term::int(1)),
        Term::le(v("s"), Term::int(4)),
        Term::implies(Term::ne(v("s"), Term::int(2)), Term::eq(v("x1"), v("x2"))),
    ]));
    let mut s = solver();
    let all = HavocStrategy::SoundAll;
    let strong_unsat = s
        .check(&ts.encode_step_case(2, &strong, all).monolithic())
        .unwrap()
        .is_unsat();
    let weak_sat: Vec<usize> = (1..=8)
        .filter(|&k| {
            s.check(&ts.encode_step_case(k, &Formula::tt(), all).monolithic())
                .unwrap()
                .is_sat()
        })
        .collect();
    // the same invariant through the verifier's injection hook
    let out = verify(
        &norm(EXAMPLE_SAFE),
        &KInductionConfig {
            invariants: InvariantMode::Off,
            injected_invariant: Some(strong),
            k_max: 8,
            ..KInductionConfig::default()
        },
    )
    .unwrap();
    let pass = strong_unsat && weak_sat.len() == 8 && out.verdict.is_true() && out.verdict.final_k() <= 2;
    outcome(
        pass,
        format!(
            "strong k=2 unsat: {strong_unsat} ; true sat at k={weak_sat:?} ; injected run: {}",
            out.verdict
        ),
    )
}

fn c3_no_invariants() -> Outcome {
    let out = verify(
        &norm(EXAMPLE_SAFE),
        &KInductionConfig {
            invariants: InvariantMode::Off,
            k_max: 20,
            ..KInductionConfig::default()
        },
    )
    .unwrap();
    let pass = matches!(
        out.verdict,
        Verdict::Unknown {
            reason: UnknownReason::KMaxExhausted,
            k: 20
        }
    );
    outcome(pass, out.verdict.to_string())
}

fn c4_unsafe_example() -> Outcome {
    let n = norm(EXAMPLE_UNSAFE);
    let mut bad = Vec::new();
    let mut runs = 0;
    for havoc in [HavocStrategy::SoundAll, HavocStrategy::SoundLoopModified] {
        for inv in ["off", "static:0,1,t", "continuous"] {
            runs += 1;
            let cfg = KInductionConfig {
                havoc,
                invariants: inv.parse().unwrap(),
                k_max: 20,
                ..KInductionConfig::default()
            };
            let out = verify(&n, &cfg).unwrap();
            let ok = match &out.verdict {
                Verdict::False { trace, iterations, .. } => {
                    *iterations == 3 && replays_to_error(&n.cfa, trace)
                }
                _ => false,
            };
            if !ok {
                bad.push(format!("{havoc}/{inv}: {}", out.verdict));
            }
        }
    }
    let heuristic = verify(
        &n,
        &KInductionConfig {
            havoc: HavocStrategy::UnsoundTerminationVars,
            ..continuous(20)
        },
    )
    .unwrap();
    let oracle = Interpreter::new(&n.cfa)
        .shortest_cex(&nondet_domain(), 20)
        .map(|(_, it)| it);
    let pass = bad.is_empty() && heuristic.verdict.is_true() && oracle == Some(3);
    outcome(
        pass,
        format!(
            "{} sound runs, failures {bad:?} ; oracle iterations {oracle:?} ; termination-vars: {}",
            runs, heuristic.verdict
        ),
    )
}

fn c5_base_case_oracle() -> Outcome {
    let programs = corpus();
    let per_program = par_map(programs, |p| {
        let n = p.normalized();
        let ts = build_ts(&n).unwrap();
        let interp = Interpreter::new(&n.cfa);
        let mut s = solver();
        let mut bad = Vec::new();
        for k in 0..=BASE_K_MAX {
            let oracle = interp.shortest_cex(&nondet_domain(), k).is_some();
            let r = s.check(&ts.encode_base_case(k)).unwrap();
            if r.is_unknown() || r.is_sat() != oracle {
                bad.push(format!("{} k={k}: smt {} oracle {oracle}", p.name, r.verdict()));
            }
        }
        bad
    });
    let checks = programs.len() * (BASE_K_MAX + 1);
    let disagreements: Vec<String> = per_program.into_iter().flatten().collect();
    let pass = programs.len() >= 200 && disagreements.is_empty();
    outcome(
        pass,
        format!(
            "{} programs, {checks} checks, {} disagreements {:?}",
            programs.len(),
            disagreements.len(),
            disagreements.iter().take(3).collect::<Vec<_>>()
        ),
    )
}

/// Sound-configuration runs on the corpus, shared by several criteria.
fn soundness_runs() -> &'static Vec<(usize, HavocStrategy, VerifyOutcome)> {
    static R: OnceLock<Vec<(usize, HavocStrategy, VerifyOutcome)>> = OnceLock::new();
    R.get_or_init(|| {
        let jobs: Vec<(usize, HavocStrategy)> = (0..corpus().len())
            .flat_map(|i| {
                [HavocStrategy::SoundAll, HavocStrategy::SoundLoopModified]
                    .into_iter()
                    .map(move |h| (i, h))
            })
            .collect();
        par_map(&jobs, |&(i, havoc)| {
            let cfg = KInductionConfig {
                havoc,
                ..continuous(VERIFY_K_MAX)
            };
            (i, havoc, verify(&corpus()[i].normalized(), &cfg).unwrap())
        })
    })
}

fn c6_soundness() -> Outcome {
    let runs = soundness_runs();
    let mut violations = Vec::new();
    let (mut t, mut f, mut u) = (0, 0, 0);
    for (i, havoc, out) in runs {
        let p = &corpus()[*i];
        match &out.verdict {
            Verdict::True { .. } => {
                t += 1;
                if !oracle_safe(p) {
                    violations.push(format!("{} [{havoc}]: TRUE on unsafe", p.name));
                }
            }
            Verdict::False { trace, .. } => {
                f += 1;
                if !replays_to_error(&p.normalized().cfa, trace) || oracle_safe(p) {
                    violations.push(format!("{} [{havoc}]: bad FALSE", p.name));
                }
            }
            Verdict::Unknown { .. } => u += 1,
        }
    }
    outcome(
        violations.is_empty(),
        format!(
            "{} runs: {t} TRUE, {f} FALSE, {u} UNKNOWN ; violations {violations:?}",
            runs.len()
        ),
    )
}

fn c7_domain_soundness() -> Outcome {
    let never = AtomicBool::new(false);
    let budget = Budget {
        max_pops: 10_000,
        wall: None,
    };
    let mut violations = Vec::new();
    let (mut analyses, mut exhausted, mut states) = (0, 0, 0);
    for p in corpus() {
        let n = p.normalized();
        let concrete = Interpreter::new(&n.cfa).bounded_states(&nondet_domain(), BOUNDED_STEPS);
        for prec in schedule(&n) {
            analyses += 1;
            let reached = match analyze(&n, &prec, budget, &never) {
                Ok(r) => r,
                Err(CpaError::BudgetExhausted) => {
                    exhausted += 1;
                    continue;
                }
                Err(e) => panic!("{e}"),
            };
            for c in &concrete {
                states += 1;
                let lookup = |var: &str| c.value(&n.cfa, var).cloned();
                if !reached.at(c.loc).any(|a| contains_concrete(a, &lookup)) {
                    violations.push(format!("{} at {prec}: {:?}", p.name, c));
                }
            }
        }
    }
    outcome(
        violations.is_empty(),
        format!(
            "{analyses} analyses ({exhausted} out of budget), {states} state checks, {} violations {:?}",
            violations.len(),
            violations.iter().take(2).collect::<Vec<_>>()
        ),
    )
}

fn c8_monotonicity() -> Outcome {
    let mut s = solver();
    let mut pairs = 0;
    let mut violations = Vec::new();
    let check = |s: &mut Session, snaps: &[InvariantSnapshot], name: &str, pairs: &mut usize, violations: &mut Vec<String>| {
        for j in 0..snaps.len() {
            for i in 0..j {
                *pairs += 1;
                let q = snaps[j].formula.clone().and(snaps[i].formula.clone().negate());
                if !s.check(&q).unwrap().is_unsat() {
                    violations.push(format!("{name}: v{} does not imply v{}", snaps[j].version, snaps[i].version));
                }
            }
        }
    };
    for (i, _, out) in soundness_runs() {
        check(&mut s, &out.snapshots, &corpus()[*i].name, &mut pairs, &mut violations);
    }
    // background worker on the two examples
    for src in [EXAMPLE_SAFE, EXAMPLE_UNSAFE] {
        let out = verify(&norm(src), &KInductionConfig::default()).unwrap();
        check(&mut s, &out.snapshots, "example", &mut pairs, &mut violations);
    }
    outcome(
        violations.is_empty(),
        format!("{pairs} snapshot pairs, violations {violations:?}"),
    )
}

fn c9_scoring() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let alarm = false_verdict();
    let mut mismatches = 0;
    for _ in 0..SCORE_VECTORS {
        let len = rng.gen_range(0..60);
        let mut results = Vec::new();
        let mut expected_score = 0i64;
        for i in 0..len {
            let expected_safe = rng.gen_bool(0.5);
            let answer = match rng.gen_range(0..3) {
                0 => None,
                1 => Some(true),
                _ => Some(false),
            };
            expected_score += match (expected_safe, answer) {
                (_, None) => 0,
                (true, Some(true)) => 2,
                (false, Some(false)) => 1,
                (false, Some(true)) => -12,
                (true, Some(false)) => -6,
            };
            let verdict = answer.map(|a| {
                if a {
                    Verdict::True {
                        source: ProofSource::Induction,
                        k: 1,
                        inv_version: 0,
                    }
                } else {
                    alarm.clone()
                }
            });
            let r = TaskResult {
                task: format!("t{i}"),
                config: "c".into(),
                expected_safe,
                verdict,
                error: None,
                cpu_time: Duration::from_millis(rng.gen_range(0..1000)),
                wall_time: Duration::ZERO,
                final_k: 1,
                inv_version: 0,
            };
            results.push(r);
        }
        let report = score(&results);
        let got = report.configs.first().map_or(0, |c| c.score);
        let quantile_ok = report.configs.first().is_none_or(|c| {
            c.quantile.last().map(|p| p.0) == Some(c.score) && c.quantile.windows(2).all(|w| w[0].1 <= w[1].1)
        });
        if got != expected_score || !quantile_ok {
            mismatches += 1;
        }
    }
    outcome(
        mismatches == 0,
        format!("{SCORE_VECTORS} vectors, {mismatches} mismatches"),
    )
}

fn false_verdict() -> Verdict {
    let n = norm(EXAMPLE_UNSAFE);
    let (trace, iterations) = Interpreter::new(&n.cfa)
        .shortest_cex(&nondet_domain(), 5)
        .unwrap();
    Verdict::False {
        trace,
        k: iterations,
        iterations,
    }
}

fn c10_ordering() -> Outcome {
    let mut tasks: Vec<Task> = corpus()
        .iter()
        .map(|p| Task::new(&p.name, &p.source, p.safe))
        .collect();
    tasks.push(Task::new("example-safe_true.c", EXAMPLE_SAFE, true));
    tasks.push(Task::new("example-unsafe_false.c", EXAMPLE_UNSAFE, false));
    let configs = standard_configs(&continuous(VERIFY_K_MAX));
    let start = Instant::now();
    let (results, report) = compare_configs(&tasks, &configs, WORKERS).unwrap();
    let elapsed = start.elapsed();
    let solved = |name: &str| -> BTreeSet<&str> {
        results
            .iter()
            .filter(|r| r.config == name && r.classification().is_correct())
            .map(|r| r.task.as_str())
            .collect()
    };
    let (off, st, cont) = (solved("off"), solved("static:0,1,t"), solved("continuous"));
    let wrong: usize = report.configs.iter().map(|c| c.wrong_proofs + c.wrong_alarms).sum();
    let pass = cont.is_superset(&st) && st.is_superset(&off) && elapsed < BENCH_LIMIT && wrong == 0;
    let scores: Vec<String> = report
        .configs
        .iter()
        .map(|c| format!("{}={} ({} correct)", c.config, c.score, c.correct()))
        .collect();
    outcome(
        pass,
        format!(
            "{} tasks ; {} ; static\\continuous {:?} ; off\\static {:?} ; {:.1}s",
            tasks.len(),
            scores.join(", "),
            st.difference(&cont).collect::<Vec<_>>(),
            off.difference(&st).collect::<Vec<_>>(),
            elapsed.as_secs_f64()
        ),
    )
}

fn c11_incremental() -> Outcome {
    let mut golden: Vec<(String, NormalizedCfa, Vec<InvariantSnapshot>)> = Vec::new();
    for (name, src) in [("example-safe", EXAMPLE_SAFE), ("example-unsafe", EXAMPLE_UNSAFE)] {
        let n = norm(src);
        let out = verify(&n, &continuous(6)).unwrap();
        golden.push((name.into(), n, out.snapshots));
    }
    for (i, havoc, out) in soundness_runs() {
        if *havoc == HavocStrategy::SoundAll {
            let p = &corpus()[*i];
            golden.push((p.name.clone(), p.normalized(), out.snapshots.clone()));
        }
    }
    let per_program = par_map(&golden, |(name, n, snaps)| {
        let ts = build_ts(n).unwrap();
        let mut invs = vec![Formula::tt()];
        invs.extend(snaps.iter().map(|s| s.formula.clone()));
        // one long-lived incremental session per program, as in the verifier
        let mut inc = solver();
        let mut checks = 0;
        let mut bad = Vec::new();
        for k in 1..=4 {
            for inv in &invs {
                let q = ts.encode_step_case(k, inv, HavocStrategy::SoundAll);
                let a = inc
                    .check_assuming_incremental(&q.persistent, &q.delta)
                    .unwrap();
                let b = solver().check(&q.monolithic()).unwrap();
                checks += 1;
                if a.verdict() != b.verdict() {
                    bad.push(format!("{name} k={k}: {} vs {}", a.verdict(), b.verdict()));
                }
            }
        }
        (checks, bad)
    });
    let checks: usize = per_program.iter().map(|(c, _)| c).sum();
    let mismatches: Vec<String> = per_program.into_iter().flat_map(|(_, b)| b).collect();
    outcome(
        mismatches.is_empty(),
        format!(
            "{} programs, {checks} step checks, mismatches {mismatches:?}",
            golden.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("1 safe example proved with k <= 4", c1_safe_example),
        ("2 invariant ladder", c2_ladder),
        ("3 plain k-induction exhausts k_max", c3_no_invariants),
        ("4 unsafe example refuted, heuristic wrong proof", c4_unsafe_example),
        ("5 base case matches brute force", c5_base_case_oracle),
        ("6 verifier sound on corpus", c6_soundness),
        ("7 reached sets cover concrete states", c7_domain_soundness),
        ("8 snapshots strengthen monotonically", c8_monotonicity),
        ("9 scoring arithmetic", c9_scoring),
        ("10 configuration ordering", c10_ordering),
        ("11 incremental equals monolithic", c11_incremental),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|x| name.starts_with(x.as_str())) {
            continue;
        }
        let start = Instant::now();
        let o = f();
        if !o.pass {
            failed += 1;
        }
        println!(
            "[{}] criterion {name} ({:.1}s): {}",
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
