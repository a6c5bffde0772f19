use std::sync::atomic::AtomicBool;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use kindle_bench::{corpus, examples, normalize};
use kindle_core::cpa::Budget;
use kindle_core::encode::{build_ts, HavocStrategy};
use kindle_core::formula::Formula;
use kindle_core::invgen::{run_round, schedule};
use kindle_core::kinduction::{verify, InvariantMode, KInductionConfig};
use kindle_core::programs::EXAMPLE_SAFE;

fn frontend(c: &mut Criterion) {
    c.bench_function("parse+normalize/example-safe", |b| b.iter(|| normalize(EXAMPLE_SAFE)));
}

fn analysis(c: &mut Criterion) {
    let mut g = c.benchmark_group("invariant-round");
    let never = AtomicBool::new(false);
    let budget = Budget {
        max_pops: 2_000,
        wall: None,
    };
    for (name, n) in examples() {
        for prec in schedule(&n) {
            g.bench_with_input(BenchmarkId::new(name, prec.to_string()), &prec, |b, p| {
                b.iter(|| run_round(&n, p, budget, &never))
            });
        }
    }
    g.finish();
}

fn encoding(c: &mut Criterion) {
    let mut g = c.benchmark_group("encode");
    let (_, n) = examples().remove(0);
    let ts = build_ts(&n).unwrap();
    for k in [1, 4, 8] {
        g.bench_with_input(BenchmarkId::new("base", k), &k, |b, &k| b.iter(|| ts.encode_base_case(k)));
        g.bench_with_input(BenchmarkId::new("step", k), &k, |b, &k| {
            b.iter(|| ts.encode_step_case(k, &Formula::tt(), HavocStrategy::SoundAll))
        });
    }
    g.finish();
}

fn end_to_end(c: &mut Criterion) {
    let mut g = c.benchmark_group("verify");
    g.sample_size(10).measurement_time(Duration::from_secs(20));
    for mode in ["off", "static:0,1,t", "continuous"] {
        let cfg = KInductionConfig {
            k_max: 8,
            invariants: mode.parse::<InvariantMode>().unwrap(),
            deterministic_rounds: Some(usize::MAX),
            ..KInductionConfig::default()
        };
        g.bench_with_input(BenchmarkId::new("examples", mode), &cfg, |b, cfg| {
            b.iter(|| {
                for (_, n) in examples() {
                    verify(&n, cfg).unwrap();
                }
            })
        });
    }
    let programs = corpus(20);
    let cfg = KInductionConfig {
        k_max: 8,
        deterministic_rounds: Some(usize::MAX),
        ..KInductionConfig::default()
    };
    g.bench_function("corpus-20/continuous", |b| {
        b.iter(|| {
            for n in &programs {
                verify(n, &cfg).unwrap();
            }
        })
    });
    g.finish();
}

criterion_group!(benches, frontend, analysis, encoding, end_to_end);
criterion_main!(benches);
