//! Fixtures shared by the pipeline benchmarks.

use kindle_core::cfa::build_cfa;
use kindle_core::corpus::{generate_corpus, CorpusConfig};
use kindle_core::lang::parse;
use kindle_core::normalize::{to_single_loop, NormalizedCfa};
use kindle_core::programs::{EXAMPLE_SAFE, EXAMPLE_UNSAFE};

pub fn normalize(src: &str) -> NormalizedCfa {
    to_single_loop(&build_cfa(&parse(src).expect("fixture parses"))).expect("fixture normalizes")
}

/// The two worked examples, named.
pub fn examples() -> Vec<(&'static str, NormalizedCfa)> {
    vec![
        ("example-safe", normalize(EXAMPLE_SAFE)),
        ("example-unsafe", normalize(EXAMPLE_UNSAFE)),
    ]
}

/// A fixed random corpus of `count` programs.
pub fn corpus(count: usize) -> Vec<NormalizedCfa> {
    generate_corpus(&CorpusConfig {
        seed: 7,
        count,
        ..CorpusConfig::default()
    })
    .iter()
    .map(|p| p.normalized())
    .collect()
}
