//! Built-in example programs used as fixtures by tests, benches and the CLI.

/// Safe automaton program; provable by 4-induction once `s >= 1` is known.
pub const EXAMPLE_SAFE: &str = include_str!("../programs/example-safe_true.c");

/// Unsafe variant whose post-loop assertion fails after three iterations.
pub const EXAMPLE_UNSAFE: &str = include_str!("../programs/example-unsafe_false.c");
