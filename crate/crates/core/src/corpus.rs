//! Random small programs with known verdicts.
//!
//! Values stay small (updates are reduced modulo a small number) and
//! `nondet()` is only ever used for its truth value, so exploring the
//! choices 0 and 1 covers every behaviour and the exhaustive search gives
//! the exact verdict.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use num_bigint::BigInt;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cfa::build_cfa;
use crate::interp::Interpreter;
use crate::lang::parse;
use crate::normalize::{to_single_loop, NormalizedCfa};

const VAR_NAMES: [&str; 4] = ["a", "b", "c", "d"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusConfig {
    pub seed: u64,
    pub count: usize,
    /// At most this many variables (up to 4).
    pub max_vars: usize,
    /// At most this many loops before normalization.
    pub max_loops: usize,
    /// Programs with more reachable states are discarded.
    pub max_states: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            seed: 1,
            count: 200,
            max_vars: 4,
            max_loops: 2,
            max_states: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedProgram {
    /// File name carrying the verdict, like `gen_0007_true.c`.
    pub name: String,
    pub source: String,
    pub safe: bool,
}

impl GeneratedProgram {
    pub fn normalized(&self) -> NormalizedCfa {
        let ast = parse(&self.source).expect("generated programs parse");
        to_single_loop(&build_cfa(&ast)).expect("generated programs are structured")
    }
}

/// The havoc domain that covers generated programs.
pub fn nondet_domain() -> Vec<BigInt> {
    vec![BigInt::from(0), BigInt::from(1)]
}

struct Gen<'a> {
    rng: &'a mut ChaCha8Rng,
    vars: Vec<&'static str>,
    loops_left: usize,
    asserts: usize,
    out: String,
}

impl Gen<'_> {
    fn var(&mut self) -> &'static str {
        self.vars.choose(self.rng).copied().unwrap()
    }

    fn small(&mut self) -> i64 {
        self.rng.gen_range(0..=4)
    }

    fn atom(&mut self) -> String {
        match self.rng.gen_range(0..7) {
            0 => "nondet()".to_string(),
            1 => {
                let (v, c) = (self.var(), self.small());
                format!("{v} < {c}")
            }
            2 => {
                let (u, v) = (self.var(), self.var());
                format!("{u} == {v}")
            }
            3 => {
                let (v, c) = (self.var(), self.small());
                format!("{v} != {c}")
            }
            4 => {
                let (u, v, c) = (self.var(), self.var(), self.rng.gen_range(1..=6));
                format!("{u} + {v} < {c}")
            }
            5 => {
                let (v, c) = (self.var(), self.small());
                format!("{v} >= {c}")
            }
            _ => {
                let (u, v) = (self.var(), self.var());
                format!("{u} <= {v}")
            }
        }
    }

    fn cond(&mut self) -> String {
        match self.rng.gen_range(0..6) {
            0 => format!("{} && {}", self.atom(), self.atom()),
            1 => format!("{} || {}", self.atom(), self.atom()),
            2 => format!("!({})", self.atom()),
            _ => self.atom(),
        }
    }

    /// Right-hand side whose value stays in a small range.
    fn rhs(&mut self) -> String {
        let m = self.rng.gen_range(2..=5);
        match self.rng.gen_range(0..8) {
            0 => self.small().to_string(),
            1 => {
                let v = self.var();
                format!("({v} + 1) % {m}")
            }
            2 => {
                let (u, v) = (self.var(), self.var());
                format!("({u} + {v}) % {m}")
            }
            3 => {
                let v = self.var();
                format!("({v} * 2) % {m}")
            }
            4 => {
                let v = self.var();
                format!("({v} - 1) % {m}")
            }
            5 => {
                let (u, v) = (self.var(), self.var());
                format!("{u} < {v}")
            }
            6 => "nondet() != 0".to_string(),
            _ => {
                let (u, c) = (self.var(), self.small());
                format!("{u} == {c}")
            }
        }
    }

    fn indent(&mut self, depth: usize) {
        for _ in 0..depth {
            self.out.push_str("  ");
        }
    }

    fn block(&mut self, depth: usize, len: usize) {
        for _ in 0..len {
            self.stmt(depth);
        }
    }

    fn stmt(&mut self, depth: usize) {
        let roll = self.rng.gen_range(0..10);
        if roll < 2 && self.loops_left > 0 {
            self.loops_left -= 1;
            let c = self.cond();
            self.indent(depth);
            let _ = writeln!(self.out, "while ({c}) {{");
            let n = self.rng.gen_range(1..=3);
            self.block(depth + 1, n);
            self.indent(depth);
            self.out.push_str("}\n");
        } else if roll < 4 && depth < 3 {
            let c = self.cond();
            self.indent(depth);
            let _ = writeln!(self.out, "if ({c}) {{");
            let n = self.rng.gen_range(1..=2);
            self.block(depth + 1, n);
            self.indent(depth);
            if self.rng.gen_bool(0.5) {
                self.out.push_str("} else {\n");
                self.block(depth + 1, 1);
                self.indent(depth);
            }
            self.out.push_str("}\n");
        } else if roll < 5 {
            self.asserts += 1;
            let c = self.cond();
            self.indent(depth);
            let _ = writeln!(self.out, "assert({c});");
        } else {
            let (v, r) = (self.var(), self.rhs());
            self.indent(depth);
            let _ = writeln!(self.out, "{v} = {r};");
        }
    }
}

fn random_program(rng: &mut ChaCha8Rng, cfg: &CorpusConfig) -> String {
    let nvars = rng.gen_range(1..=cfg.max_vars.clamp(1, 4));
    let vars: Vec<&'static str> = VAR_NAMES[..nvars].to_vec();
    let mut g = Gen {
        rng,
        vars: vars.clone(),
        loops_left: cfg.max_loops,
        asserts: 0,
        out: String::new(),
    };
    for v in &vars {
        let _ = writeln!(g.out, "int {v};");
    }
    for v in &vars {
        let c = g.small();
        let _ = writeln!(g.out, "{v} = {c};");
    }
    let n = g.rng.gen_range(2..=5);
    g.block(0, n);
    if g.loops_left == cfg.max_loops {
        // make sure there is a loop
        g.loops_left -= 1;
        let c = g.cond();
        let _ = writeln!(g.out, "while ({c}) {{");
        g.block(1, 2);
        g.out.push_str("}\n");
    }
    if g.asserts == 0 {
        let c = g.cond();
        let _ = writeln!(g.out, "assert({c});");
    }
    g.out
}

/// Generates `cfg.count` programs whose verdict the exhaustive search
/// decides. The same seed always gives the same corpus.
pub fn generate_corpus(cfg: &CorpusConfig) -> Vec<GeneratedProgram> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let domain = nondet_domain();
    let mut out = Vec::new();
    let mut attempts = 0usize;
    while out.len() < cfg.count && attempts < cfg.count * 50 {
        attempts += 1;
        let source = random_program(&mut rng, cfg);
        let Ok(ast) = parse(&source) else {
            continue;
        };
        let Ok(ncfa) = to_single_loop(&build_cfa(&ast)) else {
            continue;
        };
        let Some(unsafe_) = Interpreter::new(&ncfa.cfa).exhaustive_error_reachable(&domain, cfg.max_states)
        else {
            continue;
        };
        let safe = !unsafe_;
        let name = format!("gen_{:04}_{}.c", out.len(), if safe { "true" } else { "false" });
        out.push(GeneratedProgram { name, source, safe });
    }
    out
}

/// Writes each program to `dir/<name>`.
pub fn write_corpus(dir: &Path, programs: &[GeneratedProgram]) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for p in programs {
        std::fs::write(dir.join(&p.name), &p.source)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_deterministic_and_labelled() {
        let cfg = CorpusConfig {
            count: 30,
            ..CorpusConfig::default()
        };
        let a = generate_corpus(&cfg);
        assert_eq!(a.len(), 30);
        assert_eq!(a, generate_corpus(&cfg));
        assert!(a.iter().any(|p| p.safe));
        assert!(a.iter().any(|p| !p.safe));
        for p in &a {
            assert!(p.name.ends_with(if p.safe { "_true.c" } else { "_false.c" }));
            let n = p.normalized();
            let user = n.cfa.vars().iter().filter(|v| !n.cfa.is_synthetic(v) && **v != n.pc_var);
            assert!(user.count() <= 4);
            assert!(n.has_loop());
        }
    }
}
