use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use kindle_core::cfa::build_cfa;
use kindle_core::corpus::{generate_corpus, write_corpus, CorpusConfig};
use kindle_core::encode::HavocStrategy;
use kindle_core::harness::{compare_configs, load_configs, load_corpus, write_csv, write_quantiles};
use kindle_core::interp::{Interpreter, Outcome};
use kindle_core::kinduction::{verify, InvariantMode, KInductionConfig, Verdict};
use kindle_core::lang::parse;
use kindle_core::normalize::{to_single_loop, NormalizedCfa};
use kindle_core::smt::{Logic, SolverConfig};

const EXIT_TRUE: u8 = 0;
const EXIT_FALSE: u8 = 1;
const EXIT_UNKNOWN: u8 = 2;
const EXIT_USAGE: u8 = 10;
const EXIT_INPUT: u8 = 11;
const EXIT_INTERNAL: u8 = 12;

#[derive(Parser)]
#[command(name = "kindle", version, about = "k-induction model checker with interval invariants")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check that no assertion in a program can fail.
    Verify(VerifyArgs),
    /// Run every program in a directory under several configurations.
    Bench(BenchArgs),
    /// Execute a program with fixed values for `nondet()`.
    Interpret(InterpretArgs),
    /// Write a random corpus of small programs with known verdicts.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct VerifyArgs {
    file: PathBuf,
    #[arg(long, default_value_t = 1)]
    k_init: usize,
    #[arg(long, default_value_t = 100)]
    k_max: usize,
    /// off, static:<vars>,<depth>,<t|f> or continuous
    #[arg(long, default_value = "continuous")]
    invgen: InvariantMode,
    /// all, loop-modified or termination-vars (unsound)
    #[arg(long, default_value = "all")]
    havoc: HavocStrategy,
    /// Solver command line; must speak SMT-LIB 2 on stdin.
    #[arg(long, default_value = "z3 -in -smt2")]
    solver_cmd: String,
    /// Logic declared to the solver first (QF_LIA, QF_UFLIA or ALL); raised
    /// automatically when a query needs more.
    #[arg(long, default_value = "QF_LIA")]
    solver_logic: Logic,
    /// Overall limit in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    /// Write every query to this directory.
    #[arg(long)]
    dump_smt: Option<PathBuf>,
    /// Finish this many invariant rounds before the first check.
    #[arg(long)]
    deterministic_rounds: Option<usize>,
    /// Worklist pops allowed per invariant round.
    #[arg(long)]
    invgen_round_budget: Option<usize>,
    /// Print the normalized CFA before checking.
    #[arg(long)]
    dump_cfa: bool,
    /// Print the counterexample trace on FALSE.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct BenchArgs {
    corpus: PathBuf,
    /// TOML file with one [[config]] table per configuration.
    #[arg(long)]
    configs: PathBuf,
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
    /// Also write the score/time quantile series here.
    #[arg(long)]
    quantiles: Option<PathBuf>,
    /// Parallel tasks.
    #[arg(long, short = 'j', default_value_t = default_jobs())]
    jobs: usize,
}

#[derive(Args)]
struct InterpretArgs {
    file: PathBuf,
    /// Values returned by successive nondet() calls; 0 once exhausted.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    choices: Vec<i64>,
    #[arg(long, default_value_t = 100_000)]
    max_steps: usize,
}

#[derive(Args)]
struct GenerateArgs {
    dir: PathBuf,
    #[arg(long, default_value_t = 200)]
    count: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

enum Failure {
    Input(anyhow::Error),
    Internal(anyhow::Error),
}

fn load(path: &PathBuf) -> Result<NormalizedCfa, Failure> {
    let src = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::Input)?;
    let ast = parse(&src)
        .with_context(|| path.display().to_string())
        .map_err(Failure::Input)?;
    to_single_loop(&build_cfa(&ast))
        .with_context(|| path.display().to_string())
        .map_err(Failure::Input)
}

fn run_verify(a: VerifyArgs) -> Result<u8, Failure> {
    let ncfa = load(&a.file)?;
    if a.dump_cfa {
        print!("{}", ncfa.cfa.dump());
    }
    let mut cfg = KInductionConfig {
        k_init: a.k_init,
        k_max: a.k_max,
        havoc: a.havoc,
        invariants: a.invgen,
        deterministic_rounds: a.deterministic_rounds,
        solver: SolverConfig {
            logic: a.solver_logic,
            ..SolverConfig::default().with_command(&a.solver_cmd)
        },
        timeout: a
            .timeout
            .map(Duration::try_from_secs_f64)
            .transpose()
            .context("--timeout")
            .map_err(Failure::Input)?,
        dump_smt: a.dump_smt,
        ..KInductionConfig::default()
    };
    if let Some(p) = a.invgen_round_budget {
        cfg.round_budget.max_pops = p;
    }
    if cfg.k_init == 0 || cfg.k_init > cfg.k_max {
        return Err(Failure::Input(anyhow::anyhow!("need 1 <= --k-init <= --k-max")));
    }
    if !cfg.havoc.is_sound() {
        log::warn!("havoc strategy `{}` can miss bugs", cfg.havoc);
    }
    let out = verify(&ncfa, &cfg).map_err(|e| Failure::Internal(e.into()))?;
    println!("{}", out.verdict);
    log::info!(
        "{} queries, {} step checks, solver cpu {:.3}s",
        out.stats.queries,
        out.stats.step_checks,
        out.stats.solver_cpu.as_secs_f64()
    );
    Ok(match &out.verdict {
        Verdict::True { .. } => EXIT_TRUE,
        Verdict::False { trace, .. } => {
            if a.trace {
                print!("{}", trace.display(&ncfa.cfa));
            }
            EXIT_FALSE
        }
        Verdict::Unknown { .. } => EXIT_UNKNOWN,
    })
}

fn run_bench(a: BenchArgs) -> Result<u8, Failure> {
    let tasks = load_corpus(&a.corpus).map_err(|e| Failure::Input(e.into()))?;
    let configs = load_configs(&a.configs).map_err(|e| Failure::Input(e.into()))?;
    log::info!("{} tasks x {} configs on {} workers", tasks.len(), configs.len(), a.jobs);
    let (results, report) = compare_configs(&tasks, &configs, a.jobs).map_err(|e| Failure::Internal(e.into()))?;
    let file = File::create(&a.out)
        .with_context(|| format!("creating {}", a.out.display()))
        .map_err(Failure::Internal)?;
    write_csv(BufWriter::new(file), &results).map_err(|e| Failure::Internal(e.into()))?;
    if let Some(q) = &a.quantiles {
        let file = File::create(q)
            .with_context(|| format!("creating {}", q.display()))
            .map_err(Failure::Internal)?;
        write_quantiles(BufWriter::new(file), &report).map_err(|e| Failure::Internal(e.into()))?;
    }
    print!("{}", report.table());
    Ok(0)
}

fn run_interpret(a: InterpretArgs) -> Result<u8, Failure> {
    let ncfa = load(&a.file)?;
    let choices: Vec<_> = a.choices.iter().map(|&c| c.into()).collect();
    let r = Interpreter::new(&ncfa.cfa).run(&choices, a.max_steps);
    print!("{}", r.trace.display(&ncfa.cfa));
    let mut out = std::io::stdout();
    let _ = match r.outcome {
        Outcome::ErrorReached => writeln!(out, "assertion failed after {} loop iterations", r.iterations),
        Outcome::Completed => writeln!(out, "completed"),
        Outcome::StepBudgetExhausted => writeln!(out, "stopped after {} steps", a.max_steps),
        Outcome::Trapped(t) => writeln!(out, "trapped: {t:?}"),
    };
    Ok(match r.outcome {
        Outcome::ErrorReached => EXIT_FALSE,
        Outcome::Completed => EXIT_TRUE,
        _ => EXIT_UNKNOWN,
    })
}

fn run_generate(a: GenerateArgs) -> Result<u8, Failure> {
    let programs = generate_corpus(&CorpusConfig {
        seed: a.seed,
        count: a.count,
        ..CorpusConfig::default()
    });
    write_corpus(&a.dir, &programs)
        .with_context(|| format!("writing {}", a.dir.display()))
        .map_err(Failure::Internal)?;
    let safe = programs.iter().filter(|p| p.safe).count();
    println!(
        "wrote {} programs ({safe} safe, {} unsafe) to {}",
        programs.len(),
        programs.len() - safe,
        a.dir.display()
    );
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let result = match cli.command {
        Command::Verify(a) => run_verify(a),
        Command::Bench(a) => run_bench(a),
        Command::Interpret(a) => run_interpret(a),
        Command::Generate(a) => run_generate(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(EXIT_INTERNAL)
        }
    }
}
