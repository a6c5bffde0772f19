//! Corpus runner, scoring and result tables.

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::Deserialize;
use thiserror::Error;

use crate::cfa::build_cfa;
use crate::encode::HavocStrategy;
use crate::kinduction::{verify, InvariantMode, KInductionConfig, Verdict};
use crate::lang::parse;
use crate::normalize::to_single_loop;
use crate::smt::thread_cpu_time;

pub const POINTS_CORRECT_ALARM: i64 = 1;
pub const POINTS_CORRECT_PROOF: i64 = 2;
pub const POINTS_WRONG_ALARM: i64 = -6;
pub const POINTS_WRONG_PROOF: i64 = -12;

pub const CSV_HEADER: [&str; 9] = [
    "task",
    "config",
    "expected",
    "actual",
    "class",
    "cpu_s",
    "wall_s",
    "final_k",
    "inv_version",
];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Toml {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("config `{name}`: {message}")]
    Config { name: String, message: String },
    #[error("no expected verdict for `{0}` (name it *_true.c or *_false.c, or list it in manifest.toml)")]
    NoExpectation(String),
    #[error("no configurations given")]
    NoConfigs,
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Classification {
    CorrectProof,
    CorrectAlarm,
    WrongProof,
    WrongAlarm,
    Unknown,
}

impl Classification {
    pub const ALL: [Classification; 5] = [
        Classification::CorrectProof,
        Classification::CorrectAlarm,
        Classification::WrongProof,
        Classification::WrongAlarm,
        Classification::Unknown,
    ];

    /// `answer` is `Some(true)` for a proof, `Some(false)` for an alarm.
    pub fn of(expected_safe: bool, answer: Option<bool>) -> Classification {
        match (expected_safe, answer) {
            (_, None) => Classification::Unknown,
            (true, Some(true)) => Classification::CorrectProof,
            (false, Some(false)) => Classification::CorrectAlarm,
            (false, Some(true)) => Classification::WrongProof,
            (true, Some(false)) => Classification::WrongAlarm,
        }
    }

    pub fn points(self) -> i64 {
        match self {
            Classification::CorrectProof => POINTS_CORRECT_PROOF,
            Classification::CorrectAlarm => POINTS_CORRECT_ALARM,
            Classification::WrongProof => POINTS_WRONG_PROOF,
            Classification::WrongAlarm => POINTS_WRONG_ALARM,
            Classification::Unknown => 0,
        }
    }

    pub fn is_correct(self) -> bool {
        matches!(self, Classification::CorrectProof | Classification::CorrectAlarm)
    }

    pub fn is_wrong(self) -> bool {
        matches!(self, Classification::WrongProof | Classification::WrongAlarm)
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::CorrectProof => "correct-proof",
            Classification::CorrectAlarm => "correct-alarm",
            Classification::WrongProof => "wrong-proof",
            Classification::WrongAlarm => "wrong-alarm",
            Classification::Unknown => "unknown",
        })
    }
}

/// Verdict suffix convention: `foo_true.c` is safe, `foo_false.c` is not.
pub fn expected_from_name(name: &str) -> Option<bool> {
    let stem = name.strip_suffix(".c").unwrap_or(name);
    if stem.ends_with("_true") || stem.ends_with("-true") {
        Some(true)
    } else if stem.ends_with("_false") || stem.ends_with("-false") {
        Some(false)
    } else {
        None
    }
}

/// Explicit expectations, read from `manifest.toml`:
///
/// ```toml
/// [expected]
/// "loop.c" = true
/// ```
#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
pub struct Manifest {
    #[serde(default)]
    pub expected: BTreeMap<String, bool>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest, HarnessError> {
        let text = read(path)?;
        toml::from_str(&text).map_err(|source| HarnessError::Toml {
            path: path.to_owned(),
            source,
        })
    }

    /// Manifest entries win over the file name.
    pub fn expected(&self, name: &str) -> Option<bool> {
        self.expected.get(name).copied().or_else(|| expected_from_name(name))
    }
}

fn read(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_owned(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    pub name: String,
    pub source: String,
    pub expected_safe: bool,
}

impl Task {
    pub fn new(name: &str, source: &str, expected_safe: bool) -> Task {
        Task {
            name: name.to_string(),
            source: source.to_string(),
            expected_safe,
        }
    }
}

/// Loads every `*.c` file in `dir`, sorted by name. A `manifest.toml` next
/// to them overrides the suffix convention.
pub fn load_corpus(dir: &Path) -> Result<Vec<Task>, HarnessError> {
    let io_err = |source| HarnessError::Io {
        path: dir.to_owned(),
        source,
    };
    let manifest_path = dir.join("manifest.toml");
    let manifest = if manifest_path.exists() {
        Manifest::load(&manifest_path)?
    } else {
        Manifest::default()
    };
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err)? {
        let path = entry.map_err(io_err)?.path();
        if path.extension().is_some_and(|e| e == "c") {
            files.push(path);
        }
    }
    files.sort();
    files
        .iter()
        .map(|path| {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            let expected_safe = manifest
                .expected(&name)
                .ok_or_else(|| HarnessError::NoExpectation(name.clone()))?;
            Ok(Task {
                source: read(path)?,
                name,
                expected_safe,
            })
        })
        .collect()
}

/// A named verifier configuration.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub name: String,
    pub verifier: KInductionConfig,
}

impl BenchConfig {
    pub fn new(name: &str, verifier: KInductionConfig) -> BenchConfig {
        BenchConfig {
            name: name.to_string(),
            verifier,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigEntry {
    name: String,
    invgen: Option<String>,
    havoc: Option<String>,
    k_init: Option<usize>,
    k_max: Option<usize>,
    deterministic_rounds: Option<usize>,
    /// Seconds of wall time per task.
    timeout: Option<f64>,
    solver: Option<String>,
    /// Initial solver logic, like `QF_LIA` or `ALL`.
    logic: Option<String>,
    round_pops: Option<usize>,
    round_wall: Option<f64>,
    incremental: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    config: Vec<ConfigEntry>,
}

impl ConfigEntry {
    fn build(self) -> Result<BenchConfig, HarnessError> {
        let name = self.name;
        let bad = |message: String| HarnessError::Config {
            name: name.clone(),
            message,
        };
        let mut v = KInductionConfig::default();
        if let Some(s) = &self.invgen {
            v.invariants = s.parse::<InvariantMode>().map_err(bad)?;
        }
        if let Some(s) = &self.havoc {
            v.havoc = s.parse::<HavocStrategy>().map_err(bad)?;
        }
        if let Some(k) = self.k_init {
            v.k_init = k;
        }
        if let Some(k) = self.k_max {
            v.k_max = k;
        }
        if v.k_init == 0 || v.k_init > v.k_max {
            return Err(bad(format!("need 1 <= k_init <= k_max, got {} and {}", v.k_init, v.k_max)));
        }
        v.deterministic_rounds = self.deterministic_rounds;
        v.timeout = self.timeout.map(secs).transpose().map_err(bad)?;
        if let Some(cmd) = &self.solver {
            if cmd.split_whitespace().next().is_none() {
                return Err(bad("empty solver command".into()));
            }
            v.solver = v.solver.with_command(cmd);
        }
        if let Some(l) = &self.logic {
            v.solver.logic = l.parse().map_err(bad)?;
        }
        if let Some(p) = self.round_pops {
            v.round_budget.max_pops = p;
        }
        if let Some(w) = self.round_wall {
            v.round_budget.wall = Some(secs(w).map_err(bad)?);
        }
        if let Some(i) = self.incremental {
            v.incremental = i;
        }
        Ok(BenchConfig {
            name: name.clone(),
            verifier: v,
        })
    }
}

fn secs(s: f64) -> Result<Duration, String> {
    Duration::try_from_secs_f64(s).map_err(|e| format!("bad duration {s}: {e}"))
}

/// Parses a list of `[[config]]` tables.
pub fn parse_configs(text: &str, origin: &Path) -> Result<Vec<BenchConfig>, HarnessError> {
    let file: ConfigFile = toml::from_str(text).map_err(|source| HarnessError::Toml {
        path: origin.to_owned(),
        source,
    })?;
    if file.config.is_empty() {
        return Err(HarnessError::NoConfigs);
    }
    file.config.into_iter().map(ConfigEntry::build).collect()
}

pub fn load_configs(path: &Path) -> Result<Vec<BenchConfig>, HarnessError> {
    parse_configs(&read(path)?, path)
}

/// The three invariant settings compared in the bench, sharing `base`.
pub fn standard_configs(base: &KInductionConfig) -> Vec<BenchConfig> {
    let with = |mode: InvariantMode| KInductionConfig {
        invariants: mode,
        ..base.clone()
    };
    vec![
        BenchConfig::new("off", with(InvariantMode::Off)),
        BenchConfig::new("static:0,1,t", with("static:0,1,t".parse().unwrap())),
        BenchConfig::new("continuous", with(InvariantMode::Continuous)),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskResult {
    pub task: String,
    pub config: String,
    pub expected_safe: bool,
    /// `None` when the pipeline failed before producing a verdict.
    pub verdict: Option<Verdict>,
    pub error: Option<String>,
    /// Verifier threads plus solver process.
    pub cpu_time: Duration,
    pub wall_time: Duration,
    pub final_k: usize,
    pub inv_version: u64,
}

impl TaskResult {
    pub fn answer(&self) -> Option<bool> {
        match &self.verdict {
            Some(Verdict::True { .. }) => Some(true),
            Some(Verdict::False { .. }) => Some(false),
            _ => None,
        }
    }

    pub fn classification(&self) -> Classification {
        Classification::of(self.expected_safe, self.answer())
    }

    pub fn actual_label(&self) -> &'static str {
        match &self.verdict {
            Some(v) => v.label(),
            None => "ERROR",
        }
    }
}

/// Parse, normalize and verify one task. Failures become unknowns.
pub fn run_task(task: &Task, config: &BenchConfig) -> TaskResult {
    let wall = Instant::now();
    let cpu = thread_cpu_time();
    let mut result = TaskResult {
        task: task.name.clone(),
        config: config.name.clone(),
        expected_safe: task.expected_safe,
        verdict: None,
        error: None,
        cpu_time: Duration::ZERO,
        wall_time: Duration::ZERO,
        final_k: 0,
        inv_version: 0,
    };
    let outcome = parse(&task.source)
        .map_err(|e| format!("parse error: {e}"))
        .and_then(|ast| to_single_loop(&build_cfa(&ast)).map_err(|e| format!("normalize: {e}")))
        .and_then(|ncfa| verify(&ncfa, &config.verifier).map_err(|e| e.to_string()));
    let mut extra = Duration::ZERO;
    match outcome {
        Ok(out) => {
            result.final_k = out.verdict.final_k();
            result.inv_version = out.stats.inv_version;
            extra = out.stats.solver_cpu + out.stats.invgen_cpu;
            result.verdict = Some(out.verdict);
        }
        Err(e) => {
            log::warn!("{} [{}]: {e}", task.name, config.name);
            result.error = Some(e);
        }
    }
    result.cpu_time = thread_cpu_time().saturating_sub(cpu) + extra;
    result.wall_time = wall.elapsed();
    result
}

/// Score of a list of classifications.
pub fn score_of(classes: impl IntoIterator<Item = Classification>) -> i64 {
    classes.into_iter().map(Classification::points).sum()
}

/// Totals for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigScore {
    pub config: String,
    pub tasks: usize,
    pub score: i64,
    pub correct_proofs: usize,
    pub correct_alarms: usize,
    pub wrong_proofs: usize,
    pub wrong_alarms: usize,
    pub unknowns: usize,
    pub cpu_time: Duration,
    pub wall_time: Duration,
    /// Over correct results.
    pub max_final_k: usize,
    pub avg_final_k: f64,
    /// `(accumulated score, cpu seconds)` points; see [`quantile_series`].
    pub quantile: Vec<(i64, f64)>,
}

impl ConfigScore {
    pub fn correct(&self) -> usize {
        self.correct_proofs + self.correct_alarms
    }
}

/// Score-over-time points for a quantile plot. The first point sits at
/// the sum of all penalties; each correct result, in order of CPU time,
/// then moves the score right by its points. The last point is the total.
pub fn quantile_series(results: &[&TaskResult]) -> Vec<(i64, f64)> {
    let mut acc = score_of(
        results
            .iter()
            .map(|r| r.classification())
            .filter(|c| c.is_wrong()),
    );
    let mut correct: Vec<_> = results
        .iter()
        .filter(|r| r.classification().is_correct())
        .collect();
    correct.sort_by(|a, b| a.cpu_time.cmp(&b.cpu_time));
    let mut out = vec![(acc, 0.0)];
    for r in correct {
        acc += r.classification().points();
        out.push((acc, r.cpu_time.as_secs_f64()));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreReport {
    /// In order of first appearance.
    pub configs: Vec<ConfigScore>,
}

impl ScoreReport {
    pub fn get(&self, config: &str) -> Option<&ConfigScore> {
        self.configs.iter().find(|c| c.config == config)
    }

    pub fn table(&self) -> String {
        let mut rows = vec![vec![
            "config".to_string(),
            "score".into(),
            "correct".into(),
            "proofs".into(),
            "alarms".into(),
            "wrong proofs".into(),
            "wrong alarms".into(),
            "unknown".into(),
            "cpu s".into(),
            "wall s".into(),
            "max k".into(),
            "avg k".into(),
        ]];
        for c in &self.configs {
            rows.push(vec![
                c.config.clone(),
                c.score.to_string(),
                c.correct().to_string(),
                c.correct_proofs.to_string(),
                c.correct_alarms.to_string(),
                c.wrong_proofs.to_string(),
                c.wrong_alarms.to_string(),
                c.unknowns.to_string(),
                format!("{:.2}", c.cpu_time.as_secs_f64()),
                format!("{:.2}", c.wall_time.as_secs_f64()),
                c.max_final_k.to_string(),
                format!("{:.2}", c.avg_final_k),
            ]);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|i| rows.iter().map(|r| r[i].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in rows {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (cell, w))| {
                    if i == 0 {
                        format!("{cell:<w$}")
                    } else {
                        format!("{cell:>w$}")
                    }
                })
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

/// Groups results by configuration and totals them.
pub fn score(results: &[TaskResult]) -> ScoreReport {
    let mut order: Vec<&str> = Vec::new();
    for r in results {
        if !order.contains(&r.config.as_str()) {
            order.push(&r.config);
        }
    }
    let configs = order
        .into_iter()
        .map(|name| {
            let rs: Vec<&TaskResult> = results.iter().filter(|r| r.config == name).collect();
            let count = |c: Classification| rs.iter().filter(|r| r.classification() == c).count();
            let correct_ks: Vec<usize> = rs
                .iter()
                .filter(|r| r.classification().is_correct())
                .map(|r| r.final_k)
                .collect();
            ConfigScore {
                config: name.to_string(),
                tasks: rs.len(),
                score: score_of(rs.iter().map(|r| r.classification())),
                correct_proofs: count(Classification::CorrectProof),
                correct_alarms: count(Classification::CorrectAlarm),
                wrong_proofs: count(Classification::WrongProof),
                wrong_alarms: count(Classification::WrongAlarm),
                unknowns: count(Classification::Unknown),
                cpu_time: rs.iter().map(|r| r.cpu_time).sum(),
                wall_time: rs.iter().map(|r| r.wall_time).sum(),
                max_final_k: correct_ks.iter().copied().max().unwrap_or(0),
                avg_final_k: if correct_ks.is_empty() {
                    0.0
                } else {
                    correct_ks.iter().sum::<usize>() as f64 / correct_ks.len() as f64
                },
                quantile: quantile_series(&rs),
            }
        })
        .collect();
    ScoreReport { configs }
}

/// Runs every task under every configuration on `workers` threads.
/// Results come back grouped by configuration, tasks in corpus order.
pub fn compare_configs(
    tasks: &[Task],
    configs: &[BenchConfig],
    workers: usize,
) -> Result<(Vec<TaskResult>, ScoreReport), HarnessError> {
    if configs.is_empty() {
        return Err(HarnessError::NoConfigs);
    }
    let jobs: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|c| (0..tasks.len()).map(move |t| (c, t)))
        .collect();
    let next = AtomicUsize::new(0);
    let done = Mutex::new(Vec::with_capacity(jobs.len()));
    std::thread::scope(|s| {
        for _ in 0..workers.max(1).min(jobs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(c, t)) = jobs.get(i) else {
                    break;
                };
                let r = run_task(&tasks[t], &configs[c]);
                log::debug!("{} [{}]: {}", r.task, r.config, r.classification());
                done.lock().unwrap().push((i, r));
            });
        }
    });
    let mut done = done.into_inner().unwrap();
    done.sort_by_key(|(i, _)| *i);
    let results: Vec<TaskResult> = done.into_iter().map(|(_, r)| r).collect();
    let report = score(&results);
    Ok((results, report))
}

fn verdict_word(safe: bool) -> &'static str {
    if safe {
        "TRUE"
    } else {
        "FALSE"
    }
}

pub fn write_csv<W: io::Write>(out: W, results: &[TaskResult]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in results {
        w.write_record([
            r.task.as_str(),
            r.config.as_str(),
            verdict_word(r.expected_safe),
            r.actual_label(),
            &r.classification().to_string(),
            &format!("{:.6}", r.cpu_time.as_secs_f64()),
            &format!("{:.6}", r.wall_time.as_secs_f64()),
            &r.final_k.to_string(),
            &r.inv_version.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Writes the quantile series of every configuration as
/// `config,score,cpu_s` rows.
pub fn write_quantiles<W: io::Write>(out: W, report: &ScoreReport) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["config", "score", "cpu_s"])?;
    for c in &report.configs {
        for (score, t) in &c.quantile {
            w.write_record([c.config.as_str(), &score.to_string(), &format!("{t:.6}")])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::programs;

    fn result(config: &str, expected_safe: bool, verdict: Option<Verdict>, cpu_ms: u64) -> TaskResult {
        TaskResult {
            task: "t.c".into(),
            config: config.into(),
            expected_safe,
            verdict,
            error: None,
            cpu_time: Duration::from_millis(cpu_ms),
            wall_time: Duration::from_millis(cpu_ms),
            final_k: 1,
            inv_version: 0,
        }
    }

    fn proof() -> Option<Verdict> {
        Some(Verdict::True {
            source: crate::kinduction::ProofSource::Induction,
            k: 1,
            inv_version: 0,
        })
    }

    fn alarm() -> Option<Verdict> {
        Some(Verdict::False {
            trace: crate::interp::Trace {
                initial: crate::interp::ConcreteState {
                    loc: crate::cfa::Loc(0),
                    env: vec![],
                },
                steps: vec![],
                choices: vec![],
            },
            k: 1,
            iterations: 0,
        })
    }

    #[test]
    fn suffix_convention() {
        assert_eq!(expected_from_name("a_true.c"), Some(true));
        assert_eq!(expected_from_name("example-unsafe_false.c"), Some(false));
        assert_eq!(expected_from_name("plain.c"), None);
        let m: Manifest = toml::from_str("[expected]\n\"a_true.c\" = false\n").unwrap();
        assert_eq!(m.expected("a_true.c"), Some(false));
        assert_eq!(m.expected("b_true.c"), Some(true));
    }

    #[test]
    fn score_examples() {
        let rs = vec![
            result("c", true, proof(), 1),
            result("c", true, proof(), 2),
            result("c", false, alarm(), 3),
        ];
        assert_eq!(score(&rs).configs[0].score, 5);
        let rs = vec![result("c", false, proof(), 1), result("c", true, alarm(), 2)];
        let r = score(&rs);
        assert_eq!(r.configs[0].score, -18);
        assert_eq!(r.configs[0].wrong_proofs, 1);
        assert_eq!(r.configs[0].wrong_alarms, 1);
        assert!(score(&[]).configs.is_empty());
        assert_eq!(score_of([]), 0);
    }

    #[test]
    fn quantile_starts_at_penalties_and_ends_at_total() {
        let rs = vec![
            result("c", true, proof(), 30),
            result("c", false, proof(), 5),
            result("c", false, alarm(), 10),
            result("c", true, None, 1),
        ];
        let r = score(&rs);
        let q = &r.configs[0].quantile;
        assert_eq!(q.first().unwrap().0, -12);
        assert_eq!(q.iter().map(|p| p.0).collect::<Vec<_>>(), [-12, -11, -9]);
        assert_eq!(q.last().unwrap().0, r.configs[0].score);
        assert!(q.windows(2).all(|w| w[0].1 <= w[1].1));
    }

    #[test]
    fn config_file_round_trip() {
        let text = r#"
            [[config]]
            name = "plain"
            invgen = "off"
            k_max = 20

            [[config]]
            name = "ci"
            invgen = "static:0,1,t"
            havoc = "loop-modified"
            timeout = 2.5
            solver = "z3 -in"
            round_pops = 500
        "#;
        let cs = parse_configs(text, Path::new("c.toml")).unwrap();
        assert_eq!(cs.len(), 2);
        assert_eq!(cs[0].verifier.invariants, InvariantMode::Off);
        assert_eq!(cs[0].verifier.k_max, 20);
        assert_eq!(cs[1].verifier.havoc, HavocStrategy::SoundLoopModified);
        assert_eq!(cs[1].verifier.timeout, Some(Duration::from_millis(2500)));
        assert_eq!(cs[1].verifier.solver.command, ["z3", "-in"]);
        assert_eq!(cs[1].verifier.round_budget.max_pops, 500);
        assert!(parse_configs("", Path::new("c.toml")).is_err());
        assert!(parse_configs("[[config]]\nname = \"x\"\nhavoc = \"some\"\n", Path::new("c.toml")).is_err());
        assert!(parse_configs("[[config]]\nname = \"x\"\nbogus = 1\n", Path::new("c.toml")).is_err());
    }

    #[test]
    fn bundled_examples_classify() {
        let base = KInductionConfig {
            k_max: 10,
            deterministic_rounds: Some(1),
            ..KInductionConfig::default()
        };
        let safe = Task::new("example-safe_true.c", programs::EXAMPLE_SAFE, true);
        let bad = Task::new("example-unsafe_false.c", programs::EXAMPLE_UNSAFE, false);
        let cont = BenchConfig::new("continuous", base.clone());
        let r = run_task(&safe, &cont);
        assert_eq!(r.classification(), Classification::CorrectProof);
        assert!(r.final_k <= 4);
        assert_eq!(run_task(&bad, &cont).classification(), Classification::CorrectAlarm);
        let heuristic = BenchConfig::new(
            "termination-vars",
            KInductionConfig {
                havoc: HavocStrategy::UnsoundTerminationVars,
                ..base
            },
        );
        assert_eq!(run_task(&bad, &heuristic).classification(), Classification::WrongProof);
    }

    #[test]
    fn parse_errors_are_unknown() {
        let t = Task::new("broken_true.c", "int x; x = ;", true);
        let r = run_task(&t, &BenchConfig::new("c", KInductionConfig::default()));
        assert_eq!(r.classification(), Classification::Unknown);
        assert!(r.error.as_deref().unwrap().contains("parse"));
        assert_eq!(r.actual_label(), "ERROR");
    }

    #[test]
    fn compare_and_csv() {
        let tasks = vec![
            Task::new("example-safe_true.c", programs::EXAMPLE_SAFE, true),
            Task::new("example-unsafe_false.c", programs::EXAMPLE_UNSAFE, false),
        ];
        let base = KInductionConfig {
            k_max: 6,
            deterministic_rounds: Some(1),
            ..KInductionConfig::default()
        };
        let (results, report) = compare_configs(&tasks, &standard_configs(&base), 3).unwrap();
        assert_eq!(results.len(), 6);
        assert_eq!(report.configs.len(), 3);
        assert_eq!(report.get("continuous").unwrap().score, 3);
        assert_eq!(report.get("off").unwrap().score, 1);
        let mut buf = Vec::new();
        write_csv(&mut buf, &results).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        assert!(lines.next().unwrap().starts_with("example-safe_true.c,off,TRUE,UNKNOWN,unknown,"));
        assert!(report.table().contains("continuous"));
        assert!(compare_configs(&tasks, &[], 1).is_err());
    }
}
