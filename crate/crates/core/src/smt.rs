//! SMT-LIB2 solver subprocess with an incremental assertion stack.

use std::collections::{BTreeMap, BTreeSet};
use std::hash::{Hash, Hasher};
use std::io::{BufReader, Read, Write};
use std::str::FromStr;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use thiserror::Error;

use crate::formula::{quote_symbol, Formula, Sort, Value};

#[derive(Debug, Error)]
pub enum SmtError {
    #[error("cannot start solver `{0}`: {1}")]
    Unavailable(String, std::io::Error),
    #[error("empty solver command")]
    EmptyCommand,
    #[error("solver reported: {0}")]
    Solver(String),
    #[error("cannot parse solver output: {0}")]
    Protocol(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverConfig {
    /// Program and arguments.
    pub command: Vec<String>,
    /// Per-query limit; the solver is restarted when it is exceeded.
    pub timeout: Option<Duration>,
    /// Logic declared at start-up; raised automatically when a formula
    /// needs more.
    pub logic: Logic,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            command: vec!["z3".into(), "-in".into(), "-smt2".into()],
            timeout: Some(Duration::from_secs(60)),
            logic: Logic::QfLia,
        }
    }
}

impl SolverConfig {
    /// Parses a whitespace-separated command line.
    pub fn with_command(mut self, cmd: &str) -> SolverConfig {
        self.command = cmd.split_whitespace().map(str::to_string).collect();
        self
    }
}

/// Variable assignment returned with a sat verdict.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Model {
    values: BTreeMap<String, Value>,
}

impl Model {
    pub fn get(&self, name: &str) -> Option<&Value> {
        self.values.get(name)
    }

    pub fn int(&self, name: &str) -> Option<BigInt> {
        self.get(name).and_then(Value::as_int).cloned()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Value)> {
        self.values.iter()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckResult {
    Sat(Model),
    Unsat,
    Unknown(String),
}

impl CheckResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, CheckResult::Sat(_))
    }

    pub fn is_unsat(&self) -> bool {
        matches!(self, CheckResult::Unsat)
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self, CheckResult::Unknown(_))
    }

    /// `sat`, `unsat` or `unknown`.
    pub fn verdict(&self) -> &'static str {
        match self {
            CheckResult::Sat(_) => "sat",
            CheckResult::Unsat => "unsat",
            CheckResult::Unknown(_) => "unknown",
        }
    }
}

/// Smallest logic that admits a formula; ordered by inclusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Logic {
    QfLia,
    QfUflia,
    All,
}

impl FromStr for Logic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "QF_LIA" => Ok(Logic::QfLia),
            "QF_UFLIA" => Ok(Logic::QfUflia),
            "ALL" => Ok(Logic::All),
            _ => Err(format!("unknown logic `{s}` (expected QF_LIA, QF_UFLIA or ALL)")),
        }
    }
}

impl Logic {
    pub fn of(f: &Formula) -> Logic {
        if f.is_nonlinear() {
            Logic::All
        } else if !f.functions().is_empty() {
            Logic::QfUflia
        } else {
            Logic::QfLia
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Logic::QfLia => "QF_LIA",
            Logic::QfUflia => "QF_UFLIA",
            Logic::All => "ALL",
        }
    }
}

/// One `(push 1)` level: what it declared and asserted, for replay.
#[derive(Debug, Default)]
struct Frame {
    declared: BTreeSet<String>,
    commands: Vec<String>,
    key: Option<u64>,
}

struct Process {
    child: Child,
    stdin: ChildStdin,
    replies: Receiver<Option<String>>,
}

/// A running solver with its assertion stack.
pub struct Session {
    config: SolverConfig,
    proc: Option<Process>,
    logic: Logic,
    /// Base level plus one entry per push.
    frames: Vec<Frame>,
    restarts: usize,
    queries: usize,
    finished_cpu: Duration,
}

impl Session {
    pub fn new(config: SolverConfig) -> Result<Session, SmtError> {
        let mut s = Session {
            logic: config.logic,
            config,
            proc: None,
            frames: vec![Frame::default()],
            restarts: 0,
            queries: 0,
            finished_cpu: Duration::ZERO,
        };
        s.start()?;
        Ok(s)
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// Number of solver restarts after timeouts or crashes.
    pub fn restarts(&self) -> usize {
        self.restarts
    }

    pub fn queries(&self) -> usize {
        self.queries
    }

    /// Number of open push levels.
    pub fn depth(&self) -> usize {
        self.frames.len() - 1
    }

    pub fn logic(&self) -> Logic {
        self.logic
    }

    fn start(&mut self) -> Result<(), SmtError> {
        let (prog, args) = self.config.command.split_first().ok_or(SmtError::EmptyCommand)?;
        let mut child = Command::new(prog)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| SmtError::Unavailable(self.config.command.join(" "), e))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let mut reader = SexpReader::new(BufReader::new(stdout));
            while let Some(s) = reader.next_sexp() {
                if tx.send(Some(s)).is_err() {
                    return;
                }
            }
            let _ = tx.send(None);
        });
        self.proc = Some(Process {
            child,
            stdin,
            replies: rx,
        });
        let logic = self.logic.name();
        self.send_raw(&format!(
            "(set-option :print-success false)\n(set-option :produce-models true)\n(set-logic {logic})\n"
        ));
        Ok(())
    }

    fn stop(&mut self) {
        if let Some(mut p) = self.proc.take() {
            self.finished_cpu += process_cpu_time(p.child.id()).unwrap_or_default();
            let _ = p.child.kill();
            let _ = p.child.wait();
        }
    }

    /// Kills the solver process, as if it had crashed.
    pub fn kill_solver(&mut self) {
        if let Some(p) = self.proc.as_mut() {
            let _ = p.child.kill();
            let _ = p.child.wait();
        }
    }

    /// Restarts the solver and replays the assertion stack.
    fn restart(&mut self) -> Result<(), SmtError> {
        self.stop();
        self.restarts += 1;
        log::debug!("restarting solver (restart #{})", self.restarts);
        self.start()?;
        let mut script = String::new();
        for (i, f) in self.frames.iter().enumerate() {
            if i > 0 {
                script.push_str("(push 1)\n");
            }
            for c in &f.commands {
                script.push_str(c);
            }
        }
        self.send_raw(&script);
        Ok(())
    }

    /// Writes to the solver, ignoring broken pipes; a dead solver is noticed
    /// when its reply is awaited.
    fn send_raw(&mut self, s: &str) {
        if let Some(p) = self.proc.as_mut() {
            let _ = p.stdin.write_all(s.as_bytes()).and_then(|_| p.stdin.flush());
        }
    }

    /// Sends a command and records it in the current frame.
    fn command(&mut self, s: String) {
        self.send_raw(&s);
        self.frames.last_mut().unwrap().commands.push(s);
    }

    fn is_declared(&self, name: &str) -> bool {
        self.frames.iter().any(|f| f.declared.contains(name))
    }

    fn ensure_logic(&mut self, needed: Logic) -> Result<(), SmtError> {
        if needed > self.logic {
            self.logic = needed;
            // set-logic is only accepted once per process
            self.restart()?;
        }
        Ok(())
    }

    pub fn push(&mut self) {
        self.send_raw("(push 1)\n");
        self.frames.push(Frame::default());
    }

    pub fn pop(&mut self) {
        assert!(self.frames.len() > 1, "pop without push");
        self.send_raw("(pop 1)\n");
        self.frames.pop();
    }

    /// Declares the symbols of `f` not yet visible and asserts it in the
    /// current frame.
    pub fn assert_formula(&mut self, f: &Formula) -> Result<(), SmtError> {
        self.ensure_logic(Logic::of(f))?;
        for (name, arity) in f.functions() {
            if !self.is_declared(&name) {
                let args = vec!["Int"; arity].join(" ");
                self.command(format!("(declare-fun {} ({args}) Int)\n", quote_symbol(&name)));
                self.frames.last_mut().unwrap().declared.insert(name);
            }
        }
        for (name, sort) in f.constants() {
            if !self.is_declared(&name) {
                let sort = match sort {
                    Sort::Int => "Int",
                    Sort::Bool => "Bool",
                };
                self.command(format!("(declare-const {} {sort})\n", quote_symbol(&name)));
                self.frames.last_mut().unwrap().declared.insert(name);
            }
        }
        for t in f.assertions() {
            if !t.is_true() {
                self.command(format!("(assert {})\n", t.to_smt()));
            }
        }
        Ok(())
    }

    /// Checks the current stack. Timeouts and crashes restart the solver and
    /// come back as unknown.
    pub fn check_sat(&mut self) -> Result<CheckResult, SmtError> {
        self.queries += 1;
        if self.proc.is_none() {
            self.restart()?;
        }
        self.send_raw("(check-sat)\n");
        let deadline = self.config.timeout.map(|t| Instant::now() + t);
        let verdict = match self.reply(deadline) {
            Reply::Sexp(s) => s,
            Reply::Timeout => {
                self.restart()?;
                return Ok(CheckResult::Unknown("timeout".into()));
            }
            Reply::Closed => {
                self.restart()?;
                return Ok(CheckResult::Unknown("solver terminated".into()));
            }
        };
        match verdict.as_str() {
            "sat" => {
                self.send_raw("(get-model)\n");
                match self.reply(deadline) {
                    Reply::Sexp(s) => Ok(CheckResult::Sat(parse_model(&s)?)),
                    Reply::Timeout => {
                        self.restart()?;
                        Ok(CheckResult::Unknown("timeout".into()))
                    }
                    Reply::Closed => {
                        self.restart()?;
                        Ok(CheckResult::Unknown("solver terminated".into()))
                    }
                }
            }
            "unsat" => Ok(CheckResult::Unsat),
            "unknown" => {
                self.send_raw("(get-info :reason-unknown)\n");
                let reason = match self.reply(deadline) {
                    Reply::Sexp(s) => s,
                    _ => {
                        self.restart()?;
                        "unknown".into()
                    }
                };
                Ok(CheckResult::Unknown(reason))
            }
            other => Err(SmtError::Protocol(other.to_string())),
        }
    }

    /// Next reply; solver `(error ...)` messages are logged and skipped.
    fn reply(&mut self, deadline: Option<Instant>) -> Reply {
        let Some(p) = self.proc.as_ref() else {
            return Reply::Closed;
        };
        loop {
            let r = match deadline {
                Some(d) => {
                    let left = d.saturating_duration_since(Instant::now());
                    p.replies.recv_timeout(left)
                }
                None => p.replies.recv().map_err(|_| RecvTimeoutError::Disconnected),
            };
            match r {
                Ok(Some(s)) if s.starts_with("(error") => {
                    log::warn!("solver error: {s}");
                }
                Ok(Some(s)) => return Reply::Sexp(s),
                Ok(None) | Err(RecvTimeoutError::Disconnected) => return Reply::Closed,
                Err(RecvTimeoutError::Timeout) => return Reply::Timeout,
            }
        }
    }

    /// Checks `f` alone: any persistent level is dropped first, then `f` is
    /// asserted in a fresh push level that is popped again.
    pub fn check(&mut self, f: &Formula) -> Result<CheckResult, SmtError> {
        self.reset_persistent();
        self.push();
        let r = self.assert_formula(f).and_then(|_| self.check_sat());
        self.pop();
        r
    }

    /// Checks `persistent ∧ delta`. `persistent` stays asserted in its own
    /// push level across calls with the same formula; `delta` is asserted in
    /// a nested level that is popped after the check.
    pub fn check_assuming_incremental(
        &mut self,
        persistent: &Formula,
        delta: &Formula,
    ) -> Result<CheckResult, SmtError> {
        let key = fingerprint(persistent);
        let reuse = self.frames.len() == 2 && self.frames[1].key == Some(key);
        if !reuse {
            while self.frames.len() > 1 {
                self.pop();
            }
            self.push();
            self.frames[1].key = Some(key);
            self.assert_formula(persistent)?;
        }
        self.push();
        let r = self.assert_formula(delta).and_then(|_| self.check_sat());
        self.pop();
        r
    }

    /// Drops a persistent level left by [`Session::check_assuming_incremental`].
    pub fn reset_persistent(&mut self) {
        while self.frames.len() > 1 {
            self.pop();
        }
    }

    /// CPU time used by all solver processes of this session.
    pub fn cpu_time(&self) -> Duration {
        let live = self
            .proc
            .as_ref()
            .and_then(|p| process_cpu_time(p.child.id()))
            .unwrap_or_default();
        self.finished_cpu + live
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        if let Some(p) = self.proc.as_mut() {
            let _ = p.stdin.write_all(b"(exit)\n");
        }
        self.stop();
    }
}

enum Reply {
    Sexp(String),
    Timeout,
    Closed,
}

fn fingerprint(f: &Formula) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    f.hash(&mut h);
    h.finish()
}

/// CPU time (user + system) of a live process, from procfs.
pub fn process_cpu_time(pid: u32) -> Option<Duration> {
    let stat = std::fs::read_to_string(format!("/proc/{pid}/stat")).ok()?;
    // fields after the parenthesised command name
    let rest = &stat[stat.rfind(')')? + 2..];
    let fields: Vec<&str> = rest.split_whitespace().collect();
    let utime: u64 = fields.get(11)?.parse().ok()?;
    let stime: u64 = fields.get(12)?.parse().ok()?;
    // SAFETY: sysconf has no preconditions
    let tck = unsafe { libc::sysconf(libc::_SC_CLK_TCK) };
    let tck = if tck > 0 { tck as u64 } else { 100 };
    Some(Duration::from_micros((utime + stime) * 1_000_000 / tck))
}

/// CPU time of the calling thread.
pub fn thread_cpu_time() -> Duration {
    let mut ts = libc::timespec {
        tv_sec: 0,
        tv_nsec: 0,
    };
    // SAFETY: ts is a valid out-pointer
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return Duration::ZERO;
    }
    Duration::new(ts.tv_sec as u64, ts.tv_nsec as u32)
}

/// Splits a character stream into top-level s-expressions and atoms.
struct SexpReader<R> {
    bytes: std::io::Bytes<R>,
}

impl<R: Read> SexpReader<R> {
    fn new(r: R) -> Self {
        SexpReader { bytes: r.bytes() }
    }

    fn next_byte(&mut self) -> Option<u8> {
        self.bytes.next().and_then(Result::ok)
    }

    fn next_sexp(&mut self) -> Option<String> {
        let mut out = Vec::new();
        let mut depth = 0usize;
        let mut in_string = false;
        let mut in_quoted = false;
        loop {
            let b = self.next_byte()?;
            if in_string {
                out.push(b);
                if b == b'"' {
                    in_string = false;
                }
                continue;
            }
            if in_quoted {
                out.push(b);
                if b == b'|' {
                    in_quoted = false;
                }
                continue;
            }
            match b {
                b'(' => {
                    depth += 1;
                    out.push(b);
                }
                b')' => {
                    out.push(b);
                    depth = depth.saturating_sub(1);
                    if depth == 0 {
                        break;
                    }
                }
                b'"' => {
                    in_string = true;
                    out.push(b);
                }
                b'|' => {
                    in_quoted = true;
                    out.push(b);
                }
                b if b.is_ascii_whitespace() => {
                    if depth == 0 && !out.is_empty() {
                        break;
                    }
                    if depth > 0 {
                        out.push(b' ');
                    }
                }
                b => out.push(b),
            }
        }
        Some(String::from_utf8_lossy(&out).into_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn tokenize(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut chars = s.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '(' | ')' => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(c.to_string());
            }
            '|' => {
                cur.push(c);
                for d in chars.by_ref() {
                    cur.push(d);
                    if d == '|' {
                        break;
                    }
                }
            }
            '"' => {
                cur.push(c);
                for d in chars.by_ref() {
                    cur.push(d);
                    if d == '"' {
                        break;
                    }
                }
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn parse_sexp(s: &str) -> Result<Sexp, SmtError> {
    let tokens = tokenize(s);
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    for t in tokens {
        match t.as_str() {
            "(" => stack.push(Vec::new()),
            ")" => {
                let list = stack.pop().filter(|_| !stack.is_empty());
                let list = list.ok_or_else(|| SmtError::Protocol(s.to_string()))?;
                stack.last_mut().unwrap().push(Sexp::List(list));
            }
            _ => stack.last_mut().unwrap().push(Sexp::Atom(t)),
        }
    }
    let mut top = stack.pop().filter(|_| stack.is_empty());
    match top.as_mut().map(|v| (v.len(), v.pop())) {
        Some((1, Some(e))) => Ok(e),
        _ => Err(SmtError::Protocol(s.to_string())),
    }
}

fn unquote(s: &str) -> String {
    s.strip_prefix('|')
        .and_then(|s| s.strip_suffix('|'))
        .unwrap_or(s)
        .to_string()
}

fn parse_value(e: &Sexp) -> Option<Value> {
    match e {
        Sexp::Atom(a) if a == "true" => Some(Value::Bool(true)),
        Sexp::Atom(a) if a == "false" => Some(Value::Bool(false)),
        Sexp::Atom(a) => a.parse::<BigInt>().ok().map(Value::Int),
        Sexp::List(items) => match items.as_slice() {
            [Sexp::Atom(m), v] if m == "-" => match parse_value(v)? {
                Value::Int(i) => Some(Value::Int(-i)),
                Value::Bool(_) => None,
            },
            _ => None,
        },
    }
}

/// Parses a `(get-model)` reply. Function definitions with parameters are
/// skipped.
pub fn parse_model(s: &str) -> Result<Model, SmtError> {
    let e = parse_sexp(s)?;
    let Sexp::List(mut items) = e else {
        return Err(SmtError::Protocol(s.to_string()));
    };
    if matches!(items.first(), Some(Sexp::Atom(a)) if a == "model") {
        items.remove(0);
    }
    let mut values = BTreeMap::new();
    for item in items {
        let Sexp::List(parts) = item else {
            return Err(SmtError::Protocol(s.to_string()));
        };
        match parts.as_slice() {
            [Sexp::Atom(kw), Sexp::Atom(name), Sexp::List(params), _sort, body] if kw == "define-fun" => {
                if !params.is_empty() {
                    continue;
                }
                if let Some(v) = parse_value(body) {
                    values.insert(unquote(name), v);
                }
            }
            _ => {}
        }
    }
    Ok(Model { values })
}
