//! External SMT solver client: deterministic SMT-LIB scripts, one child
//! process per query, verdict and model parsing, and the entailment and
//! equivalence checks built on hierarchical reduction.

mod entail;
mod expr;
mod script;
pub mod sexpr;

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::thread;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::Zero;
use serde::Serialize;
use thiserror::Error;

use crate::logic::{fmt_q, Q};
pub use entail::{Background, Equivalence};
pub use expr::Expr;
pub use script::{render_script, symbol, unsymbol, Script};
use sexpr::Sexp;

pub const SOLVER_ENV: &str = "INVSYNTH_SOLVER";
pub const SOLVER_ARGS_ENV: &str = "INVSYNTH_SOLVER_ARGS";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("solver timeout must be positive")]
    ZeroTimeout,
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub executable: PathBuf,
    pub args: Vec<String>,
    pub timeout: Duration,
    /// Keep one solver process across queries. Accepted for configuration
    /// compatibility; queries currently run one process each.
    pub incremental: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            executable: PathBuf::from("z3"),
            args: vec!["-in".into(), "-smt2".into()],
            timeout: Duration::from_secs(10),
            incremental: false,
        }
    }
}

impl SolverConfig {
    /// Default configuration with the environment overrides applied.
    pub fn from_env() -> SolverConfig {
        let mut cfg = SolverConfig::default();
        if let Ok(p) = std::env::var(SOLVER_ENV) {
            if !p.is_empty() {
                cfg.executable = PathBuf::from(p);
            }
        }
        if let Ok(a) = std::env::var(SOLVER_ARGS_ENV) {
            cfg.args = a.split_whitespace().map(str::to_string).collect();
        }
        cfg
    }

    pub fn with_timeout(mut self, t: Duration) -> Result<SolverConfig, ConfigError> {
        if t.is_zero() {
            return Err(ConfigError::ZeroTimeout);
        }
        self.timeout = t;
        Ok(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Status {
    Sat,
    Unsat,
    Unknown,
    Timeout,
    ProcessError,
}

impl Status {
    pub fn is_decided(self) -> bool {
        matches!(self, Status::Sat | Status::Unsat)
    }

    pub fn keyword(self) -> &'static str {
        match self {
            Status::Sat => "sat",
            Status::Unsat => "unsat",
            Status::Unknown => "unknown",
            Status::Timeout => "timeout",
            Status::ProcessError => "error",
        }
    }
}

/// Assignment returned with a satisfiable verdict, keyed by source names.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Model {
    pub values: BTreeMap<String, String>,
}

impl Model {
    pub fn get(&self, name: &str) -> Option<&str> {
        self.values.get(name).map(String::as_str)
    }

    /// Numeric value of a constant, if it has one.
    pub fn number(&self, name: &str) -> Option<Q> {
        let v = self.values.get(name)?;
        let (n, d) = v.split_once('/').unwrap_or((v, "1"));
        let n: BigInt = n.parse().ok()?;
        let d: BigInt = d.parse().ok()?;
        if d.is_zero() {
            return None;
        }
        Some(Q::new(n, d))
    }

    pub fn restrict(&self, keep: &dyn Fn(&str) -> bool) -> Model {
        Model { values: self.values.iter().filter(|(k, _)| keep(k)).map(|(k, v)| (k.clone(), v.clone())).collect() }
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.values.iter().map(|(k, v)| format!("{}={}", k, v)).collect();
        f.write_str(&parts.join(", "))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SolverStats {
    pub wall_ms: f64,
    pub query_bytes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverVerdict {
    pub status: Status,
    pub model: Option<Model>,
    pub stats: SolverStats,
    /// Captured solver output for errors and unknown answers.
    pub diagnostic: String,
}

impl SolverVerdict {
    pub fn unsat(&self) -> bool {
        self.status == Status::Unsat
    }

    pub fn sat(&self) -> bool {
        self.status == Status::Sat
    }

    fn trivial(status: Status) -> SolverVerdict {
        SolverVerdict {
            status,
            model: (status == Status::Sat).then(Model::default),
            stats: SolverStats::default(),
            diagnostic: String::new(),
        }
    }
}

/// Aggregate counters of one client.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ClientStats {
    pub calls: u64,
    pub sat: u64,
    pub unsat: u64,
    pub undecided: u64,
    pub wall_ms: f64,
}

fn value_text(s: &Sexp) -> String {
    fn num(s: &Sexp) -> Option<Q> {
        match s {
            Sexp::Atom(a) => {
                let (i, frac) = a.split_once('.').unwrap_or((a, ""));
                let mut v = Q::from_integer(i.parse::<BigInt>().ok()?);
                if !frac.trim_end_matches('0').is_empty() {
                    let d = BigInt::from(10u32).pow(frac.len() as u32);
                    v += Q::new(frac.parse::<BigInt>().ok()?, d);
                }
                Some(v)
            }
            Sexp::List(l) => match (l.first()?.as_atom()?, l.len()) {
                ("-", 2) => Some(-num(&l[1])?),
                ("/", 3) => {
                    let d = num(&l[2])?;
                    if d.is_zero() {
                        return None;
                    }
                    Some(num(&l[1])? / d)
                }
                _ => None,
            },
        }
    }
    match num(s) {
        Some(v) => {
            struct D<'a>(&'a Q);
            impl std::fmt::Display for D<'_> {
                fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                    fmt_q(f, self.0)
                }
            }
            D(&v).to_string()
        }
        None => s.to_string(),
    }
}

/// Extracts `define-fun` entries from a `get-model` response.
pub fn parse_model(s: &Sexp) -> Option<Model> {
    let items = s.as_list()?;
    let items = match items.first().and_then(Sexp::as_atom) {
        Some("model") => &items[1..],
        _ => items,
    };
    let mut m = Model::default();
    for it in items {
        let l = match it.as_list() {
            Some(l) if l.len() == 5 && l[0].as_atom() == Some("define-fun") => l,
            _ => continue,
        };
        let name = match l[1].as_atom() {
            Some(n) if !n.starts_with("|#") => unsymbol(n),
            _ => continue,
        };
        let arity = l[2].as_list().map(<[Sexp]>::len).unwrap_or(0);
        let v = if arity == 0 { value_text(&l[4]) } else { format!("(lambda {} {})", l[2], l[4]) };
        m.values.insert(name, v);
    }
    Some(m)
}

/// Classifies solver output.
pub fn parse_response(out: &str, want_model: bool) -> (Status, Option<Model>, String) {
    let parsed = match sexpr::parse_all(out) {
        Some(p) => p,
        None => return (Status::ProcessError, None, out.to_string()),
    };
    let first = parsed.first().and_then(Sexp::as_atom);
    match first {
        Some("unsat") => (Status::Unsat, None, String::new()),
        Some("unknown") => (Status::Unknown, None, out.to_string()),
        Some("sat") => {
            if !want_model {
                return (Status::Sat, None, String::new());
            }
            match parsed.get(1).and_then(parse_model) {
                Some(m) => (Status::Sat, Some(m), String::new()),
                None => (Status::ProcessError, None, out.to_string()),
            }
        }
        _ => (Status::ProcessError, None, out.to_string()),
    }
}

/// Runs one script in a fresh solver process, killing it at the deadline.
fn run_process(cfg: &SolverConfig, script: &str) -> (Option<String>, String) {
    let mut child = match Command::new(&cfg.executable)
        .args(&cfg.args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
    {
        Ok(c) => c,
        Err(e) => return (None, format!("cannot start `{}`: {}", cfg.executable.display(), e)),
    };
    let mut stdin = child.stdin.take();
    let text = script.to_string();
    let writer = thread::spawn(move || {
        if let Some(s) = stdin.as_mut() {
            let _ = s.write_all(text.as_bytes());
        }
    });
    let mut stdout = child.stdout.take();
    let reader = thread::spawn(move || {
        let mut buf = String::new();
        if let Some(s) = stdout.as_mut() {
            let _ = s.read_to_string(&mut buf);
        }
        buf
    });
    let mut stderr = child.stderr.take();
    let err_reader = thread::spawn(move || {
        let mut buf = String::new();
        if let Some(s) = stderr.as_mut() {
            let _ = s.read_to_string(&mut buf);
        }
        buf
    });
    let deadline = Instant::now() + cfg.timeout;
    let mut timed_out = false;
    loop {
        match child.try_wait() {
            Ok(Some(_)) => break,
            Ok(None) if Instant::now() >= deadline => {
                let _ = child.kill();
                let _ = child.wait();
                timed_out = true;
                break;
            }
            Ok(None) => thread::sleep(Duration::from_millis(1)),
            Err(e) => return (None, e.to_string()),
        }
    }
    let _ = writer.join();
    let out = reader.join().unwrap_or_default();
    let err = err_reader.join().unwrap_or_default();
    if timed_out {
        return (None, "timeout".into());
    }
    (Some(out), err)
}

/// Solver front end. One query is in flight per call; counters are atomic so
/// a client may be shared between threads.
#[derive(Debug)]
pub struct SmtClient {
    pub config: SolverConfig,
    emit_dir: Option<PathBuf>,
    seq: AtomicUsize,
    calls: AtomicU64,
    sat: AtomicU64,
    unsat: AtomicU64,
    undecided: AtomicU64,
    micros: AtomicU64,
}

impl SmtClient {
    pub fn new(config: SolverConfig) -> SmtClient {
        SmtClient {
            config,
            emit_dir: None,
            seq: AtomicUsize::new(0),
            calls: AtomicU64::new(0),
            sat: AtomicU64::new(0),
            unsat: AtomicU64::new(0),
            undecided: AtomicU64::new(0),
            micros: AtomicU64::new(0),
        }
    }

    /// Writes every script, annotated with its verdict, into `dir`.
    pub fn with_emit_dir(mut self, dir: PathBuf) -> SmtClient {
        self.emit_dir = Some(dir);
        self
    }

    pub fn stats(&self) -> ClientStats {
        ClientStats {
            calls: self.calls.load(Ordering::Relaxed),
            sat: self.sat.load(Ordering::Relaxed),
            unsat: self.unsat.load(Ordering::Relaxed),
            undecided: self.undecided.load(Ordering::Relaxed),
            wall_ms: self.micros.load(Ordering::Relaxed) as f64 / 1000.0,
        }
    }

    /// Script text for the conjunction of `assertions`.
    pub fn script(&self, assertions: &[Expr], want_model: bool) -> String {
        render_script(assertions, want_model).0
    }

    /// Satisfiability of the conjunction of `assertions`.
    pub fn check_sat(&self, assertions: &[Expr], want_model: bool) -> SolverVerdict {
        let e = Expr::and(assertions.to_vec());
        match e {
            Expr::True => return SolverVerdict::trivial(Status::Sat),
            Expr::False => return SolverVerdict::trivial(Status::Unsat),
            _ => {}
        }
        let script = self.script(assertions, want_model);
        self.run_script(&script, want_model)
    }

    /// Runs a prepared script and records the verdict.
    pub fn run_script(&self, script: &str, want_model: bool) -> SolverVerdict {
        self.run_script_with(script, want_model, self.config.timeout)
    }

    /// As [`SmtClient::run_script`] with a per-call timeout.
    pub fn run_script_with(&self, script: &str, want_model: bool, timeout: Duration) -> SolverVerdict {
        let start = Instant::now();
        let cfg = SolverConfig { timeout, ..self.config.clone() };
        let (out, err) = run_process(&cfg, script);
        let wall = start.elapsed();
        let (status, model, diagnostic) = match out {
            None if err == "timeout" => (Status::Timeout, None, String::new()),
            None => (Status::ProcessError, None, err),
            Some(out) => {
                let (s, m, d) = parse_response(&out, want_model);
                let d = if s == Status::ProcessError && !err.is_empty() { format!("{}{}", d, err) } else { d };
                (s, m, d)
            }
        };
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.micros.fetch_add(wall.as_micros() as u64, Ordering::Relaxed);
        match status {
            Status::Sat => self.sat.fetch_add(1, Ordering::Relaxed),
            Status::Unsat => self.unsat.fetch_add(1, Ordering::Relaxed),
            _ => self.undecided.fetch_add(1, Ordering::Relaxed),
        };
        if let Some(dir) = &self.emit_dir {
            let n = self.seq.fetch_add(1, Ordering::Relaxed);
            let _ = std::fs::create_dir_all(dir);
            let body = format!("; expected: {}\n{}", status.keyword(), script);
            let _ = std::fs::write(dir.join(format!("query_{:05}.smt2", n)), body);
        }
        SolverVerdict {
            status,
            model,
            stats: SolverStats { wall_ms: wall.as_secs_f64() * 1000.0, query_bytes: script.len() },
            diagnostic,
        }
    }
}

impl Default for SmtClient {
    fn default() -> Self {
        SmtClient::new(SolverConfig::from_env())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{q, Literal, Rel, Sort, Term};

    fn x() -> Term {
        Term::constant("x".into(), Sort::real())
    }

    #[test]
    fn contradictory_bounds_are_unsat() {
        let c = SmtClient::default();
        let zero = Term::num(q(0), Sort::real());
        let v = c.check_sat(
            &[Expr::Lit(Literal::cmp(Rel::Gt, x(), zero.clone())), Expr::Lit(Literal::cmp(Rel::Lt, x(), zero))],
            false,
        );
        assert_eq!(v.status, Status::Unsat);
        assert!(v.model.is_none());
    }

    #[test]
    fn scripts_are_deterministic() {
        let c = SmtClient::default();
        let a = Expr::Lit(Literal::cmp(Rel::Le, x(), Term::num(q(1), Sort::real())));
        assert_eq!(c.script(&[a.clone()], true), c.script(&[a], true));
    }

    #[test]
    fn model_values_are_normalized() {
        let (s, m, _) = parse_response("sat\n(\n (define-fun x () Real (- (/ 1.0 2.0)))\n (define-fun |y'| () Int 3))\n", true);
        assert_eq!(s, Status::Sat);
        let m = m.unwrap();
        assert_eq!(m.get("x"), Some("-1/2"));
        assert_eq!(m.number("y'"), Some(q(3)));
    }

    #[test]
    fn garbled_output_is_a_process_error() {
        assert_eq!(parse_response("(error \"oops\")", false).0, Status::ProcessError);
        assert_eq!(parse_response("((", false).0, Status::ProcessError);
    }

    #[test]
    fn missing_executable_is_a_process_error() {
        let cfg = SolverConfig { executable: "/nonexistent/solver".into(), ..SolverConfig::default() };
        let c = SmtClient::new(cfg);
        let v = c.check_sat(&[Expr::Lit(Literal::cmp(Rel::Le, x(), x()))], false);
        assert_eq!(v.status, Status::ProcessError);
    }

    #[test]
    fn zero_timeout_is_rejected() {
        assert!(SolverConfig::default().with_timeout(Duration::ZERO).is_err());
    }
}
