//! Run reports: human-readable text or JSON records.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use invsynth::invariant_loop::exit;
use invsynth::smt::{SmtClient, SolverConfig};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub struct Failure {
    pub code: i32,
    pub outcome: &'static str,
    pub message: String,
}

impl Failure {
    pub fn spec(message: impl Into<String>) -> Failure {
        Failure { code: exit::SPEC_ERROR, outcome: "spec_error", message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Failure {
        Failure { code: exit::UNKNOWN, outcome: "io_error", message: message.into() }
    }
}

#[derive(Default, Serialize)]
pub struct RunReport {
    pub command: Vec<String>,
    pub spec: String,
    pub spec_digest: String,
    pub solver: String,
    pub solver_version: String,
    pub outcome: String,
    pub exit_code: i32,
    pub summary: BTreeMap<String, String>,
    pub details: serde_json::Value,
    pub timings_ms: BTreeMap<String, f64>,
    pub solver_calls: u64,
    pub caveats: Vec<String>,
    pub artifacts: Vec<String>,
    #[serde(skip)]
    pub lines: Vec<String>,
    #[serde(skip)]
    pub records: Vec<serde_json::Value>,
}

impl RunReport {
    pub fn new(command: Vec<String>) -> RunReport {
        RunReport { command, ..RunReport::default() }
    }

    pub fn set_spec(&mut self, path: &Path, src: &str) {
        self.spec = path.display().to_string();
        self.spec_digest = format!("sha256:{:x}", Sha256::digest(src.as_bytes()));
    }

    pub fn solver(&mut self, cfg: &SolverConfig) {
        self.solver = format!("{} {}", cfg.executable.display(), cfg.args.join(" ")).trim().to_string();
        self.solver_version = Command::new(&cfg.executable)
            .arg("-version")
            .output()
            .ok()
            .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
            .unwrap_or_else(|| "unavailable".into());
    }

    pub fn timing(&mut self, step: &str, since: Instant) {
        self.timings_ms.insert(step.into(), since.elapsed().as_secs_f64() * 1000.0);
    }

    pub fn insert(&mut self, key: &str, value: &str) {
        self.summary.insert(key.into(), value.into());
    }

    pub fn stats(&mut self, client: &SmtClient) {
        let s = client.stats();
        self.solver_calls = s.calls;
        self.timings_ms.insert("solver".into(), s.wall_ms);
    }

    pub fn text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("command: {}\n", self.command.join(" ")));
        if !self.spec.is_empty() {
            out.push_str(&format!("spec: {} ({})\n", self.spec, self.spec_digest));
        }
        out.push_str(&format!("solver: {} [{}]\n", self.solver, self.solver_version));
        out.push_str(&format!("outcome: {} (exit {})\n", self.outcome, self.exit_code));
        for (k, v) in &self.summary {
            out.push_str(&format!("{}: {}\n", k, v));
        }
        for l in &self.lines {
            out.push_str(l);
            out.push('\n');
        }
        if !self.timings_ms.is_empty() {
            let t: Vec<String> = self.timings_ms.iter().map(|(k, v)| format!("{}={:.1}ms", k, v)).collect();
            out.push_str(&format!("timings: {} (solver calls: {})\n", t.join(" "), self.solver_calls));
        }
        for c in &self.caveats {
            out.push_str(&format!("caveat: {}\n", c));
        }
        for a in &self.artifacts {
            out.push_str(&format!("artifact: {}\n", a));
        }
        out
    }

    /// Iteration records followed by the report, one JSON object per line.
    pub fn records_text(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::json!({ "record": "iteration", "data": r }).to_string());
            out.push('\n');
        }
        let mut v = serde_json::to_value(self).unwrap_or_default();
        if let Some(o) = v.as_object_mut() {
            o.insert("record".into(), "report".into());
            o.insert("text".into(), self.lines.clone().into());
        }
        out.push_str(&v.to_string());
        out.push('\n');
        out
    }
}
